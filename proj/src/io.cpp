#include "ctopt/io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ctopt {

namespace fs = std::filesystem;

void Digest::update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        state_ ^= p[i];
        state_ *= 0x100000001b3ull;
    }
}

void Digest::update_u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    update(b, 8);
}

void Digest::update_f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    update_u64(bits);
}

std::string Digest::hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(state_));
    return buf;
}

std::string file_digest_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Digest d;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        d.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return d.hex();
}

std::string problem_digest_hex(const SelectionProblem& problem) {
    Digest d;
    d.update_u64(problem.matrix.n_candidates);
    d.update_u64(problem.matrix.n_samples);
    for (std::size_t off : problem.matrix.voi_offsets) d.update_u64(off);
    for (const auto& row : problem.matrix.rows) {
        for (std::uint64_t w : row.words()) d.update_u64(w);
    }
    for (double a : problem.absorption) d.update_f64(a);
    d.update_f64(problem.alpha);
    d.update_u64(problem.k);
    return d.hex();
}

void atomic_write(const fs::path& path, const void* data, std::size_t n) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void atomic_write(const fs::path& path, const std::string& content) {
    atomic_write(path, content.data(), content.size());
}

namespace {

fs::path sidecar_path(const fs::path& raw_path) {
    fs::path p = raw_path;
    p.replace_extension(".json");
    return p;
}

void write_raw_f32(const fs::path& path, const std::vector<double>& values) {
    std::vector<float> f(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) f[i] = static_cast<float>(values[i]);
    atomic_write(path, f.data(), f.size() * sizeof(float));
}

std::vector<double> read_raw_f32(const fs::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<float> f(expected);
    in.read(reinterpret_cast<char*>(f.data()),
            static_cast<std::streamsize>(expected * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != expected * sizeof(float)) {
        throw std::runtime_error("raw file " + path.string() + " is truncated");
    }
    std::vector<double> d(expected);
    for (std::size_t i = 0; i < expected; ++i) d[i] = f[i];
    return d;
}

json grid_to_json(const GridSpec& grid) {
    return json{{"dims", {grid.dims[0], grid.dims[1], grid.dims[2]}},
                {"voxel_size_m", grid.voxel_size_m},
                {"origin_m", {grid.origin_m.x, grid.origin_m.y, grid.origin_m.z}}};
}

GridSpec grid_from_json(const json& j) {
    GridSpec g;
    g.dims = {j.at("dims").at(0).get<int>(), j.at("dims").at(1).get<int>(),
              j.at("dims").at(2).get<int>()};
    g.voxel_size_m = j.at("voxel_size_m").get<double>();
    g.origin_m = {j.at("origin_m").at(0).get<double>(),
                  j.at("origin_m").at(1).get<double>(),
                  j.at("origin_m").at(2).get<double>()};
    g.validate();
    return g;
}

}  // namespace

void save_volume(const fs::path& raw_path, const GridSpec& grid,
                 const std::vector<double>& values) {
    grid.validate();
    if (values.size() != grid.voxel_count()) {
        throw std::invalid_argument("value count does not match grid");
    }
    write_raw_f32(raw_path, values);
    atomic_write(sidecar_path(raw_path), grid_to_json(grid).dump(2) + "\n");
}

Volume load_volume(const fs::path& raw_path) {
    std::ifstream side(sidecar_path(raw_path));
    if (!side) throw std::runtime_error("missing sidecar for " + raw_path.string());
    const json j = json::parse(side);
    Volume v;
    v.grid = grid_from_json(j);
    v.values = read_raw_f32(raw_path, v.grid.voxel_count());
    return v;
}

void save_phantom(const fs::path& raw_path, const Phantom& phantom) {
    save_volume(raw_path, phantom.grid, phantom.mu);
}

Phantom load_phantom(const fs::path& raw_path) {
    Volume v = load_volume(raw_path);
    Phantom p;
    p.grid = v.grid;
    p.mu = std::move(v.values);
    return p;
}

void save_projections(const fs::path& raw_path,
                      const std::vector<ProjectionImage>& projections) {
    if (projections.empty()) throw std::invalid_argument("no projections to save");
    const int pu = projections.front().pixels_u;
    const int pv = projections.front().pixels_v;
    std::vector<double> all;
    all.reserve(projections.size() * static_cast<std::size_t>(pu) * pv);
    json ids = json::array();
    for (const auto& p : projections) {
        if (p.pixels_u != pu || p.pixels_v != pv) {
            throw std::invalid_argument("projection sizes differ within stack");
        }
        all.insert(all.end(), p.values.begin(), p.values.end());
        ids.push_back(p.view_id);
    }
    write_raw_f32(raw_path, all);
    json side{{"pixels_u", pu}, {"pixels_v", pv}, {"view_ids", ids}};
    atomic_write(sidecar_path(raw_path), side.dump(2) + "\n");
}

std::vector<ProjectionImage> load_projections(const fs::path& raw_path) {
    std::ifstream side(sidecar_path(raw_path));
    if (!side) throw std::runtime_error("missing sidecar for " + raw_path.string());
    const json j = json::parse(side);
    const int pu = j.at("pixels_u").get<int>();
    const int pv = j.at("pixels_v").get<int>();
    const auto ids = j.at("view_ids");
    const std::size_t per = static_cast<std::size_t>(pu) * pv;
    const auto all = read_raw_f32(raw_path, per * ids.size());

    std::vector<ProjectionImage> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ProjectionImage img;
        img.view_id = ids.at(i).get<int>();
        img.pixels_u = pu;
        img.pixels_v = pv;
        img.values.assign(all.begin() + static_cast<std::ptrdiff_t>(i * per),
                          all.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
        out.push_back(std::move(img));
    }
    return out;
}

namespace {
constexpr char kMatrixMagic[4] = {'C', 'V', 'M', 'X'};
constexpr std::uint32_t kMatrixVersion = 1;

void append_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}
void append_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

class Reader {
public:
    Reader(const char* p, std::size_t n) : p_(p), n_(n) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(p_[off_ + i])) << (8 * i);
        off_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(p_[off_ + i])) << (8 * i);
        off_ += 8;
        return v;
    }
    const char* bytes(std::size_t n) {
        need(n);
        const char* r = p_ + off_;
        off_ += n;
        return r;
    }

private:
    void need(std::size_t n) const {
        if (off_ + n > n_) throw std::runtime_error("coverage matrix file is truncated");
    }
    const char* p_;
    std::size_t n_;
    std::size_t off_ = 0;
};

}  // namespace

void save_coverage_matrix(const fs::path& path, const CoverageMatrix& m) {
    m.validate();
    std::string buf;
    buf.append(kMatrixMagic, 4);
    append_u32(buf, kMatrixVersion);
    append_u64(buf, m.n_candidates);
    append_u64(buf, m.n_samples);
    append_u64(buf, m.voi_offsets.size());
    for (std::size_t off : m.voi_offsets) append_u64(buf, off);
    for (const auto& row : m.rows) {
        for (std::uint64_t w : row.words()) append_u64(buf, w);
    }
    atomic_write(path, buf);
}

CoverageMatrix load_coverage_matrix(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    Reader r(data.data(), data.size());
    if (std::memcmp(r.bytes(4), kMatrixMagic, 4) != 0) {
        throw std::runtime_error(path.string() + " is not a coverage matrix file");
    }
    if (r.u32() != kMatrixVersion) {
        throw std::runtime_error("unsupported coverage matrix version");
    }
    CoverageMatrix m;
    m.n_candidates = r.u64();
    m.n_samples = r.u64();
    const std::size_t n_vois = r.u64();
    m.voi_offsets.resize(n_vois);
    for (auto& off : m.voi_offsets) off = r.u64();
    m.rows.reserve(m.n_candidates);
    for (std::size_t i = 0; i < m.n_candidates; ++i) {
        Bitset row(m.n_samples);
        for (auto& w : row.words()) w = r.u64();
        m.rows.push_back(std::move(row));
    }
    m.validate();
    return m;
}

std::string coverage_matrix_to_csv(const CoverageMatrix& m) {
    std::string out = "candidate";
    for (std::size_t i = 0; i < m.n_samples; ++i) out += ",s" + std::to_string(i);
    out += "\n";
    for (std::size_t v = 0; v < m.n_candidates; ++v) {
        out += std::to_string(v);
        for (std::size_t i = 0; i < m.n_samples; ++i) {
            out += m.rows[v].test(i) ? ",1" : ",0";
        }
        out += "\n";
    }
    return out;
}

json solution_to_json(const Solution& solution, const std::string& solver_name,
                      const SelectionProblem& problem, const SolverLimits& limits) {
    json limits_j;
    limits_j["stall_window_s"] =
        limits.stall_window_s ? json(*limits.stall_window_s) : json(nullptr);
    limits_j["min_improvement"] = limits.min_improvement;
    limits_j["max_time_s"] = limits.max_time_s ? json(*limits.max_time_s) : json(nullptr);
    limits_j["max_nodes"] = limits.max_nodes ? json(*limits.max_nodes) : json(nullptr);

    const double fraction =
        problem.matrix.n_samples == 0
            ? 0.0
            : static_cast<double>(solution.covered_count) /
                  static_cast<double>(problem.matrix.n_samples);

    return json{{"solver", solver_name},
                {"selected", solution.selected},
                {"covered_count", solution.covered_count},
                {"n_samples", problem.matrix.n_samples},
                {"fraction", fraction},
                {"upper_bound", solution.upper_bound},
                {"gap", solution.gap},
                {"status", to_string(solution.status)},
                {"timing", {{"wall_time_s", solution.wall_time_s}}},
                {"limits", limits_j},
                {"problem_digest", problem_digest_hex(problem)}};
}

json candidate_set_to_json(const CandidateSet& set) {
    json views = json::array();
    for (const auto& v : set.views) {
        views.push_back(
            {{"id", v.id},
             {"source", {v.source_pos.x, v.source_pos.y, v.source_pos.z}},
             {"detector_center",
              {v.detector_center.x, v.detector_center.y, v.detector_center.z}},
             {"normal",
              {v.detector_normal.x(), v.detector_normal.y(), v.detector_normal.z()}},
             {"u_axis",
              {v.detector_u_axis.x(), v.detector_u_axis.y(), v.detector_u_axis.z()}},
             {"detector",
              {{"width_m", v.detector.width_m},
               {"height_m", v.detector.height_m},
               {"pixels_u", v.detector.pixels_u},
               {"pixels_v", v.detector.pixels_v}}}});
    }
    json circles = json::array();
    for (const auto& c : set.circles) {
        circles.push_back({{"circle_id", c.circle_id},
                           {"tilt_deg", c.tilt_deg},
                           {"view_ids", c.view_ids}});
    }
    return json{{"views", views}, {"circles", circles}};
}

CandidateSet candidate_set_from_json(const json& j) {
    CandidateSet set;
    for (const auto& v : j.at("views")) {
        ViewCandidate view;
        view.id = v.at("id").get<int>();
        view.source_pos = {v.at("source").at(0).get<double>(),
                           v.at("source").at(1).get<double>(),
                           v.at("source").at(2).get<double>()};
        view.detector_center = {v.at("detector_center").at(0).get<double>(),
                                v.at("detector_center").at(1).get<double>(),
                                v.at("detector_center").at(2).get<double>()};
        view.detector_normal = UnitVec::from_components(
            v.at("normal").at(0).get<double>(), v.at("normal").at(1).get<double>(),
            v.at("normal").at(2).get<double>());
        view.detector_u_axis = UnitVec::from_components(
            v.at("u_axis").at(0).get<double>(), v.at("u_axis").at(1).get<double>(),
            v.at("u_axis").at(2).get<double>());
        const auto& d = v.at("detector");
        view.detector.width_m = d.at("width_m").get<double>();
        view.detector.height_m = d.at("height_m").get<double>();
        view.detector.pixels_u = d.at("pixels_u").get<int>();
        view.detector.pixels_v = d.at("pixels_v").get<int>();
        view.validate();
        set.views.push_back(std::move(view));
    }
    for (const auto& c : j.at("circles")) {
        CircleInfo circle;
        circle.circle_id = c.at("circle_id").get<int>();
        circle.tilt_deg = c.at("tilt_deg").get<double>();
        circle.view_ids = c.at("view_ids").get<std::vector<int>>();
        set.circles.push_back(std::move(circle));
    }
    return set;
}

}  // namespace ctopt
