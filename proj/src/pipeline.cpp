#include "ctopt/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <thread>

#include "ctopt/errors.hpp"

namespace ctopt {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

void check_keys(const json& j, const std::string& ctx,
                const std::set<std::string>& allowed) {
    if (!j.is_object()) throw std::invalid_argument(ctx + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) {
            throw std::invalid_argument("unknown key \"" + key + "\" in " + ctx);
        }
    }
}

Vec3 vec3_from_json(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3) {
        throw std::invalid_argument(ctx + " must be an array of 3 numbers");
    }
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

GridSpec grid_from_config(const json& j, const std::string& ctx) {
    check_keys(j, ctx, {"dims", "voxel_size_m", "origin_m"});
    GridSpec g;
    const auto& dims = j.at("dims");
    if (!dims.is_array() || dims.size() != 3) {
        throw std::invalid_argument(ctx + ".dims must be an array of 3 integers");
    }
    g.dims = {dims.at(0).get<int>(), dims.at(1).get<int>(), dims.at(2).get<int>()};
    g.voxel_size_m = j.at("voxel_size_m").get<double>();
    if (j.contains("origin_m")) {
        g.origin_m = vec3_from_json(j.at("origin_m"), ctx + ".origin_m");
    } else {
        // Default: grid centered on the world origin.
        g.origin_m = {-0.5 * g.voxel_size_m * (g.dims[0] - 1),
                      -0.5 * g.voxel_size_m * (g.dims[1] - 1),
                      -0.5 * g.voxel_size_m * (g.dims[2] - 1)};
    }
    g.validate();
    return g;
}

json grid_to_config(const GridSpec& g) {
    return json{{"dims", {g.dims[0], g.dims[1], g.dims[2]}},
                {"voxel_size_m", g.voxel_size_m},
                {"origin_m", vec3_to_json(g.origin_m)}};
}

ShapeSpec shape_from_json(const json& j) {
    check_keys(j, "shape",
               {"kind", "center", "mu", "half_extents", "radius", "axis", "height"});
    ShapeSpec s;
    const std::string kind = j.at("kind").get<std::string>();
    s.center = vec3_from_json(j.at("center"), "shape.center");
    s.mu_value = j.at("mu").get<double>();
    if (kind == "box") {
        s.kind = ShapeKind::box;
        s.half_extents = vec3_from_json(j.at("half_extents"), "shape.half_extents");
    } else if (kind == "sphere") {
        s.kind = ShapeKind::sphere;
        s.radius = j.at("radius").get<double>();
    } else if (kind == "cylinder") {
        s.kind = ShapeKind::cylinder;
        s.radius = j.at("radius").get<double>();
        const Vec3 axis = vec3_from_json(j.at("axis"), "shape.axis");
        s.axis = UnitVec::normalized(axis);
        s.height = j.at("height").get<double>();
    } else {
        throw std::invalid_argument("unknown shape kind \"" + kind + "\"");
    }
    s.validate();
    return s;
}

json shape_to_json(const ShapeSpec& s) {
    json j;
    switch (s.kind) {
        case ShapeKind::box:
            j["kind"] = "box";
            j["center"] = vec3_to_json(s.center);
            j["half_extents"] = vec3_to_json(s.half_extents);
            break;
        case ShapeKind::sphere:
            j["kind"] = "sphere";
            j["center"] = vec3_to_json(s.center);
            j["radius"] = s.radius;
            break;
        case ShapeKind::cylinder:
            j["kind"] = "cylinder";
            j["center"] = vec3_to_json(s.center);
            j["radius"] = s.radius;
            j["axis"] = json::array({s.axis.x(), s.axis.y(), s.axis.z()});
            j["height"] = s.height;
            break;
    }
    j["mu"] = s.mu_value;
    return j;
}

DetectorSpec detector_from_json(const json& j) {
    check_keys(j, "detector", {"width_m", "height_m", "pixels_u", "pixels_v"});
    DetectorSpec d;
    d.width_m = j.at("width_m").get<double>();
    d.height_m = j.at("height_m").get<double>();
    d.pixels_u = j.at("pixels_u").get<int>();
    d.pixels_v = j.at("pixels_v").get<int>();
    d.validate();
    return d;
}

json detector_to_json(const DetectorSpec& d) {
    return json{{"width_m", d.width_m},
                {"height_m", d.height_m},
                {"pixels_u", d.pixels_u},
                {"pixels_v", d.pixels_v}};
}

const std::set<std::string> kKnownSolvers = {"circular", "greedy", "ip", "oracle"};

void write_json_file(const fs::path& path, const json& j) {
    atomic_write(path, j.dump(2) + "\n");
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return json::parse(in);
}

std::vector<ProjectionImage> project_all(const Phantom& phantom,
                                         const std::vector<ViewCandidate>& views,
                                         int threads) {
    std::vector<ProjectionImage> out(views.size());
    if (threads <= 1) {
        for (std::size_t i = 0; i < views.size(); ++i) {
            out[i] = simulate_projection(phantom, views[i]);
        }
        return out;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= views.size()) return;
            out[i] = simulate_projection(phantom, views[i]);
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(threads, static_cast<int>(views.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return out;
}

json finite_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

std::string format_csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    check_keys(j, "config",
               {"phantom", "candidates", "vois", "delta_gamma_rad", "alpha", "k",
                "solver", "limits", "compare", "recon", "seed"});
    PipelineConfig c;

    const auto& ph = j.at("phantom");
    check_keys(ph, "phantom", {"dims", "voxel_size_m", "origin_m", "shapes"});
    json grid_part = ph;
    grid_part.erase("shapes");
    c.phantom.grid = grid_from_config(grid_part, "phantom");
    for (const auto& s : ph.at("shapes")) c.phantom.shapes.push_back(shape_from_json(s));

    const auto& cd = j.at("candidates");
    check_keys(cd, "candidates",
               {"type", "n", "n_tilts", "tilt_min_deg", "tilt_max_deg", "n_per_circle",
                "arc_deg", "sod_m", "sdd_m", "detector", "circle"});
    const std::string type = cd.at("type").get<std::string>();
    if (type == "full_sphere") {
        c.candidates.kind = CandidatesConfig::Kind::full_sphere;
        c.candidates.n = cd.at("n").get<int>();
    } else if (type == "tilted_circles") {
        c.candidates.kind = CandidatesConfig::Kind::tilted_circles;
        c.candidates.n_tilts = cd.at("n_tilts").get<int>();
        c.candidates.tilt_min_deg = cd.at("tilt_min_deg").get<double>();
        c.candidates.tilt_max_deg = cd.at("tilt_max_deg").get<double>();
        c.candidates.n_per_circle = cd.at("n_per_circle").get<int>();
        c.candidates.arc_deg = cd.at("arc_deg").get<double>();
    } else {
        throw std::invalid_argument("unknown candidates.type \"" + type + "\"");
    }
    c.candidates.sod_m = cd.at("sod_m").get<double>();
    c.candidates.sdd_m = cd.at("sdd_m").get<double>();
    c.candidates.detector = detector_from_json(cd.at("detector"));
    if (cd.contains("circle")) {
        check_keys(cd.at("circle"), "candidates.circle", {"n_views", "tilt_deg"});
        CircleBaselineConfig cb;
        cb.n_views = cd.at("circle").at("n_views").get<int>();
        if (cd.at("circle").contains("tilt_deg")) {
            cb.tilt_deg = cd.at("circle").at("tilt_deg").get<double>();
        }
        c.candidates.circle = cb;
    }

    for (const auto& v : j.at("vois")) {
        check_keys(v, "voi", {"id", "center", "roi_radius_m", "n_sphere_samples"});
        VoiConfig vc;
        vc.voi.id = v.at("id").get<int>();
        vc.voi.center = vec3_from_json(v.at("center"), "voi.center");
        vc.voi.roi_radius_m = v.at("roi_radius_m").get<double>();
        vc.n_sphere_samples = v.at("n_sphere_samples").get<int>();
        c.vois.push_back(vc);
    }

    c.delta_gamma_rad = j.at("delta_gamma_rad").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.k = j.at("k").get<std::size_t>();
    if (j.contains("solver")) c.solver = j.at("solver").get<std::string>();

    if (j.contains("limits")) {
        const auto& l = j.at("limits");
        check_keys(l, "limits",
                   {"stall_window_s", "min_improvement", "max_time_s", "max_nodes"});
        if (l.contains("stall_window_s")) {
            c.limits.stall_window_s =
                l.at("stall_window_s").is_null()
                    ? std::nullopt
                    : std::optional<double>(l.at("stall_window_s").get<double>());
        }
        if (l.contains("min_improvement")) {
            c.limits.min_improvement = l.at("min_improvement").get<double>();
        }
        if (l.contains("max_time_s") && !l.at("max_time_s").is_null()) {
            c.limits.max_time_s = l.at("max_time_s").get<double>();
        }
        if (l.contains("max_nodes") && !l.at("max_nodes").is_null()) {
            c.limits.max_nodes = l.at("max_nodes").get<std::size_t>();
        }
    }

    if (j.contains("compare")) {
        c.compare = j.at("compare").get<std::vector<std::string>>();
    } else {
        c.compare = {"circular", "greedy", "ip"};
    }

    const auto& rc = j.at("recon");
    check_keys(rc, "recon", {"dims", "voxel_size_m", "origin_m", "n_iters", "relaxation"});
    json rc_grid = rc;
    rc_grid.erase("n_iters");
    rc_grid.erase("relaxation");
    c.recon.grid = grid_from_config(rc_grid, "recon");
    c.recon.n_iters = rc.at("n_iters").get<int>();
    c.recon.relaxation = rc.at("relaxation").get<double>();

    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();

    c.validate();
    return c;
}

PipelineConfig PipelineConfig::from_file(const fs::path& path) {
    return from_json(read_json_file(path));
}

json PipelineConfig::to_json() const {
    json ph = grid_to_config(phantom.grid);
    ph["shapes"] = json::array();
    for (const auto& s : phantom.shapes) ph["shapes"].push_back(shape_to_json(s));

    json cd;
    if (candidates.kind == CandidatesConfig::Kind::full_sphere) {
        cd["type"] = "full_sphere";
        cd["n"] = candidates.n;
    } else {
        cd["type"] = "tilted_circles";
        cd["n_tilts"] = candidates.n_tilts;
        cd["tilt_min_deg"] = candidates.tilt_min_deg;
        cd["tilt_max_deg"] = candidates.tilt_max_deg;
        cd["n_per_circle"] = candidates.n_per_circle;
        cd["arc_deg"] = candidates.arc_deg;
    }
    cd["sod_m"] = candidates.sod_m;
    cd["sdd_m"] = candidates.sdd_m;
    cd["detector"] = detector_to_json(candidates.detector);
    if (candidates.circle) {
        cd["circle"] = json{{"n_views", candidates.circle->n_views},
                            {"tilt_deg", candidates.circle->tilt_deg}};
    }

    json vois = json::array();
    for (const auto& v : this->vois) {
        vois.push_back(json{{"id", v.voi.id},
                            {"center", vec3_to_json(v.voi.center)},
                            {"roi_radius_m", v.voi.roi_radius_m},
                            {"n_sphere_samples", v.n_sphere_samples}});
    }

    json limits_j;
    limits_j["stall_window_s"] =
        limits.stall_window_s ? json(*limits.stall_window_s) : json(nullptr);
    limits_j["min_improvement"] = limits.min_improvement;
    limits_j["max_time_s"] = limits.max_time_s ? json(*limits.max_time_s) : json(nullptr);
    limits_j["max_nodes"] = limits.max_nodes ? json(*limits.max_nodes) : json(nullptr);

    json rc = grid_to_config(recon.grid);
    rc["n_iters"] = recon.n_iters;
    rc["relaxation"] = recon.relaxation;

    return json{{"phantom", ph},
                {"candidates", cd},
                {"vois", vois},
                {"delta_gamma_rad", delta_gamma_rad},
                {"alpha", alpha},
                {"k", k},
                {"solver", solver},
                {"limits", limits_j},
                {"compare", compare},
                {"recon", rc},
                {"seed", seed}};
}

void PipelineConfig::validate() const {
    phantom.grid.validate();
    for (const auto& s : phantom.shapes) s.validate();
    candidates.detector.validate();
    if (!(candidates.sod_m > 0.0) || !(candidates.sdd_m > candidates.sod_m)) {
        throw std::invalid_argument("require 0 < sod_m < sdd_m");
    }
    if (vois.empty()) throw std::invalid_argument("need at least one voi");
    for (const auto& v : vois) {
        v.voi.validate();
        if (v.n_sphere_samples < 1) {
            throw std::invalid_argument("voi n_sphere_samples must be >= 1");
        }
    }
    if (!(delta_gamma_rad > 0.0) || !(delta_gamma_rad < std::numbers::pi / 2)) {
        throw std::invalid_argument("delta_gamma_rad must lie in (0, pi/2)");
    }
    if (alpha < 0.0 || alpha > 1.0) {
        throw std::invalid_argument("alpha must lie in [0, 1]");
    }
    if (k < 1) throw std::invalid_argument("budget k must be >= 1");
    if (!kKnownSolvers.count(solver)) {
        throw std::invalid_argument("unknown solver \"" + solver + "\"");
    }
    for (const auto& s : compare) {
        if (!kKnownSolvers.count(s)) {
            throw std::invalid_argument("unknown solver \"" + s + "\" in compare list");
        }
    }

    if (solver == "circular") check_circular_baseline();

    recon.grid.validate();
    if (recon.n_iters < 1) throw std::invalid_argument("recon.n_iters must be >= 1");
    if (!(recon.relaxation > 0.0) || recon.relaxation > 1.0) {
        throw std::invalid_argument("recon.relaxation must lie in (0, 1]");
    }
}

void PipelineConfig::validate_compare() const {
    validate();
    if (compare.empty()) throw std::invalid_argument("compare list is empty");
    for (const auto& s : compare) {
        if (s == "circular") check_circular_baseline();
    }
}

void PipelineConfig::check_circular_baseline() const {
    if (candidates.kind == CandidatesConfig::Kind::full_sphere) {
        if (!candidates.circle) {
            throw std::invalid_argument(
                "circular baseline on a full-sphere candidate set requires "
                "candidates.circle");
        }
        if (static_cast<std::size_t>(candidates.circle->n_views) < k) {
            throw std::invalid_argument("candidates.circle.n_views must be >= k");
        }
    } else if (static_cast<std::size_t>(candidates.n_per_circle) < k) {
        throw std::invalid_argument("n_per_circle must be >= k for the circular baseline");
    }
}

PipelineRunner::PipelineRunner(PipelineConfig config, fs::path out_dir, int threads,
                               bool verbose)
    : config_(std::move(config)),
      out_dir_(std::move(out_dir)),
      threads_(threads),
      verbose_(verbose) {
    config_.validate();
    fs::create_directories(out_dir_);
    manifest_ = json{{"stages", json::object()}};
    if (fs::exists(out_dir_ / "manifest.json")) {
        try {
            manifest_ = read_json_file(out_dir_ / "manifest.json");
        } catch (...) {
            // Corrupt manifest: start over; artifacts are still cache-checked.
        }
    }
    cache_ = json::object();
    if (fs::exists(out_dir_ / "cache.json")) {
        try {
            cache_ = read_json_file(out_dir_ / "cache.json");
        } catch (...) {
        }
    }
}

bool PipelineRunner::cache_valid(const std::string& name, const std::string& key,
                                 const std::vector<std::string>& artifacts) const {
    if (!cache_.contains(name)) return false;
    const auto& entry = cache_.at(name);
    if (entry.at("key").get<std::string>() != key) return false;
    const auto& recorded = entry.at("artifacts");
    for (const auto& art : artifacts) {
        if (!recorded.contains(art)) return false;
        const fs::path p = out_dir_ / art;
        if (!fs::exists(p)) return false;
        if (file_digest_hex(p) != recorded.at(art).get<std::string>()) return false;
    }
    return true;
}

void PipelineRunner::record_stage(const std::string& name, const StageOutcome& outcome) {
    json arts = json::object();
    for (const auto& art : outcome.artifacts) {
        arts[art] = file_digest_hex(out_dir_ / art);
    }
    manifest_["stages"][name] =
        json{{"key", outcome.key},
             {"artifacts", arts},
             {"timing", {{"wall_time_s", outcome.wall_time_s},
                         {"cache_hit", outcome.cache_hit}}}};
    write_manifest();
}

void PipelineRunner::record_failure(const std::string& name, const std::string& error) {
    manifest_["stages"][name] = json{{"failed", true}, {"error", error}};
    write_manifest();
}

void PipelineRunner::write_manifest() const {
    write_json_file(out_dir_ / "manifest.json", manifest_);
}

std::string PipelineRunner::run_stage(const std::string& name, const std::string& key,
                                      const std::vector<std::string>& artifacts,
                                      const std::function<void()>& compute) {
    StageOutcome outcome;
    outcome.key = key;
    outcome.artifacts = artifacts;

    if (cache_valid(name, key, artifacts)) {
        outcome.cache_hit = true;
        if (verbose_) std::cerr << "[ctopt] " << name << ": cache hit\n";
        record_stage(name, outcome);
        return key;
    }

    if (verbose_) std::cerr << "[ctopt] " << name << ": computing\n";
    const auto t0 = Clock::now();
    try {
        compute();
    } catch (const std::exception& e) {
        record_failure(name, e.what());
        throw;
    }
    outcome.wall_time_s = std::chrono::duration<double>(Clock::now() - t0).count();

    json arts = json::object();
    for (const auto& art : artifacts) {
        const fs::path p = out_dir_ / art;
        if (!fs::exists(p)) {
            record_failure(name, "stage did not produce artifact " + art);
            throw InternalInvariantError(name + " did not produce " + art);
        }
        arts[art] = file_digest_hex(p);
    }
    cache_[name] = json{{"key", key}, {"artifacts", arts}};
    write_json_file(out_dir_ / "cache.json", cache_);
    record_stage(name, outcome);
    return key;
}

std::string PipelineRunner::phantom_key() const {
    Digest d;
    json ph = grid_to_config(config_.phantom.grid);
    ph["shapes"] = json::array();
    for (const auto& s : config_.phantom.shapes) ph["shapes"].push_back(shape_to_json(s));
    d.update(ph.dump());
    return d.hex();
}

std::string PipelineRunner::candidates_key() const {
    Digest d;
    d.update(config_.to_json().at("candidates").dump());
    return d.hex();
}

std::string PipelineRunner::project_key() const {
    Digest d;
    d.update(phantom_key());
    d.update(candidates_key());
    return d.hex();
}

std::string PipelineRunner::coverage_key() const {
    Digest d;
    d.update(project_key());
    d.update(config_.to_json().at("vois").dump());
    d.update_f64(config_.delta_gamma_rad);
    return d.hex();
}

std::string PipelineRunner::select_key(const std::string& solver) const {
    Digest d;
    d.update(coverage_key());
    d.update_f64(config_.alpha);
    d.update_u64(config_.k);
    d.update(solver);
    d.update(config_.to_json().at("limits").dump());
    return d.hex();
}

std::string PipelineRunner::recon_key(const std::string& solver) const {
    Digest d;
    d.update(select_key(solver));
    d.update(project_key());
    d.update(config_.to_json().at("recon").dump());
    return d.hex();
}

std::string PipelineRunner::evaluate_key(const std::vector<std::string>& solvers) const {
    Digest d;
    for (const auto& s : solvers) d.update(recon_key(s));
    d.update(config_.to_json().at("vois").dump());
    d.update(phantom_key());
    return d.hex();
}

void PipelineRunner::stage_phantom() {
    run_stage("phantom", phantom_key(), {"phantom.raw", "phantom.json"}, [&]() {
        const Phantom ph = build_phantom(config_.phantom.grid, config_.phantom.shapes);
        save_phantom(out_dir_ / "phantom.raw", ph);
    });
}

namespace {

CandidateSet generate_candidates(const CandidatesConfig& cfg) {
    if (cfg.kind == CandidatesConfig::Kind::full_sphere) {
        return full_sphere_candidates(cfg.n, cfg.sod_m, cfg.sdd_m, cfg.detector);
    }
    return tilted_circle_candidates(cfg.n_tilts, cfg.tilt_min_deg, cfg.tilt_max_deg,
                                    cfg.n_per_circle, cfg.arc_deg, cfg.sdd_m, cfg.sod_m,
                                    cfg.detector);
}

}  // namespace

void PipelineRunner::stage_candidates() {
    std::vector<std::string> artifacts = {"candidates.json", "candidates.csv"};
    const bool aux_circle = config_.candidates.circle.has_value();
    if (aux_circle) {
        artifacts.push_back("circle_candidates.json");
        artifacts.push_back("circle_candidates.csv");
    }
    run_stage("candidates", candidates_key(), artifacts, [&]() {
        const CandidateSet set = generate_candidates(config_.candidates);
        write_json_file(out_dir_ / "candidates.json", candidate_set_to_json(set));
        atomic_write(out_dir_ / "candidates.csv", candidates_to_csv(set));
        if (aux_circle) {
            const auto& cb = *config_.candidates.circle;
            const CandidateSet circle =
                circle_candidates(cb.n_views, cb.tilt_deg, 360.0, config_.candidates.sdd_m,
                                  config_.candidates.sod_m, config_.candidates.detector);
            write_json_file(out_dir_ / "circle_candidates.json",
                            candidate_set_to_json(circle));
            atomic_write(out_dir_ / "circle_candidates.csv", candidates_to_csv(circle));
        }
    });
}

void PipelineRunner::stage_project() {
    std::vector<std::string> artifacts = {"projections.raw", "projections.json"};
    const bool aux_circle = config_.candidates.circle.has_value();
    if (aux_circle) {
        artifacts.push_back("circle_projections.raw");
        artifacts.push_back("circle_projections.json");
    }
    run_stage("project", project_key(), artifacts, [&]() {
        const Phantom ph = load_phantom(out_dir_ / "phantom.raw");
        const CandidateSet set =
            candidate_set_from_json(read_json_file(out_dir_ / "candidates.json"));
        save_projections(out_dir_ / "projections.raw",
                         project_all(ph, set.views, threads_));
        if (aux_circle) {
            const CandidateSet circle = candidate_set_from_json(
                read_json_file(out_dir_ / "circle_candidates.json"));
            save_projections(out_dir_ / "circle_projections.raw",
                             project_all(ph, circle.views, threads_));
        }
    });
}

namespace {

std::vector<SphereSampling> make_samplings(const std::vector<VoiConfig>& vois) {
    std::vector<SphereSampling> out;
    out.reserve(vois.size());
    for (const auto& v : vois) {
        out.push_back(fibonacci_half_sphere(v.n_sphere_samples, v.voi.id));
    }
    return out;
}

std::vector<Voi> voi_list(const std::vector<VoiConfig>& vois) {
    std::vector<Voi> out;
    out.reserve(vois.size());
    for (const auto& v : vois) out.push_back(v.voi);
    return out;
}

// A_D for one view: mean absorbed fraction over the projected VOI ROIs;
// a view that cannot see every VOI is scored fully absorbed (1.0).
double view_absorption(const ViewCandidate& view, const ProjectionImage& img,
                       const std::vector<Voi>& vois) {
    double sum = 0.0;
    for (const auto& voi : vois) {
        try {
            const PixelRect roi = project_voi_roi(view, voi);
            sum += absorption_metric(img, roi);
        } catch (const RoiNotVisibleError&) {
            return 1.0;
        }
    }
    return sum / static_cast<double>(vois.size());
}

}  // namespace

void PipelineRunner::stage_coverage() {
    std::vector<std::string> artifacts = {"coverage.bin", "absorption.json"};
    const bool aux_circle = config_.candidates.circle.has_value();
    if (aux_circle) artifacts.push_back("circle_coverage.bin");

    // Human-readable form only at small scale (sizes known from config).
    std::size_t total_samples = 0;
    for (const auto& v : config_.vois) {
        total_samples += static_cast<std::size_t>(v.n_sphere_samples);
    }
    const std::size_t n_cand =
        config_.candidates.kind == CandidatesConfig::Kind::full_sphere
            ? static_cast<std::size_t>(config_.candidates.n)
            : static_cast<std::size_t>(config_.candidates.n_tilts) *
                  config_.candidates.n_per_circle;
    const bool small = n_cand <= 64 && total_samples <= 512;
    if (small) artifacts.push_back("coverage.csv");

    run_stage("coverage", coverage_key(), artifacts, [&]() {
        const CandidateSet set =
            candidate_set_from_json(read_json_file(out_dir_ / "candidates.json"));
        const auto projections = load_projections(out_dir_ / "projections.raw");
        if (projections.size() != set.views.size()) {
            throw std::runtime_error("projection stack does not match candidate set");
        }
        const auto vois = voi_list(config_.vois);
        const auto samplings = make_samplings(config_.vois);
        const CompletenessConfig cc(config_.delta_gamma_rad);

        const CoverageMatrix matrix = build_coverage_matrix(set.views, vois, samplings, cc);
        save_coverage_matrix(out_dir_ / "coverage.bin", matrix);
        if (small) {
            atomic_write(out_dir_ / "coverage.csv", coverage_matrix_to_csv(matrix));
        }

        json absorption = json::array();
        for (std::size_t i = 0; i < set.views.size(); ++i) {
            absorption.push_back(view_absorption(set.views[i], projections[i], vois));
        }
        write_json_file(out_dir_ / "absorption.json",
                        json{{"alpha", config_.alpha}, {"values", absorption}});

        if (aux_circle) {
            const CandidateSet circle = candidate_set_from_json(
                read_json_file(out_dir_ / "circle_candidates.json"));
            const CoverageMatrix cm =
                build_coverage_matrix(circle.views, vois, samplings, cc);
            save_coverage_matrix(out_dir_ / "circle_coverage.bin", cm);
        }
    });
}

void PipelineRunner::stage_select(const std::string& solver) {
    if (!kKnownSolvers.count(solver)) {
        throw std::invalid_argument("unknown solver \"" + solver + "\"");
    }
    run_stage("select_" + solver, select_key(solver), {"solution_" + solver + ".json"},
              [&]() {
        const CoverageMatrix matrix = load_coverage_matrix(out_dir_ / "coverage.bin");
        const json absorption_j = read_json_file(out_dir_ / "absorption.json");
        const std::vector<double> absorption =
            absorption_j.at("values").get<std::vector<double>>();

        Solution solution;
        json doc;
        if (solver == "circular") {
            const bool aux_circle = config_.candidates.circle.has_value();
            if (aux_circle) {
                const CandidateSet circle = candidate_set_from_json(
                    read_json_file(out_dir_ / "circle_candidates.json"));
                const CoverageMatrix cm =
                    load_coverage_matrix(out_dir_ / "circle_coverage.bin");
                solution = circular_select(circle, cm, config_.k, 0);
                SelectionProblem pseudo = assemble_problem(
                    cm, std::vector<double>(cm.n_candidates, 0.0), 1.0, config_.k);
                doc = solution_to_json(solution, solver, pseudo, SolverLimits::none());
                doc["candidate_space"] = "circle";
            } else {
                const CandidateSet set = candidate_set_from_json(
                    read_json_file(out_dir_ / "candidates.json"));
                solution = circular_select(set, matrix, config_.k,
                                           set.untilted_circle().circle_id);
                SelectionProblem pseudo = assemble_problem(
                    matrix, std::vector<double>(matrix.n_candidates, 0.0), 1.0,
                    config_.k);
                doc = solution_to_json(solution, solver, pseudo, SolverLimits::none());
                doc["candidate_space"] = "main";
            }
        } else {
            const SelectionProblem problem =
                assemble_problem(matrix, absorption, config_.alpha, config_.k);
            if (solver == "greedy") {
                solution = greedy_select(problem);
            } else if (solver == "ip") {
                solution = bnb_select(problem, config_.limits);
            } else {  // oracle
                solution = brute_force_select(problem);
            }
            doc = solution_to_json(solution, solver, problem, config_.limits);
            doc["candidate_space"] = "main";
        }
        write_json_file(out_dir_ / ("solution_" + solver + ".json"), doc);
    });
}

void PipelineRunner::stage_recon(const std::string& solver) {
    const std::string sol_art = "solution_" + solver + ".json";
    const std::string raw_art = "recon_" + solver + ".raw";
    run_stage("recon_" + solver, recon_key(solver),
              {raw_art, "recon_" + solver + ".json", "recon_" + solver + "_stats.json"},
              [&]() {
        const json sol = read_json_file(out_dir_ / sol_art);
        const std::vector<int> selected = sol.at("selected").get<std::vector<int>>();
        const std::string space = sol.value("candidate_space", "main");

        const bool circle_space = space == "circle";
        const CandidateSet set = candidate_set_from_json(read_json_file(
            out_dir_ / (circle_space ? "circle_candidates.json" : "candidates.json")));
        const auto projections = load_projections(
            out_dir_ / (circle_space ? "circle_projections.raw" : "projections.raw"));

        std::vector<ViewCandidate> views;
        std::vector<ProjectionImage> imgs;
        for (int id : selected) {
            views.push_back(set.views.at(static_cast<std::size_t>(id)));
            imgs.push_back(projections.at(static_cast<std::size_t>(id)));
        }

        const SartResult result =
            sart_reconstruct(imgs, views, config_.recon.grid, config_.recon.n_iters,
                             config_.recon.relaxation);
        save_volume(out_dir_ / raw_art, result.volume.grid, result.volume.values);
        write_json_file(out_dir_ / ("recon_" + solver + "_stats.json"),
                        json{{"residual_norms", result.residual_norms}});
    });
}

void PipelineRunner::stage_evaluate(const std::vector<std::string>& solvers) {
    const std::vector<std::string> artifacts = {"report.json", "compare.csv"};
    run_stage("evaluate", evaluate_key(solvers), artifacts, [&]() {
        // Ground truth on the reconstruction grid.
        const Phantom truth = build_phantom(config_.recon.grid, config_.phantom.shapes);
        Volume reference;
        reference.grid = truth.grid;
        reference.values = truth.mu;

        // ROI = union of the VOI spheres; background = union of shells
        // (1..2 radii), kept disjoint from the ROI.
        RoiMask roi;
        roi.grid = config_.recon.grid;
        roi.inside.assign(config_.recon.grid.voxel_count(), 0);
        RoiMask background = roi;
        for (const auto& v : config_.vois) {
            const RoiMask s =
                sphere_mask(config_.recon.grid, v.voi.center, v.voi.roi_radius_m);
            const RoiMask sh = shell_mask(config_.recon.grid, v.voi.center,
                                          v.voi.roi_radius_m, 2.0 * v.voi.roi_radius_m);
            for (std::size_t i = 0; i < roi.inside.size(); ++i) {
                roi.inside[i] |= s.inside[i];
                background.inside[i] |= sh.inside[i];
            }
        }
        for (std::size_t i = 0; i < roi.inside.size(); ++i) {
            if (roi.inside[i]) background.inside[i] = 0;
        }

        json report;
        report["config_digest"] = [&]() {
            Digest d;
            d.update(config_.to_json().dump());
            return d.hex();
        }();
        report["solvers"] = json::object();

        std::string csv = "approach,ssim,psnr_db,cnr,coverage_fraction,gap,wall_time_s\n";
        for (const auto& solver : solvers) {
            const json sol = read_json_file(out_dir_ / ("solution_" + solver + ".json"));
            const Volume recon = load_volume(out_dir_ / ("recon_" + solver + ".raw"));

            const double psnr_db = psnr(reference, recon, roi);
            const double ssim_v = ssim(reference, recon, roi);
            const CnrResult cnr_v = cnr(recon, roi, background);

            json entry = sol;
            entry["evaluation"] = json{
                {"ssim", ssim_v},
                {"psnr_db", finite_or_null(psnr_db)},
                {"cnr", finite_or_null(cnr_v.value)},
                {"cnr_constant_background", cnr_v.constant_background}};
            report["solvers"][solver] = entry;

            csv += solver + "," + format_csv_number(ssim_v) + "," +
                   format_csv_number(psnr_db) + "," + format_csv_number(cnr_v.value) +
                   "," + format_csv_number(sol.at("fraction").get<double>()) + "," +
                   format_csv_number(sol.at("gap").get<double>()) + "," +
                   format_csv_number(sol.at("timing").at("wall_time_s").get<double>()) +
                   "\n";
        }
        write_json_file(out_dir_ / "report.json", report);
        atomic_write(out_dir_ / "compare.csv", csv);
    });
}

json PipelineRunner::run() {
    stage_phantom();
    stage_candidates();
    stage_project();
    stage_coverage();
    stage_select(config_.solver);
    stage_recon(config_.solver);
    stage_evaluate({config_.solver});
    return manifest_;
}

json PipelineRunner::compare() {
    config_.validate_compare();
    stage_phantom();
    stage_candidates();
    stage_project();
    stage_coverage();
    for (const auto& solver : config_.compare) stage_select(solver);
    for (const auto& solver : config_.compare) stage_recon(solver);
    stage_evaluate(config_.compare);
    return manifest_;
}

json strip_timing(const json& j) {
    if (j.is_object()) {
        json out = json::object();
        for (const auto& [key, value] : j.items()) {
            if (key == "timing") continue;
            out[key] = strip_timing(value);
        }
        return out;
    }
    if (j.is_array()) {
        json out = json::array();
        for (const auto& value : j) out.push_back(strip_timing(value));
        return out;
    }
    return j;
}

}  // namespace ctopt
