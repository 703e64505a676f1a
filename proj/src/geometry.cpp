#include "ctopt/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace ctopt {

namespace {

constexpr double kPi = std::numbers::pi;

// Golden-angle azimuth increment, radians.
const double kGoldenAngle = kPi * (3.0 - std::sqrt(5.0));

double deg2rad(double deg) { return deg * kPi / 180.0; }

Vec3 rotate_about_x(const Vec3& v, double angle_rad) {
    const double c = std::cos(angle_rad);
    const double s = std::sin(angle_rad);
    return {v.x, c * v.y - s * v.z, s * v.y + c * v.z};
}

// Fibonacci lattice point i of m: z descends from near +1 to near -1 with
// the half-step offset, azimuth advances by the golden angle.
UnitVec lattice_point(int i, int m) {
    const double z = 1.0 - (2.0 * i + 1.0) / m;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double theta = kGoldenAngle * i;
    return UnitVec::from_components(r * std::cos(theta), r * std::sin(theta), z);
}

// View pose for a source on the sphere of radius sod: detector center
// diametrically opposite at distance sdd - sod, normal toward the source.
ViewCandidate make_view(int id, const Vec3& source, const UnitVec& u_axis,
                        double sdd_m, double sod_m, const DetectorSpec& detector) {
    ViewCandidate v;
    v.id = id;
    v.source_pos = source;
    v.detector_center = source * (-(sdd_m - sod_m) / sod_m);
    v.detector_normal = UnitVec::normalized(source);
    v.detector_u_axis = u_axis;
    v.detector = detector;
    return v;
}

// Deterministic in-plane axis perpendicular to the detector normal, for
// poses that do not come with a natural tangent.
UnitVec perpendicular_axis(const UnitVec& normal) {
    const Vec3 ref = std::abs(normal.z()) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    return UnitVec::normalized(normal.vec().cross(ref));
}

void check_distances(double sod_m, double sdd_m) {
    if (!(sod_m > 0.0) || !(sdd_m > sod_m)) {
        throw std::invalid_argument("require 0 < sod_m < sdd_m");
    }
}

}  // namespace

void DetectorSpec::validate() const {
    if (!(width_m > 0.0) || !(height_m > 0.0)) {
        throw std::invalid_argument("detector physical size must be positive");
    }
    if (pixels_u < 1 || pixels_v < 1) {
        throw std::invalid_argument("detector needs at least one pixel per axis");
    }
}

void ViewCandidate::validate() const {
    detector.validate();
    if (std::abs(detector_normal.dot(detector_u_axis)) > 1e-9) {
        throw std::invalid_argument("detector normal and u-axis must be perpendicular");
    }
    if (source_pos == detector_center) {
        throw std::invalid_argument("source coincides with detector center");
    }
}

void Voi::validate() const {
    if (!(roi_radius_m > 0.0)) {
        throw std::invalid_argument("voi roi_radius_m must be positive");
    }
}

const CircleInfo& CandidateSet::untilted_circle() const {
    if (circles.empty()) {
        throw std::invalid_argument("candidate set has no circles");
    }
    const CircleInfo* best = &circles.front();
    for (const auto& c : circles) {
        if (std::abs(c.tilt_deg) < std::abs(best->tilt_deg)) best = &c;
    }
    return *best;
}

const CircleInfo& CandidateSet::circle(int circle_id) const {
    for (const auto& c : circles) {
        if (c.circle_id == circle_id) return c;
    }
    throw std::invalid_argument("unknown circle id " + std::to_string(circle_id));
}

std::vector<UnitVec> fibonacci_full_sphere(int n) {
    if (n < 1) throw std::invalid_argument("sphere lattice needs n >= 1");
    std::vector<UnitVec> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) pts.push_back(lattice_point(i, n));
    return pts;
}

SphereSampling fibonacci_half_sphere(int n, int voi_id) {
    if (n < 1) throw std::invalid_argument("half-sphere sampling needs n >= 1");

    // With the half-step lattice, a nominal count of 2n keeps exactly the
    // first n points (z > 0). The adjustment loop is kept as a guard: it
    // terminates because the kept count is non-decreasing in m.
    int m = 2 * n;
    for (;;) {
        std::vector<UnitVec> kept;
        kept.reserve(n);
        for (int i = 0; i < m; ++i) {
            UnitVec p = lattice_point(i, m);
            if (p.z() >= 0.0) kept.push_back(p);
        }
        if (static_cast<int>(kept.size()) == n) {
            SphereSampling s;
            s.voi_id = voi_id;
            s.points = std::move(kept);
            return s;
        }
        m += (static_cast<int>(kept.size()) < n) ? 1 : -1;
    }
}

CandidateSet tilted_circle_candidates(int n_tilts, double tilt_min_deg,
                                      double tilt_max_deg, int n_per_circle,
                                      double arc_deg, double sdd_m, double sod_m,
                                      const DetectorSpec& detector) {
    if (n_tilts < 1 || n_per_circle < 1) {
        throw std::invalid_argument("need n_tilts >= 1 and n_per_circle >= 1");
    }
    if (!(arc_deg > 0.0) || arc_deg > 360.0) {
        throw std::invalid_argument("arc_deg must lie in (0, 360]");
    }
    if (tilt_max_deg < tilt_min_deg) {
        throw std::invalid_argument("tilt range is reversed");
    }
    check_distances(sod_m, sdd_m);
    detector.validate();

    CandidateSet set;
    set.views.reserve(static_cast<std::size_t>(n_tilts) * n_per_circle);

    // A full circle is sampled open (arc/n steps); a partial arc includes
    // both endpoints.
    const bool full_circle = arc_deg == 360.0;
    const double step_deg =
        full_circle ? arc_deg / n_per_circle
                    : (n_per_circle > 1 ? arc_deg / (n_per_circle - 1) : 0.0);

    int id = 0;
    for (int ti = 0; ti < n_tilts; ++ti) {
        const double tilt_deg =
            n_tilts > 1
                ? tilt_min_deg + ti * (tilt_max_deg - tilt_min_deg) / (n_tilts - 1)
                : tilt_min_deg;
        const double tilt = deg2rad(tilt_deg);

        CircleInfo circle;
        circle.circle_id = ti;
        circle.tilt_deg = tilt_deg;

        for (int j = 0; j < n_per_circle; ++j) {
            const double beta = deg2rad(j * step_deg);
            const Vec3 src0{sod_m * std::cos(beta), sod_m * std::sin(beta), 0.0};
            const Vec3 tan0{-std::sin(beta), std::cos(beta), 0.0};
            const Vec3 src = rotate_about_x(src0, tilt);
            const UnitVec u_axis = UnitVec::normalized(rotate_about_x(tan0, tilt));
            set.views.push_back(make_view(id, src, u_axis, sdd_m, sod_m, detector));
            circle.view_ids.push_back(id);
            ++id;
        }
        set.circles.push_back(std::move(circle));
    }
    return set;
}

CandidateSet full_sphere_candidates(int n, double sod_m, double sdd_m,
                                    const DetectorSpec& detector) {
    if (n < 1) throw std::invalid_argument("need n >= 1 candidates");
    check_distances(sod_m, sdd_m);
    detector.validate();

    CandidateSet set;
    set.views.reserve(n);
    const auto dirs = fibonacci_full_sphere(n);
    for (int i = 0; i < n; ++i) {
        const Vec3 src = dirs[i].vec() * sod_m;
        const UnitVec u_axis = perpendicular_axis(dirs[i]);
        set.views.push_back(make_view(i, src, u_axis, sdd_m, sod_m, detector));
    }
    return set;
}

CandidateSet circle_candidates(int n_views, double tilt_deg, double arc_deg,
                               double sdd_m, double sod_m,
                               const DetectorSpec& detector) {
    return tilted_circle_candidates(1, tilt_deg, tilt_deg, n_views, arc_deg,
                                    sdd_m, sod_m, detector);
}

UnitVec view_direction(const ViewCandidate& view, const Voi& voi) {
    const Vec3 diff = voi.center - view.source_pos;
    if (diff == Vec3{0, 0, 0}) {
        throw DegenerateGeometryError("voi center coincides with source");
    }
    return UnitVec::normalized(diff);
}

bool detector_hit(const ViewCandidate& view, const Vec3& point) {
    const Vec3 dir = point - view.source_pos;
    const double denom = dir.dot(view.detector_normal.vec());
    if (denom == 0.0) return false;  // ray parallel to the plane
    const double t =
        (view.detector_center - view.source_pos).dot(view.detector_normal.vec()) / denom;
    if (t <= 0.0) return false;
    const Vec3 hit = view.source_pos + dir * t;
    const Vec3 local = hit - view.detector_center;
    const double su = local.dot(view.detector_u_axis.vec());
    const double sv = local.dot(view.detector_v_axis().vec());
    return std::abs(su) <= 0.5 * view.detector.width_m &&
           std::abs(sv) <= 0.5 * view.detector.height_m;
}

std::string candidates_to_csv(const CandidateSet& set) {
    std::string out =
        "id,source_x,source_y,source_z,detector_x,detector_y,detector_z,"
        "normal_x,normal_y,normal_z,u_axis_x,u_axis_y,u_axis_z\n";
    char buf[320];
    for (const auto& v : set.views) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      v.id, v.source_pos.x, v.source_pos.y, v.source_pos.z,
                      v.detector_center.x, v.detector_center.y, v.detector_center.z,
                      v.detector_normal.x(), v.detector_normal.y(), v.detector_normal.z(),
                      v.detector_u_axis.x(), v.detector_u_axis.y(), v.detector_u_axis.z());
        out += buf;
    }
    return out;
}

}  // namespace ctopt
