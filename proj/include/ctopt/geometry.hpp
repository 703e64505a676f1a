#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctopt/vec3.hpp"

namespace ctopt {

/// Discretized upper half of the unit sphere (z >= 0) for one VOI. Each
/// point is a Radon-plane normal candidate; coverage of these points is
/// what the selection problem maximizes.
struct SphereSampling {
    int voi_id = 0;
    std::vector<UnitVec> points;

    std::size_t count() const { return points.size(); }
};

/// Flat-panel detector: physical size plus pixel grid. Pixel pitch is
/// derived, not stored.
struct DetectorSpec {
    double width_m = 0.0;
    double height_m = 0.0;
    int pixels_u = 0;
    int pixels_v = 0;

    double pixel_width_m() const { return width_m / pixels_u; }
    double pixel_height_m() const { return height_m / pixels_v; }

    void validate() const;
};

/// One realizable source/detector pose. The detector frame is orthonormal:
/// v-axis = normal x u-axis (right-handed).
struct ViewCandidate {
    int id = 0;
    Vec3 source_pos;        // meters
    Vec3 detector_center;   // meters
    UnitVec detector_normal = UnitVec::from_components(1, 0, 0);
    UnitVec detector_u_axis = UnitVec::from_components(0, 1, 0);
    DetectorSpec detector;

    UnitVec detector_v_axis() const {
        return UnitVec::normalized(detector_normal.vec().cross(detector_u_axis.vec()));
    }

    void validate() const;
};

/// Voxel of interest: completeness is evaluated on a sphere sampling
/// around `center`; `roi_radius_m` defines both the reconstruction ROI
/// and the projected ROI used for the absorption metric.
struct Voi {
    int id = 0;
    Vec3 center;
    double roi_radius_m = 0.0;

    void validate() const;
};

/// A named circle within a candidate set: ordered list of candidate ids
/// along the circle. Produced by the generators, consumed by the circular
/// baseline selector.
struct CircleInfo {
    int circle_id = 0;
    double tilt_deg = 0.0;
    std::vector<int> view_ids;  // in angular order along the circle
};

/// Candidate views plus whatever circle structure the generator defined.
struct CandidateSet {
    std::vector<ViewCandidate> views;
    std::vector<CircleInfo> circles;

    /// Circle whose tilt is closest to zero; invalid-argument if none.
    const CircleInfo& untilted_circle() const;
    const CircleInfo& circle(int circle_id) const;
};

/// n points on the half sphere z >= 0 from a full-sphere Fibonacci
/// lattice of 2n nominal points; if the kept count ever differed from n
/// the nominal count is adjusted and the lattice regenerated until
/// exactly n survive. Deterministic.
SphereSampling fibonacci_half_sphere(int n, int voi_id);

/// Full-sphere Fibonacci lattice of exactly n points.
std::vector<UnitVec> fibonacci_full_sphere(int n);

/// Circle-of-circles trajectory: n_tilts circles rotated about the world
/// x-axis, tilt angles evenly spaced over tilt_range_deg (inclusive of
/// both ends), n_per_circle source positions per circle spread over
/// arc_deg. Sources orbit at sod_m about the origin; the detector center
/// sits diametrically opposite at distance sdd_m - sod_m with its normal
/// toward the source.
CandidateSet tilted_circle_candidates(int n_tilts, double tilt_min_deg,
                                      double tilt_max_deg, int n_per_circle,
                                      double arc_deg, double sdd_m, double sod_m,
                                      const DetectorSpec& detector);

/// n candidate poses with sources on a full-sphere Fibonacci lattice at
/// radius sod_m; detector opposite each source, normal toward it.
CandidateSet full_sphere_candidates(int n, double sod_m, double sdd_m,
                                    const DetectorSpec& detector);

/// Single equatorial (or tilted) circle, exposed as circle 0 of the set.
/// The desk-scale stand-in for a conventional circular trajectory.
CandidateSet circle_candidates(int n_views, double tilt_deg, double arc_deg,
                               double sdd_m, double sod_m,
                               const DetectorSpec& detector);

/// Normalized viewing direction: source -> VOI center.
UnitVec view_direction(const ViewCandidate& view, const Voi& voi);

/// True iff the ray from the source through `point` meets the detector
/// plane at t > 0 inside the closed detector rectangle. A ray parallel to
/// the plane misses (false), it is not an error.
bool detector_hit(const ViewCandidate& view, const Vec3& point);

/// CSV export: one row per candidate, 9 significant digits.
/// Columns: id, source xyz, detector-center xyz, normal xyz, u-axis xyz.
std::string candidates_to_csv(const CandidateSet& set);

}  // namespace ctopt
