#include "ctopt/completeness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "helpers.hpp"

using namespace ctopt;
namespace tt = ctopt::testing;

namespace {

DetectorSpec wide_detector() {
    DetectorSpec d;
    d.width_m = 0.4;
    d.height_m = 0.4;
    d.pixels_u = 8;
    d.pixels_v = 8;
    return d;
}

// Source -> origin view along +z with the detector above the origin.
ViewCandidate z_view() {
    ViewCandidate v;
    v.source_pos = {0, 0, -1};
    v.detector_center = {0, 0, 1};
    v.detector_normal = UnitVec::from_components(0, 0, -1);
    v.detector_u_axis = UnitVec::from_components(1, 0, 0);
    v.detector = wide_detector();
    return v;
}

ViewCandidate view_from_source(const Vec3& source) {
    ViewCandidate v;
    v.source_pos = source;
    v.detector_center = -source;
    v.detector_normal = UnitVec::normalized(source);
    const Vec3 ref = std::abs(v.detector_normal.z()) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    v.detector_u_axis = UnitVec::normalized(source.cross(ref));
    v.detector = wide_detector();
    return v;
}

SphereSampling sampling_of(std::vector<UnitVec> pts, int voi_id = 0) {
    SphereSampling s;
    s.voi_id = voi_id;
    s.points = std::move(pts);
    return s;
}

Voi origin_voi(int id = 0) {
    Voi v;
    v.id = id;
    v.center = {0, 0, 0};
    v.roi_radius_m = 0.005;
    return v;
}

}  // namespace

TEST_SUITE("completeness") {

TEST_CASE("config precomputes sin and validates range") {
    const CompletenessConfig cfg(0.015);
    CHECK(std::abs(cfg.sin_delta_gamma() - std::sin(0.015)) < 1e-15);
    CHECK(cfg.delta_gamma_rad() == 0.015);
    CHECK_THROWS_AS(CompletenessConfig(0.0), std::invalid_argument);
    CHECK_THROWS_AS(CompletenessConfig(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(CompletenessConfig(1.6), std::invalid_argument);
}

TEST_CASE("coverage_row orthogonal, parallel, near-threshold") {
    const CompletenessConfig cfg(0.01);
    const double p = 89.0 * std::numbers::pi / 180.0;
    const SphereSampling s = sampling_of({
        UnitVec::from_components(1, 0, 0),              // orthogonal to d
        UnitVec::from_components(0, 0, 1),              // parallel to d
        UnitVec::from_components(std::sin(p), 0, std::cos(p)),  // 89 deg from d
    });
    const Bitset row = coverage_row(z_view(), origin_voi(), s, cfg);
    CHECK(row.test(0));        // |d.u| = 0 < sin(0.01)
    CHECK_FALSE(row.test(1));  // |d.u| = 1
    CHECK_FALSE(row.test(2));  // cos(89 deg) = 0.01745 > sin(0.01) = 0.0100
}

TEST_CASE("coverage_row zeroed when the detector is missed") {
    ViewCandidate v = z_view();
    v.detector.width_m = 0.01;
    v.detector.height_m = 0.01;
    Voi off = origin_voi();
    off.center = {0.2, 0, 0};  // projects off the 1 cm detector
    const CompletenessConfig cfg(0.5);
    const SphereSampling s = sampling_of({UnitVec::from_components(1, 0, 0),
                                          UnitVec::from_components(0, 1, 0)});
    const Bitset row = coverage_row(v, off, s, cfg);
    CHECK(row.popcount() == 0);
}

TEST_CASE("coverage_row is even in d") {
    std::mt19937_64 rng(31);
    const CompletenessConfig cfg(0.3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 src = tt::random_unit_vec3(rng);
        const ViewCandidate a = view_from_source(src);
        const ViewCandidate b = view_from_source(-src);  // d -> -d through the origin
        std::vector<UnitVec> pts;
        for (int i = 0; i < 40; ++i) {
            const Vec3 u = tt::random_unit_vec3(rng);
            pts.push_back(UnitVec::normalized({u.x, u.y, std::abs(u.z)}));
        }
        const SphereSampling s = sampling_of(std::move(pts));
        CHECK(coverage_row(a, origin_voi(), s, cfg) ==
              coverage_row(b, origin_voi(), s, cfg));
    }
}

TEST_CASE("shrinking delta_gamma only clears bits") {
    std::mt19937_64 rng(37);
    const CompletenessConfig wide(0.4);
    const CompletenessConfig narrow(0.05);
    const ViewCandidate v = view_from_source(tt::random_unit_vec3(rng));
    std::vector<UnitVec> pts;
    for (int i = 0; i < 100; ++i) {
        const Vec3 u = tt::random_unit_vec3(rng);
        pts.push_back(UnitVec::normalized({u.x, u.y, std::abs(u.z)}));
    }
    const SphereSampling s = sampling_of(std::move(pts));
    const Bitset rw = coverage_row(v, origin_voi(), s, wide);
    const Bitset rn = coverage_row(v, origin_voi(), s, narrow);
    for (std::size_t i = 0; i < s.count(); ++i) {
        if (rn.test(i)) CHECK(rw.test(i));
    }
}

TEST_CASE("build_coverage_matrix 1x1") {
    const CompletenessConfig cfg(0.01);
    const SphereSampling s = sampling_of({UnitVec::from_components(1, 0, 0)});
    const CoverageMatrix m =
        build_coverage_matrix({z_view()}, {origin_voi()}, {s}, cfg);
    CHECK(m.n_candidates == 1);
    CHECK(m.n_samples == 1);
    CHECK(m.rows[0].test(0) == coverage_row(z_view(), origin_voi(), s, cfg).test(0));
}

TEST_CASE("build_coverage_matrix stacks voi samplings") {
    const CompletenessConfig cfg(0.02);
    Voi a = origin_voi(0);
    Voi b = origin_voi(1);
    b.center = {0.01, 0, 0};
    const SphereSampling sa = fibonacci_half_sphere(10, 0);
    const SphereSampling sb = fibonacci_half_sphere(20, 1);
    const CoverageMatrix m = build_coverage_matrix({z_view(), view_from_source({0, -1, 0})},
                                                   {a, b}, {sa, sb}, cfg);
    CHECK(m.n_samples == 30);
    CHECK(m.voi_offsets == std::vector<std::size_t>{0, 10});
    CHECK(m.n_candidates == 2);
}

TEST_CASE("build_coverage_matrix rejects mismatched voi pairing") {
    const CompletenessConfig cfg(0.02);
    const SphereSampling wrong = fibonacci_half_sphere(10, 5);
    CHECK_THROWS_AS(build_coverage_matrix({z_view()}, {origin_voi(0)}, {wrong}, cfg),
                    std::invalid_argument);
}

TEST_CASE("build_coverage_matrix matches naive double loop") {
    std::mt19937_64 rng(41);
    const CompletenessConfig cfg(0.12);
    std::vector<ViewCandidate> views;
    for (int i = 0; i < 8; ++i) {
        ViewCandidate v = view_from_source(tt::random_unit_vec3(rng) * 1.2);
        v.id = i;
        views.push_back(v);
    }
    Voi voi = origin_voi();
    voi.center = {0.03, -0.02, 0.01};
    const SphereSampling s = fibonacci_half_sphere(50, 0);
    const CoverageMatrix m = build_coverage_matrix(views, {voi}, {s}, cfg);
    for (std::size_t vi = 0; vi < views.size(); ++vi) {
        for (std::size_t si = 0; si < s.count(); ++si) {
            CHECK(m.rows[vi].test(si) ==
                  tt::naive_covers(views[vi], voi, s.points[si], 0.12));
        }
    }
}

TEST_CASE("coverage_of basics") {
    const CoverageMatrix m = tt::matrix_from_strings({"1100", "0110"});
    CHECK(coverage_of({}, m).covered_count == 0);
    CHECK(coverage_of({}, m).fraction == 0.0);

    const auto r = coverage_of({0, 1}, m);
    CHECK(r.covered_count == 3);
    CHECK(r.fraction == doctest::Approx(0.75));

    const CoverageMatrix ones = tt::matrix_from_strings({"111", "111"});
    CHECK(coverage_of({0, 1}, ones).fraction == 1.0);

    CHECK_THROWS_AS(coverage_of({5}, m), std::invalid_argument);
    CHECK_THROWS_AS(coverage_of({-1}, m), std::invalid_argument);
}

TEST_CASE("coverage is monotone and submodular") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = tt::make_random_instance(rng, 12, 24, 4);
        const auto& m = inst.matrix;
        const int n = static_cast<int>(m.n_candidates);

        // Random A subset of B, v outside B.
        std::vector<int> a_set, b_set;
        for (int i = 0; i < n; ++i) {
            const double r = tt::uniform01(rng);
            if (r < 0.25) {
                a_set.push_back(i);
                b_set.push_back(i);
            } else if (r < 0.5) {
                b_set.push_back(i);
            }
        }
        int v = -1;
        for (int i = 0; i < n; ++i) {
            if (std::find(b_set.begin(), b_set.end(), i) == b_set.end()) {
                v = i;
                break;
            }
        }
        if (v < 0) continue;

        const std::size_t cov_a = coverage_of(a_set, m).covered_count;
        const std::size_t cov_b = coverage_of(b_set, m).covered_count;

        std::vector<int> av = a_set;
        av.push_back(v);
        std::vector<int> bv = b_set;
        bv.push_back(v);
        const std::size_t cov_av = coverage_of(av, m).covered_count;
        const std::size_t cov_bv = coverage_of(bv, m).covered_count;

        CHECK(cov_av >= cov_a);  // monotone
        CHECK(cov_bv >= cov_b);
        // Submodular: marginal gain shrinks on the larger base.
        CHECK(cov_av - cov_a >= cov_bv - cov_b);
    }
}

TEST_CASE("matrix validate rejects inconsistent shapes") {
    CoverageMatrix m = tt::matrix_from_strings({"1100", "0110"});
    m.n_samples = 5;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    CoverageMatrix m2 = tt::matrix_from_strings({"1100"});
    m2.voi_offsets = {1};
    CHECK_THROWS_AS(m2.validate(), std::invalid_argument);
}

}  // TEST_SUITE
