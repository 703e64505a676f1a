#pragma once

// Shared test utilities: deterministic random instances, bit-string
// matrices, independent oracles. Everything here is test-side and stays
// independent of the library code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ctopt/completeness.hpp"
#include "ctopt/geometry.hpp"
#include "ctopt/select.hpp"

namespace ctopt::testing {

// Platform-stable uniform helpers (avoid distribution implementation
// differences).
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

inline CoverageMatrix matrix_from_strings(const std::vector<std::string>& rows) {
    CoverageMatrix m;
    m.n_candidates = rows.size();
    m.n_samples = rows.empty() ? 0 : rows.front().size();
    m.voi_offsets = {0};
    for (const auto& s : rows) {
        Bitset row(m.n_samples);
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '1') row.set(i);
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

struct RandomInstance {
    CoverageMatrix matrix;
    std::vector<double> absorption;
    double alpha = 1.0;
    std::size_t k = 1;
};

// Random selection instance with at least k feasible candidates by
// construction: alpha is placed just above the m-th smallest absorption
// for a random m >= k.
inline RandomInstance make_random_instance(std::mt19937_64& rng, int max_candidates = 30,
                                           int max_samples = 60, int max_k = 5) {
    RandomInstance inst;
    const int n_cand = uniform_int(rng, 1, max_candidates);
    const int n_samp = uniform_int(rng, 1, max_samples);
    const int k = uniform_int(rng, 1, std::min(max_k, n_cand));
    const double density = 0.05 + 0.45 * uniform01(rng);

    inst.matrix.n_candidates = static_cast<std::size_t>(n_cand);
    inst.matrix.n_samples = static_cast<std::size_t>(n_samp);
    inst.matrix.voi_offsets = {0};
    for (int i = 0; i < n_cand; ++i) {
        Bitset row(static_cast<std::size_t>(n_samp));
        for (int j = 0; j < n_samp; ++j) {
            if (uniform01(rng) < density) row.set(static_cast<std::size_t>(j));
        }
        inst.matrix.rows.push_back(std::move(row));
    }

    inst.absorption.resize(static_cast<std::size_t>(n_cand));
    for (auto& a : inst.absorption) a = uniform01(rng);
    std::vector<double> sorted = inst.absorption;
    std::sort(sorted.begin(), sorted.end());
    const int m = uniform_int(rng, k, n_cand);
    inst.alpha = sorted[static_cast<std::size_t>(m - 1)];
    inst.k = static_cast<std::size_t>(k);
    return inst;
}

// Independent evaluation of the coverage condition for one (view, voi,
// sample): recomputes the direction and the dot product from scratch.
inline bool naive_covers(const ViewCandidate& view, const Voi& voi, const UnitVec& u,
                         double delta_gamma_rad) {
    if (!detector_hit(view, voi.center)) return false;
    const Vec3 diff = voi.center - view.source_pos;
    const double n = diff.norm();
    const double dot = (diff.x * u.x() + diff.y * u.y() + diff.z * u.z()) / n;
    return std::abs(dot) < std::sin(delta_gamma_rad);
}

// Chord length of a segment p0->p1 through an axis-aligned box, by the
// slab method. Independent oracle for the voxel traversal.
inline double slab_chord_length(const Vec3& p0, const Vec3& p1, const Vec3& lo,
                                const Vec3& hi) {
    const Vec3 d = p1 - p0;
    double t0 = 0.0;
    double t1 = 1.0;
    const double dir[3] = {d.x, d.y, d.z};
    const double o[3] = {p0.x, p0.y, p0.z};
    const double lo_[3] = {lo.x, lo.y, lo.z};
    const double hi_[3] = {hi.x, hi.y, hi.z};
    for (int a = 0; a < 3; ++a) {
        if (dir[a] == 0.0) {
            if (o[a] < lo_[a] || o[a] > hi_[a]) return 0.0;
            continue;
        }
        double ta = (lo_[a] - o[a]) / dir[a];
        double tb = (hi_[a] - o[a]) / dir[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t0 >= t1) return 0.0;
    return (t1 - t0) * d.norm();
}

// Exhaustive best completion value of a branch-and-bound node: chosen
// plus the best (budget)-subset of the available candidates. Test-side
// oracle for bound soundness.
inline std::size_t best_completion(const CoverageMatrix& m,
                                   const std::vector<int>& chosen,
                                   const std::vector<int>& available,
                                   std::size_t budget) {
    const std::size_t n = available.size();
    if (budget > n) return coverage_of(chosen, m).covered_count;

    std::size_t best = 0;
    std::vector<std::size_t> pos(budget);
    for (std::size_t i = 0; i < budget; ++i) pos[i] = i;
    for (;;) {
        std::vector<int> sel = chosen;
        for (std::size_t i = 0; i < budget; ++i) sel.push_back(available[pos[i]]);
        best = std::max(best, coverage_of(sel, m).covered_count);
        if (budget == 0) break;
        std::size_t i = budget;
        bool advanced = false;
        while (i > 0) {
            --i;
            if (pos[i] != i + n - budget) {
                ++pos[i];
                for (std::size_t j = i + 1; j < budget; ++j) pos[j] = pos[j - 1] + 1;
                advanced = true;
                break;
            }
        }
        if (!advanced) break;
    }
    return best;
}

inline Vec3 random_unit_vec3(std::mt19937_64& rng) {
    for (;;) {
        const Vec3 v{2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0,
                     2.0 * uniform01(rng) - 1.0};
        const double n = v.norm();
        if (n > 1e-3 && n <= 1.0) return v / n;
    }
}

// Rotation matrix from a random axis and angle.
struct Rotation {
    double m[3][3];

    Vec3 apply(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }
    UnitVec apply(const UnitVec& v) const { return UnitVec::normalized(apply(v.vec())); }
};

inline Rotation random_rotation(std::mt19937_64& rng) {
    const Vec3 axis = random_unit_vec3(rng);
    const double angle = 2.0 * 3.14159265358979323846 * uniform01(rng);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double t = 1.0 - c;
    Rotation r;
    r.m[0][0] = t * axis.x * axis.x + c;
    r.m[0][1] = t * axis.x * axis.y - s * axis.z;
    r.m[0][2] = t * axis.x * axis.z + s * axis.y;
    r.m[1][0] = t * axis.x * axis.y + s * axis.z;
    r.m[1][1] = t * axis.y * axis.y + c;
    r.m[1][2] = t * axis.y * axis.z - s * axis.x;
    r.m[2][0] = t * axis.x * axis.z - s * axis.y;
    r.m[2][1] = t * axis.y * axis.z + s * axis.x;
    r.m[2][2] = t * axis.z * axis.z + c;
    return r;
}

inline ViewCandidate rotated_view(const ViewCandidate& view, const Rotation& r) {
    ViewCandidate out = view;
    out.source_pos = r.apply(view.source_pos);
    out.detector_center = r.apply(view.detector_center);
    out.detector_normal = r.apply(view.detector_normal);
    out.detector_u_axis = r.apply(view.detector_u_axis);
    return out;
}

}  // namespace ctopt::testing
