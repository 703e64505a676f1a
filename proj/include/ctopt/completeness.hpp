#pragma once

#include <cstddef>
#include <vector>

#include "ctopt/bitset.hpp"
#include "ctopt/geometry.hpp"

namespace ctopt {

/// Maximum angular gap between adjacent sampled Radon planes. sin() is
/// precomputed once; it is the only form the coverage test consumes.
class CompletenessConfig {
public:
    explicit CompletenessConfig(double delta_gamma_rad);

    double delta_gamma_rad() const { return delta_gamma_rad_; }
    double sin_delta_gamma() const { return sin_delta_gamma_; }

private:
    double delta_gamma_rad_;
    double sin_delta_gamma_;
};

/// Binary candidate-by-sample matrix: bit (v, i) set means view v's
/// direction covers sphere sample i. Columns of a multi-VOI problem are
/// the concatenation of the per-VOI samplings; voi_offsets[j] is the first
/// column of VOI j.
struct CoverageMatrix {
    std::size_t n_candidates = 0;
    std::size_t n_samples = 0;
    std::vector<Bitset> rows;
    std::vector<std::size_t> voi_offsets;

    void validate() const;
    bool operator==(const CoverageMatrix&) const = default;
};

/// One row of the matrix: bit i is 1 iff |d . u_i| < sin(delta_gamma) and
/// the view's ray to the VOI center hits the detector; a missed detector
/// zeroes the whole row.
Bitset coverage_row(const ViewCandidate& view, const Voi& voi,
                    const SphereSampling& sampling, const CompletenessConfig& cfg);

/// Stack coverage over VOIs: row v is the concatenation of
/// coverage_row(view_v, voi_j, sampling_j) over j. samplings[j] must carry
/// voi_id == vois[j].id.
CoverageMatrix build_coverage_matrix(const std::vector<ViewCandidate>& views,
                                     const std::vector<Voi>& vois,
                                     const std::vector<SphereSampling>& samplings,
                                     const CompletenessConfig& cfg);

struct CoverageResult {
    std::size_t covered_count = 0;
    double fraction = 0.0;
};

/// Union coverage of a selection: popcount of the OR of the selected rows.
CoverageResult coverage_of(const std::vector<int>& selected,
                           const CoverageMatrix& matrix);

}  // namespace ctopt
