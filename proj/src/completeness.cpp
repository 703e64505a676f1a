#include "ctopt/completeness.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ctopt {

CompletenessConfig::CompletenessConfig(double delta_gamma_rad)
    : delta_gamma_rad_(delta_gamma_rad), sin_delta_gamma_(std::sin(delta_gamma_rad)) {
    if (!(delta_gamma_rad > 0.0) || !(delta_gamma_rad < std::numbers::pi / 2.0)) {
        throw std::invalid_argument("delta_gamma_rad must lie in (0, pi/2)");
    }
}

void CoverageMatrix::validate() const {
    if (rows.size() != n_candidates) {
        throw std::invalid_argument("row count does not match n_candidates");
    }
    for (const auto& r : rows) {
        if (r.size() != n_samples) {
            throw std::invalid_argument("row length does not match n_samples");
        }
    }
    if (voi_offsets.empty() || voi_offsets.front() != 0) {
        throw std::invalid_argument("voi_offsets must start at 0");
    }
    for (std::size_t j = 1; j < voi_offsets.size(); ++j) {
        if (voi_offsets[j] <= voi_offsets[j - 1]) {
            throw std::invalid_argument("voi_offsets must be strictly increasing");
        }
    }
    if (voi_offsets.back() > n_samples) {
        throw std::invalid_argument("voi_offsets exceed n_samples");
    }
}

Bitset coverage_row(const ViewCandidate& view, const Voi& voi,
                    const SphereSampling& sampling, const CompletenessConfig& cfg) {
    if (sampling.points.empty()) {
        throw std::invalid_argument("sphere sampling is empty");
    }
    Bitset row(sampling.count());
    if (!detector_hit(view, voi.center)) return row;  // all zeros

    const UnitVec d = view_direction(view, voi);
    const double sin_dg = cfg.sin_delta_gamma();
    for (std::size_t i = 0; i < sampling.points.size(); ++i) {
        if (std::abs(d.dot(sampling.points[i])) < sin_dg) row.set(i);
    }
    return row;
}

CoverageMatrix build_coverage_matrix(const std::vector<ViewCandidate>& views,
                                     const std::vector<Voi>& vois,
                                     const std::vector<SphereSampling>& samplings,
                                     const CompletenessConfig& cfg) {
    if (vois.empty() || samplings.size() != vois.size()) {
        throw std::invalid_argument("need one sampling per voi");
    }
    for (std::size_t j = 0; j < vois.size(); ++j) {
        if (samplings[j].voi_id != vois[j].id) {
            throw std::invalid_argument("sampling voi_id " +
                                        std::to_string(samplings[j].voi_id) +
                                        " does not match voi id " +
                                        std::to_string(vois[j].id));
        }
    }

    CoverageMatrix m;
    m.n_candidates = views.size();
    m.voi_offsets.reserve(vois.size());
    std::size_t total = 0;
    for (const auto& s : samplings) {
        m.voi_offsets.push_back(total);
        total += s.count();
    }
    m.n_samples = total;

    m.rows.reserve(views.size());
    for (const auto& view : views) {
        Bitset row(total);
        for (std::size_t j = 0; j < vois.size(); ++j) {
            const Bitset part = coverage_row(view, vois[j], samplings[j], cfg);
            const std::size_t off = m.voi_offsets[j];
            for (std::size_t i = 0; i < part.size(); ++i) {
                if (part.test(i)) row.set(off + i);
            }
        }
        m.rows.push_back(std::move(row));
    }
    m.validate();
    return m;
}

CoverageResult coverage_of(const std::vector<int>& selected,
                           const CoverageMatrix& matrix) {
    Bitset acc(matrix.n_samples);
    for (int idx : selected) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= matrix.n_candidates) {
            throw std::invalid_argument("selected index " + std::to_string(idx) +
                                        " out of range");
        }
        acc |= matrix.rows[static_cast<std::size_t>(idx)];
    }
    CoverageResult r;
    r.covered_count = acc.popcount();
    r.fraction = matrix.n_samples == 0
                     ? 0.0
                     : static_cast<double>(r.covered_count) /
                           static_cast<double>(matrix.n_samples);
    return r;
}

}  // namespace ctopt
