#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctopt/completeness.hpp"
#include "ctopt/geometry.hpp"

namespace ctopt {

/// Budgeted maximum-coverage instance: pick k of the feasible candidate
/// rows maximizing the union of covered sphere samples. Candidates whose
/// absorption exceeds alpha are prefiltered out of feasible_set and can
/// never be selected.
struct SelectionProblem {
    CoverageMatrix matrix;
    std::vector<double> absorption;  // A_D per candidate, in [0,1]
    double alpha = 1.0;
    std::size_t k = 1;
    std::vector<int> feasible_set;   // ascending candidate ids with A_D <= alpha
};

enum class SolveStatus { optimal, early_stopped, heuristic };

std::string to_string(SolveStatus s);

struct Solution {
    std::vector<int> selected;       // sorted candidate ids, |selected| == k
    std::size_t covered_count = 0;   // C = popcount of the OR of selected rows
    std::size_t upper_bound = 0;
    double gap = 0.0;                // (upper_bound - covered) / upper_bound
    SolveStatus status = SolveStatus::heuristic;
    double wall_time_s = 0.0;
};

/// Termination policy for the branch-and-bound solver. By default the
/// solve terminates once the optimality gap has not improved by
/// min_improvement within a 20 s window. none() disables every limit
/// (pure exact solve).
struct SolverLimits {
    std::optional<double> stall_window_s = 20.0;
    double min_improvement = 1e-8;
    std::optional<double> max_time_s;
    std::optional<std::size_t> max_nodes;

    static SolverLimits none() {
        SolverLimits l;
        l.stall_window_s.reset();
        return l;
    }
};

/// Snapshot of a branch-and-bound node handed to the observer: the fixed
/// selection, the candidates still available below the node, and the
/// node's upper bound on any completion.
struct BnbNodeView {
    const std::vector<int>& chosen;
    const std::vector<int>& available;
    std::size_t budget_left;
    std::size_t bound;
};

using BnbNodeObserver = std::function<void(const BnbNodeView&)>;

/// (bound - covered) / bound, 0 when bound == 0. covered > bound is an
/// internal-invariant violation.
double optimality_gap(std::size_t covered, std::size_t bound);

/// Prefilter by absorption and validate the budget. Throws
/// InfeasibleProblemError when fewer than k candidates survive.
SelectionProblem assemble_problem(CoverageMatrix matrix,
                                  std::vector<double> absorption, double alpha,
                                  std::size_t k);

/// k rounds of best-marginal-gain selection over the feasible set, ties
/// broken by lowest candidate id. The reported upper bound is the trivial
/// min(n_samples, sum of k largest feasible row popcounts).
Solution greedy_select(const SelectionProblem& problem);

/// Equidistant baseline: k views strided along the named circle
/// (round(j*n/k)), absorption ignored. The matrix provides coverage
/// accounting for the same problem the other solvers see.
Solution circular_select(const CandidateSet& candidates, const CoverageMatrix& matrix,
                         std::size_t k, int circle_id);

/// Exact best-first branch-and-bound warm-started from greedy. Node bound:
/// covered + min(uncovered, sum of the r largest residual row gains among
/// the node's remaining candidates). Returns the exact maximizer (status
/// optimal, gap 0) unless a limit triggers, in which case the incumbent is
/// returned as early_stopped with the proven bound and gap.
Solution bnb_select(const SelectionProblem& problem,
                    const SolverLimits& limits = SolverLimits{},
                    const BnbNodeObserver& observer = nullptr);

/// Exhaustive oracle over all size-k feasible subsets; guarded to
/// binomial(|feasible|, k) <= 1e7. Lexicographically smallest maximizer.
Solution brute_force_select(const SelectionProblem& problem);

}  // namespace ctopt
