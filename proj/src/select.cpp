#include "ctopt/select.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <queue>
#include <stdexcept>

#include "ctopt/errors.hpp"

namespace ctopt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Trivial achievable bound: the union of k rows cannot exceed the sum of
// the k largest row popcounts, nor the number of samples.
std::size_t trivial_upper_bound(const SelectionProblem& problem) {
    std::vector<std::size_t> pops;
    pops.reserve(problem.feasible_set.size());
    for (int id : problem.feasible_set) {
        pops.push_back(problem.matrix.rows[static_cast<std::size_t>(id)].popcount());
    }
    std::sort(pops.begin(), pops.end(), std::greater<>());
    std::size_t sum = 0;
    for (std::size_t i = 0; i < problem.k && i < pops.size(); ++i) sum += pops[i];
    return std::min(sum, problem.matrix.n_samples);
}

void check_feasible(const SelectionProblem& problem) {
    if (problem.k < 1) throw std::invalid_argument("budget k must be >= 1");
    if (problem.k > problem.feasible_set.size()) {
        throw InfeasibleProblemError(
            "budget k=" + std::to_string(problem.k) + " exceeds " +
                std::to_string(problem.feasible_set.size()) + " feasible candidates",
            problem.feasible_set.size(), problem.k);
    }
}

}  // namespace

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::early_stopped: return "early_stopped";
        case SolveStatus::heuristic: return "heuristic";
    }
    return "unknown";
}

double optimality_gap(std::size_t covered, std::size_t bound) {
    if (covered > bound) {
        throw InternalInvariantError("covered_count " + std::to_string(covered) +
                                     " exceeds bound " + std::to_string(bound));
    }
    if (bound == 0) return 0.0;
    return static_cast<double>(bound - covered) / static_cast<double>(bound);
}

SelectionProblem assemble_problem(CoverageMatrix matrix,
                                  std::vector<double> absorption, double alpha,
                                  std::size_t k) {
    matrix.validate();
    if (absorption.size() != matrix.n_candidates) {
        throw std::invalid_argument("absorption vector length must equal n_candidates");
    }
    SelectionProblem p;
    p.matrix = std::move(matrix);
    p.absorption = std::move(absorption);
    p.alpha = alpha;
    p.k = k;
    for (std::size_t i = 0; i < p.absorption.size(); ++i) {
        if (p.absorption[i] <= alpha) p.feasible_set.push_back(static_cast<int>(i));
    }
    check_feasible(p);
    return p;
}

Solution greedy_select(const SelectionProblem& problem) {
    check_feasible(problem);
    const auto t0 = Clock::now();

    Bitset covered(problem.matrix.n_samples);
    std::vector<int> selected;
    std::vector<char> taken(problem.matrix.n_candidates, 0);
    selected.reserve(problem.k);

    for (std::size_t round = 0; round < problem.k; ++round) {
        int best_id = -1;
        std::size_t best_gain = 0;
        for (int id : problem.feasible_set) {
            if (taken[static_cast<std::size_t>(id)]) continue;
            const std::size_t gain =
                problem.matrix.rows[static_cast<std::size_t>(id)].andnot_count(covered);
            if (best_id < 0 || gain > best_gain) {  // ties keep the lowest id
                best_id = id;
                best_gain = gain;
            }
        }
        taken[static_cast<std::size_t>(best_id)] = 1;
        selected.push_back(best_id);
        covered |= problem.matrix.rows[static_cast<std::size_t>(best_id)];
    }

    std::sort(selected.begin(), selected.end());
    Solution s;
    s.selected = std::move(selected);
    s.covered_count = covered.popcount();
    s.upper_bound = trivial_upper_bound(problem);
    s.gap = optimality_gap(s.covered_count, s.upper_bound);
    s.status = SolveStatus::heuristic;
    s.wall_time_s = seconds_since(t0);
    return s;
}

Solution circular_select(const CandidateSet& candidates, const CoverageMatrix& matrix,
                         std::size_t k, int circle_id) {
    const auto t0 = Clock::now();
    const CircleInfo& circle = candidates.circle(circle_id);
    const std::size_t n = circle.view_ids.size();
    if (k < 1 || k > n) {
        throw std::invalid_argument("circle " + std::to_string(circle_id) + " has " +
                                    std::to_string(n) + " views, cannot pick " +
                                    std::to_string(k));
    }

    std::vector<char> used(n, 0);
    std::vector<int> selected;
    selected.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t pos = static_cast<std::size_t>(std::llround(
            static_cast<double>(j) * static_cast<double>(n) / static_cast<double>(k)));
        pos %= n;
        while (used[pos]) pos = (pos + 1) % n;  // de-duplicate by advancing
        used[pos] = 1;
        selected.push_back(circle.view_ids[pos]);
    }
    std::sort(selected.begin(), selected.end());

    Solution s;
    s.selected = std::move(selected);
    s.covered_count = coverage_of(s.selected, matrix).covered_count;
    // The circular baseline ignores absorption, so its trivial bound is
    // taken over all rows of its matrix.
    std::vector<std::size_t> pops;
    pops.reserve(matrix.n_candidates);
    for (const auto& row : matrix.rows) pops.push_back(row.popcount());
    std::sort(pops.begin(), pops.end(), std::greater<>());
    std::size_t sum = 0;
    for (std::size_t i = 0; i < k && i < pops.size(); ++i) sum += pops[i];
    s.upper_bound = std::min(sum, matrix.n_samples);
    s.gap = optimality_gap(s.covered_count, s.upper_bound);
    s.status = SolveStatus::heuristic;
    s.wall_time_s = seconds_since(t0);
    return s;
}

namespace {

struct BnbNode {
    Bitset covered;
    std::size_t covered_count = 0;
    std::vector<int> chosen;
    Bitset available;  // bit per candidate id
    std::size_t available_count = 0;
    std::size_t bound = 0;
    std::uint64_t seq = 0;
};

struct NodeOrder {
    // Best bound first; among equal bounds the deeper node (depth-first
    // tie-breaking), then insertion order for determinism.
    bool operator()(const BnbNode& a, const BnbNode& b) const {
        if (a.bound != b.bound) return a.bound < b.bound;
        if (a.chosen.size() != b.chosen.size()) return a.chosen.size() < b.chosen.size();
        return a.seq > b.seq;
    }
};

// covered + min(uncovered, sum of the r largest residual gains).
std::size_t node_bound(const SelectionProblem& problem, const Bitset& covered,
                       std::size_t covered_count, const Bitset& available,
                       std::size_t r, std::vector<std::size_t>& gains_scratch) {
    gains_scratch.clear();
    available.for_each_set([&](std::size_t id) {
        gains_scratch.push_back(problem.matrix.rows[id].andnot_count(covered));
    });
    const std::size_t take = std::min(r, gains_scratch.size());
    std::partial_sort(gains_scratch.begin(),
                      gains_scratch.begin() + static_cast<std::ptrdiff_t>(take),
                      gains_scratch.end(), std::greater<>());
    std::size_t sum = 0;
    for (std::size_t i = 0; i < take; ++i) sum += gains_scratch[i];
    const std::size_t uncovered = problem.matrix.n_samples - covered_count;
    return covered_count + std::min(sum, uncovered);
}

}  // namespace

Solution bnb_select(const SelectionProblem& problem, const SolverLimits& limits,
                    const BnbNodeObserver& observer) {
    check_feasible(problem);
    const auto t0 = Clock::now();

    // Warm start: the greedy solution is the initial incumbent.
    Solution incumbent = greedy_select(problem);
    std::size_t inc_value = incumbent.covered_count;
    std::vector<int> inc_selected = incumbent.selected;

    std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> open;
    std::uint64_t seq = 0;
    std::vector<std::size_t> gains;

    auto make_node = [&](Bitset covered, std::vector<int> chosen, Bitset available,
                         std::size_t available_count) {
        BnbNode node;
        node.covered = std::move(covered);
        node.covered_count = node.covered.popcount();
        node.chosen = std::move(chosen);
        node.available = std::move(available);
        node.available_count = available_count;
        node.seq = seq++;
        const std::size_t r = problem.k - node.chosen.size();
        node.bound = node_bound(problem, node.covered, node.covered_count,
                                node.available, r, gains);
        if (observer) {
            std::vector<int> avail_ids;
            avail_ids.reserve(node.available_count);
            node.available.for_each_set(
                [&](std::size_t id) { avail_ids.push_back(static_cast<int>(id)); });
            observer(BnbNodeView{node.chosen, avail_ids, r, node.bound});
        }
        return node;
    };

    Bitset root_avail(problem.matrix.n_candidates);
    for (int id : problem.feasible_set) root_avail.set(static_cast<std::size_t>(id));
    open.push(make_node(Bitset(problem.matrix.n_samples), {}, std::move(root_avail),
                        problem.feasible_set.size()));

    // Stall policy: stop when a full window passes without the gap
    // improving by at least min_improvement in aggregate.
    std::size_t global_ub = std::max(open.top().bound, inc_value);
    auto window_start = Clock::now();
    double window_start_gap = optimality_gap(inc_value, global_ub);

    SolveStatus status = SolveStatus::optimal;
    std::size_t nodes_expanded = 0;

    while (!open.empty()) {
        // Bound proof: nothing open can beat the incumbent.
        if (open.top().bound <= inc_value) {
            global_ub = inc_value;
            break;
        }
        global_ub = std::max(open.top().bound, inc_value);

        if (limits.stall_window_s) {
            const auto now = Clock::now();
            if (std::chrono::duration<double>(now - window_start).count() >=
                *limits.stall_window_s) {
                const double gap_now = optimality_gap(inc_value, global_ub);
                if (window_start_gap - gap_now < limits.min_improvement) {
                    status = SolveStatus::early_stopped;
                    break;
                }
                window_start = now;
                window_start_gap = gap_now;
            }
        }
        if (limits.max_time_s && seconds_since(t0) > *limits.max_time_s) {
            status = SolveStatus::early_stopped;
            break;
        }
        if (limits.max_nodes && nodes_expanded >= *limits.max_nodes) {
            status = SolveStatus::early_stopped;
            break;
        }

        BnbNode node = std::move(const_cast<BnbNode&>(open.top()));
        open.pop();
        ++nodes_expanded;

        // Branch on the available candidate with the largest residual gain,
        // lowest id on ties.
        std::ptrdiff_t branch_id = -1;
        std::size_t branch_gain = 0;
        node.available.for_each_set([&](std::size_t id) {
            const std::size_t g = problem.matrix.rows[id].andnot_count(node.covered);
            if (branch_id < 0 || g > branch_gain) {
                branch_id = static_cast<std::ptrdiff_t>(id);
                branch_gain = g;
            }
        });
        if (branch_id < 0) continue;

        Bitset rest = node.available;
        rest.reset(static_cast<std::size_t>(branch_id));
        const std::size_t rest_count = node.available_count - 1;

        // Include branch.
        {
            Bitset covered = node.covered;
            covered |= problem.matrix.rows[static_cast<std::size_t>(branch_id)];
            std::vector<int> chosen = node.chosen;
            chosen.push_back(static_cast<int>(branch_id));
            if (chosen.size() == problem.k) {
                const std::size_t value = covered.popcount();
                if (value > inc_value) {
                    inc_value = value;
                    inc_selected = chosen;
                }
            } else if (chosen.size() + rest_count >= problem.k) {
                BnbNode child =
                    make_node(std::move(covered), std::move(chosen), rest, rest_count);
                if (child.bound > inc_value) open.push(std::move(child));
            }
        }

        // Exclude branch.
        if (node.chosen.size() + rest_count >= problem.k) {
            BnbNode child = make_node(std::move(node.covered), std::move(node.chosen),
                                      std::move(rest), rest_count);
            if (child.bound > inc_value) open.push(std::move(child));
        }
    }

    if (open.empty()) global_ub = inc_value;

    Solution s;
    std::sort(inc_selected.begin(), inc_selected.end());
    s.selected = std::move(inc_selected);
    s.covered_count = inc_value;
    if (status == SolveStatus::optimal) {
        s.upper_bound = inc_value;
        s.gap = 0.0;
    } else {
        s.upper_bound = global_ub;
        s.gap = optimality_gap(inc_value, global_ub);
    }
    s.status = status;
    s.wall_time_s = seconds_since(t0);
    return s;
}

Solution brute_force_select(const SelectionProblem& problem) {
    check_feasible(problem);
    const auto t0 = Clock::now();

    const std::size_t n = problem.feasible_set.size();
    const std::size_t k = problem.k;

    // Guard binomial(n, k) <= 1e7 without overflow; the symmetric form
    // keeps intermediate products monotone.
    const std::size_t k_eff = std::min(k, n - k);
    double combos = 1.0;
    for (std::size_t i = 0; i < k_eff; ++i) {
        combos *= static_cast<double>(n - i) / static_cast<double>(i + 1);
        if (combos > 1e7) {
            throw InstanceTooLargeError("brute force guard: C(" + std::to_string(n) +
                                        "," + std::to_string(k) + ") exceeds 1e7");
        }
    }

    std::vector<std::size_t> pos(k);
    for (std::size_t i = 0; i < k; ++i) pos[i] = i;

    std::vector<int> best;
    std::size_t best_count = 0;
    bool have_best = false;

    for (;;) {
        Bitset acc(problem.matrix.n_samples);
        for (std::size_t i = 0; i < k; ++i) {
            acc |= problem.matrix.rows[static_cast<std::size_t>(problem.feasible_set[pos[i]])];
        }
        const std::size_t count = acc.popcount();
        if (!have_best || count > best_count) {  // first maximizer is lex-smallest
            have_best = true;
            best_count = count;
            best.clear();
            for (std::size_t i = 0; i < k; ++i) best.push_back(problem.feasible_set[pos[i]]);
        }

        // Next combination in lexicographic order.
        std::size_t i = k;
        while (i > 0) {
            --i;
            if (pos[i] != i + n - k) {
                ++pos[i];
                for (std::size_t j = i + 1; j < k; ++j) pos[j] = pos[j - 1] + 1;
                break;
            }
            if (i == 0) {
                Solution s;
                s.selected = std::move(best);
                s.covered_count = best_count;
                s.upper_bound = best_count;
                s.gap = 0.0;
                s.status = SolveStatus::optimal;
                s.wall_time_s = seconds_since(t0);
                return s;
            }
        }
    }
}

}  // namespace ctopt
