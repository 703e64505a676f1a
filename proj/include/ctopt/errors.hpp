#pragma once

#include <stdexcept>
#include <string>

namespace ctopt {

// Source and voxel (or other geometric anchors) coincide, or a frame is
// otherwise unusable.
class DegenerateGeometryError : public std::runtime_error {
public:
    explicit DegenerateGeometryError(const std::string& what)
        : std::runtime_error(what) {}
};

// A VOI does not project onto the detector for a given view.
class RoiNotVisibleError : public std::runtime_error {
public:
    explicit RoiNotVisibleError(const std::string& what)
        : std::runtime_error(what) {}
};

// Selection problem has fewer feasible candidates than the budget k.
class InfeasibleProblemError : public std::runtime_error {
public:
    InfeasibleProblemError(const std::string& what, std::size_t feasible,
                           std::size_t budget)
        : std::runtime_error(what), feasible_count(feasible), k(budget) {}

    std::size_t feasible_count;
    std::size_t k;
};

// Exhaustive enumeration guard tripped.
class InstanceTooLargeError : public std::runtime_error {
public:
    explicit InstanceTooLargeError(const std::string& what)
        : std::runtime_error(what) {}
};

// A computed quantity violated an internal invariant (a bug, not bad input).
class InternalInvariantError : public std::logic_error {
public:
    explicit InternalInvariantError(const std::string& what)
        : std::logic_error(what) {}
};

}  // namespace ctopt
