#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctopt/completeness.hpp"
#include "ctopt/phantom.hpp"
#include "ctopt/recon.hpp"
#include "ctopt/select.hpp"

namespace ctopt {

using json = nlohmann::ordered_json;

/// FNV-1a 64-bit over a byte stream; the artifact/problem digest used for
/// cache keys and report provenance. Not cryptographic.
class Digest {
public:
    void update(const void* data, std::size_t n);
    void update(const std::string& s) { update(s.data(), s.size()); }
    void update_u64(std::uint64_t v);
    void update_f64(double v);
    std::uint64_t value() const { return state_; }
    std::string hex() const;

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

std::string file_digest_hex(const std::filesystem::path& path);

std::string problem_digest_hex(const SelectionProblem& problem);

/// Write-temp-then-rename so readers never observe partial files.
void atomic_write(const std::filesystem::path& path, const std::string& content);
void atomic_write(const std::filesystem::path& path, const void* data, std::size_t n);

// Volumes and phantoms: raw little-endian float32 payload plus a JSON
// sidecar (<name>.json next to <name>.raw) carrying dims, voxel_size_m,
// origin_m.
void save_volume(const std::filesystem::path& raw_path, const GridSpec& grid,
                 const std::vector<double>& values);
Volume load_volume(const std::filesystem::path& raw_path);
void save_phantom(const std::filesystem::path& raw_path, const Phantom& phantom);
Phantom load_phantom(const std::filesystem::path& raw_path);

// Projection stacks: one raw float32 file, views in ascending position,
// sidecar with pixels_u/pixels_v/view_ids.
void save_projections(const std::filesystem::path& raw_path,
                      const std::vector<ProjectionImage>& projections);
std::vector<ProjectionImage> load_projections(const std::filesystem::path& raw_path);

// Coverage matrix: compact binary format. Header: magic "CVMX", version
// u32, n_candidates u64, n_samples u64, n_vois u64, voi_offsets u64 each;
// then per candidate ceil(n_samples/64) little-endian u64 words.
void save_coverage_matrix(const std::filesystem::path& path, const CoverageMatrix& m);
CoverageMatrix load_coverage_matrix(const std::filesystem::path& path);

/// Human-readable form for small instances: one 0/1 row per candidate.
std::string coverage_matrix_to_csv(const CoverageMatrix& m);

json solution_to_json(const Solution& solution, const std::string& solver_name,
                      const SelectionProblem& problem, const SolverLimits& limits);

/// Candidate set with circle structure, JSON (the CSV export in
/// candidates_to_csv carries the poses only).
json candidate_set_to_json(const CandidateSet& set);
CandidateSet candidate_set_from_json(const json& j);

}  // namespace ctopt
