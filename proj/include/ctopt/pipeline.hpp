#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctopt/io.hpp"

namespace ctopt {

struct PhantomConfig {
    GridSpec grid;
    std::vector<ShapeSpec> shapes;
};

struct CircleBaselineConfig {
    int n_views = 0;
    double tilt_deg = 0.0;
};

struct CandidatesConfig {
    enum class Kind { tilted_circles, full_sphere };
    Kind kind = Kind::full_sphere;
    // tilted_circles
    int n_tilts = 1;
    double tilt_min_deg = 0.0;
    double tilt_max_deg = 0.0;
    int n_per_circle = 1;
    double arc_deg = 360.0;
    // full_sphere
    int n = 1;
    // shared
    double sod_m = 0.0;
    double sdd_m = 0.0;
    DetectorSpec detector;
    /// Stand-alone circular trajectory evaluated against the same problem;
    /// required for the circular baseline when kind == full_sphere.
    std::optional<CircleBaselineConfig> circle;
};

struct VoiConfig {
    Voi voi;
    int n_sphere_samples = 1;
};

struct ReconConfig {
    GridSpec grid;
    int n_iters = 10;
    double relaxation = 0.3;
};

/// Full experiment description. Parsing is strict: unknown keys are
/// rejected and cross-field consistency is validated before any compute.
struct PipelineConfig {
    PhantomConfig phantom;
    CandidatesConfig candidates;
    std::vector<VoiConfig> vois;
    double delta_gamma_rad = 0.01;
    double alpha = 1.0;
    std::size_t k = 1;
    std::string solver = "ip";          // circular | greedy | ip | oracle
    SolverLimits limits;
    std::vector<std::string> compare;   // solver list for compare runs
    ReconConfig recon;
    std::uint64_t seed = 0;             // reserved; default path is deterministic

    static PipelineConfig from_json(const json& j);
    static PipelineConfig from_file(const std::filesystem::path& path);
    json to_json() const;

    void validate() const;
    /// Additional requirements for compare runs (every solver in the
    /// compare list must be runnable).
    void validate_compare() const;

private:
    void check_circular_baseline() const;
};

/// Stage-by-stage runner over an output directory. Every stage can run
/// standalone on the previous stages' artifacts; outputs are cached by
/// content digest so reruns with unchanged upstream config skip compute.
class PipelineRunner {
public:
    PipelineRunner(PipelineConfig config, std::filesystem::path out_dir,
                   int threads = 1, bool verbose = false);

    void stage_phantom();
    void stage_candidates();
    void stage_project();
    void stage_coverage();
    void stage_select(const std::string& solver);
    void stage_recon(const std::string& solver);
    void stage_evaluate(const std::vector<std::string>& solvers);

    /// All stages for config.solver. Returns the manifest.
    json run();

    /// All stages for every solver in config.compare (default circular,
    /// greedy, ip); writes compare.csv. Returns the manifest.
    json compare();

    const std::filesystem::path& out_dir() const { return out_dir_; }

private:
    struct StageOutcome {
        std::string key;
        bool cache_hit = false;
        double wall_time_s = 0.0;
        std::vector<std::string> artifacts;  // paths relative to out_dir
    };

    std::string run_stage(const std::string& name, const std::string& key,
                          const std::vector<std::string>& artifacts,
                          const std::function<void()>& compute);
    bool cache_valid(const std::string& name, const std::string& key,
                     const std::vector<std::string>& artifacts) const;
    void record_stage(const std::string& name, const StageOutcome& outcome);
    void record_failure(const std::string& name, const std::string& error);
    void write_manifest() const;

    std::string phantom_key() const;
    std::string candidates_key() const;
    std::string project_key() const;
    std::string coverage_key() const;
    std::string select_key(const std::string& solver) const;
    std::string recon_key(const std::string& solver) const;
    std::string evaluate_key(const std::vector<std::string>& solvers) const;

    PipelineConfig config_;
    std::filesystem::path out_dir_;
    int threads_;
    bool verbose_;
    json manifest_;
    json cache_;
};

/// Recursively drop every "timing" key: what remains must be bit-stable
/// across reruns of the same config.
json strip_timing(const json& j);

}  // namespace ctopt
