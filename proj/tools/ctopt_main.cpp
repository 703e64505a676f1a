// Command-line front end: config-driven pipeline runner with standalone
// per-stage subcommands. Exit codes: 0 success, 2 config error,
// 3 infeasible problem, 4 stage failure.

#include <fstream>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ctopt/errors.hpp"
#include "ctopt/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string solver;  // overrides config.solver when set
    int threads = 1;
    bool verbose = false;
    bool for_compare = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_solver) {
    cmd->add_option("--config", opts.config_path, "pipeline config JSON")->required();
    cmd->add_option("--out", opts.out_dir, "output directory")->required();
    if (with_solver) {
        cmd->add_option("--solver", opts.solver, "circular|greedy|ip|oracle")
            ->check(CLI::IsMember({"circular", "greedy", "ip", "oracle"}));
    }
    cmd->add_option("--threads", opts.threads, "worker threads for projection")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--verbose", opts.verbose, "log stage progress to stderr");
}

int run_stages(const CommonOpts& opts,
               const std::function<void(ctopt::PipelineRunner&, const ctopt::PipelineConfig&)>& body) {
    ctopt::PipelineConfig config;
    try {
        config = ctopt::PipelineConfig::from_file(opts.config_path);
        if (!opts.solver.empty()) config.solver = opts.solver;
        config.validate();
        if (opts.for_compare) config.validate_compare();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        ctopt::PipelineRunner runner(config, opts.out_dir, opts.threads, opts.verbose);
        body(runner, config);
        return 0;
    } catch (const ctopt::InfeasibleProblemError& e) {
        std::cerr << "infeasible problem: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "stage failure: " << e.what() << "\n";
        return 4;
    }
}

void print_solution_summary(const ctopt::PipelineRunner& runner,
                            const std::string& solver) {
    const auto path = runner.out_dir() / ("solution_" + solver + ".json");
    std::ifstream in(path);
    if (!in) return;
    const ctopt::json sol = ctopt::json::parse(in);
    std::cout << solver << ": covered " << sol.at("covered_count").get<std::size_t>()
              << "/" << sol.at("n_samples").get<std::size_t>() << " ("
              << 100.0 * sol.at("fraction").get<double>() << "%), gap "
              << 100.0 * sol.at("gap").get<double>() << "%, status "
              << sol.at("status").get<std::string>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CT view selection by discrete Radon-sphere coverage"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto* cmd_phantom = app.add_subcommand("phantom", "rasterize the phantom");
    auto* cmd_candidates = app.add_subcommand("candidates", "generate candidate views");
    auto* cmd_project = app.add_subcommand("project", "simulate projections");
    auto* cmd_coverage = app.add_subcommand("coverage", "coverage matrix and absorption");
    auto* cmd_select = app.add_subcommand("select", "solve the view selection problem");
    auto* cmd_recon = app.add_subcommand("recon", "reconstruct from the selection");
    auto* cmd_evaluate = app.add_subcommand("evaluate", "ROI quality metrics");
    auto* cmd_run = app.add_subcommand("run", "full pipeline for the configured solver");
    auto* cmd_compare = app.add_subcommand("compare", "run all solvers in compare list");

    add_common(cmd_phantom, opts, false);
    add_common(cmd_candidates, opts, false);
    add_common(cmd_project, opts, false);
    add_common(cmd_coverage, opts, false);
    add_common(cmd_select, opts, true);
    add_common(cmd_recon, opts, true);
    add_common(cmd_evaluate, opts, true);
    add_common(cmd_run, opts, true);
    add_common(cmd_compare, opts, false);

    CLI11_PARSE(app, argc, argv);

    if (cmd_phantom->parsed()) {
        return run_stages(opts, [](auto& r, const auto&) { r.stage_phantom(); });
    }
    if (cmd_candidates->parsed()) {
        return run_stages(opts, [](auto& r, const auto&) { r.stage_candidates(); });
    }
    if (cmd_project->parsed()) {
        return run_stages(opts, [](auto& r, const auto&) { r.stage_project(); });
    }
    if (cmd_coverage->parsed()) {
        return run_stages(opts, [](auto& r, const auto&) { r.stage_coverage(); });
    }
    if (cmd_select->parsed()) {
        return run_stages(opts, [](auto& r, const auto& cfg) {
            r.stage_select(cfg.solver);
            print_solution_summary(r, cfg.solver);
        });
    }
    if (cmd_recon->parsed()) {
        return run_stages(opts, [](auto& r, const auto& cfg) { r.stage_recon(cfg.solver); });
    }
    if (cmd_evaluate->parsed()) {
        return run_stages(opts,
                          [](auto& r, const auto& cfg) { r.stage_evaluate({cfg.solver}); });
    }
    if (cmd_run->parsed()) {
        return run_stages(opts, [](auto& r, const auto& cfg) {
            r.run();
            print_solution_summary(r, cfg.solver);
        });
    }
    if (cmd_compare->parsed()) {
        opts.for_compare = true;
        return run_stages(opts, [](auto& r, const auto& cfg) {
            r.compare();
            for (const auto& s : cfg.compare) print_solution_summary(r, s);
        });
    }
    return 0;
}
