// qdd: command-line front end.
//
//   qdd run --config PATH --out DIR
//   qdd sweep --config PATH --grid KEY=V1,V2,... [--grid ...] --seeds N --out DIR
//   qdd compare --runs DIR_A DIR_B [--metric qd_score] [--out FILE]
//   qdd diagnose-correlation --config PATH --samples N --out FILE [--weights fitness|random]
//   qdd brute-force --config PATH --out DIR
//
// Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qdd/benchmarks.hpp"
#include "qdd/config.hpp"
#include "qdd/error.hpp"
#include "qdd/output.hpp"
#include "qdd/rng.hpp"
#include "qdd/scheduler.hpp"

namespace fs = std::filesystem;
using namespace qdd;

namespace {

std::ofstream open_file(const fs::path& p) {
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + p.string() + "'");
    return out;
}

void log_row(const MetricsRow& r) {
    std::fprintf(stderr, "iter %zu  evals %llu  qd %s  coverage %s  max %s", r.iteration,
                 static_cast<unsigned long long>(r.evaluations), format_real(r.qd_score).c_str(),
                 format_real(r.coverage).c_str(), format_real(r.max_fitness).c_str());
    if (r.temperature)
        std::fprintf(stderr, "  T %s  H %s", format_real(*r.temperature).c_str(),
                     format_real(*r.mean_entropy).c_str());
    std::fputc('\n', stderr);
}

ProgressFn progress_for(const RunConfig& cfg) {
    const std::size_t every = cfg.output.log_interval;
    if (every == 0)
        return {};
    return [every](const MetricsRow& r) {
        if (r.iteration % every == 0)
            log_row(r);
    };
}

GridAxis parse_grid(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
        throw ConfigError("--grid '" + spec + "': expected KEY=V1,V2,...");
    GridAxis axis;
    axis.key = spec.substr(0, eq);
    std::stringstream rest(spec.substr(eq + 1));
    for (std::string v; std::getline(rest, v, ',');) {
        if (v.empty())
            throw ConfigError("--grid '" + spec + "': empty value");
        axis.values.push_back(v);
    }
    return axis;
}

int cmd_run(const std::string& config, const fs::path& out) {
    const ResolvedConfig rc = parse_config(config);
    const auto problem = make_problem(rc.run.problem);
    const RunResult r = run(*problem, rc.run, progress_for(rc.run));
    emit_outputs(r.repertoire, r.metrics, rc, out);
    std::printf("qd_score %s  coverage %s  evaluations %llu\n", format_real(r.repertoire.qd_score()).c_str(),
                format_real(r.repertoire.coverage()).c_str(),
                static_cast<unsigned long long>(r.metrics.rows.empty() ? r.metrics.initial_evaluations
                                                                       : r.metrics.rows.back().evaluations));
    return 0;
}

int cmd_sweep(const std::string& config, const std::vector<std::string>& grid_specs, std::size_t seeds,
              const fs::path& out) {
    const ResolvedConfig rc = parse_config(config);
    std::vector<GridAxis> grid;
    for (const auto& g : grid_specs)
        grid.push_back(parse_grid(g));
    // Reject bad keys and values before any run starts.
    {
        RunConfig probe = rc.run;
        for (const auto& axis : grid)
            for (const auto& v : axis.values) {
                set_config_value(probe, axis.key, v);
                probe.validate();
            }
    }
    const auto rows = sweep(rc.run, grid, seeds, [&](const SweepRow& row, const RunResult& r) {
        char name[32];
        std::snprintf(name, sizeof name, "run_%04zu", row.run_index);
        ResolvedConfig echo = rc;
        echo.run = row.config;
        echo.root_seed = row.run_seed;
        emit_outputs(r.repertoire, r.metrics, echo, out / name);
        std::fprintf(stderr, "%s  point %zu  seed %zu  qd %s\n", name, row.point_index, row.seed_index,
                     format_real(row.final_qd_score).c_str());
    });
    auto csv = open_file(out / "sweep.csv");
    write_sweep_csv(csv, rows);
    std::size_t failed = 0;
    for (const auto& row : rows)
        if (!row.error.empty()) {
            ++failed;
            std::fprintf(stderr, "run %zu failed: %s\n", row.run_index, row.error.c_str());
        }
    return failed ? 2 : 0;
}

int cmd_compare(const std::vector<std::string>& runs, const std::string& metric, const std::string& out) {
    const Comparison c = compare_runs(runs.at(0), runs.at(1), metric);
    write_comparison_csv(std::cout, c);
    if (!out.empty()) {
        auto f = open_file(out);
        write_comparison_csv(f, c);
    }
    return 0;
}

int cmd_diagnose(const std::string& config, std::size_t samples, const fs::path& out, const std::string& weights) {
    const ResolvedConfig rc = parse_config(config);
    const auto problem = make_problem(rc.run.problem);
    Rng rng = make_stream(rc.run.budget.seed, Stream::weights);
    const auto report = correlation_diagnostic(*problem, samples,
                                               weights == "random" ? WeightsMode::random : WeightsMode::fitness_only, rng);
    auto f = open_file(out);
    write_correlation_csv(f, report);
    std::printf("samples %zu  defined %zu  mean_rho %s  median_rho %s\n", report.rho.size(), report.defined,
                report.defined ? format_real(report.mean).c_str() : "nan",
                report.defined ? format_real(report.median).c_str() : "nan");
    return 0;
}

int cmd_brute_force(const std::string& config, const fs::path& out) {
    const ResolvedConfig rc = parse_config(config);
    const auto problem = make_problem(rc.run.problem);
    const Repertoire oracle = brute_force_archive(*problem, make_tessellation(*problem, rc.run));
    std::error_code ec;
    fs::create_directories(out, ec);
    auto f = open_file(out / "repertoire.csv");
    write_repertoire_csv(f, oracle);
    auto echo = open_file(out / "config-echo.json");
    echo << to_json(rc);
    std::printf("qd_score %s  coverage %s\n", format_real(oracle.qd_score()).c_str(),
                format_real(oracle.coverage()).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quality-diversity search over discrete genotypes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    std::string config, out, metric = "qd_score", weights = "fitness";
    std::vector<std::string> grid, runs;
    std::size_t seeds = 1, samples = 100;

    auto* run_cmd = app.add_subcommand("run", "Run one QD search and write its outputs");
    run_cmd->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out", out, "Output directory")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid of configs times seeds");
    sweep_cmd->add_option("--config", config, "Base config file")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--grid", grid, "KEY=V1,V2,... (repeatable)");
    sweep_cmd->add_option("--seeds", seeds, "Replicates per grid point")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--out", out, "Output directory")->required();

    auto* cmp_cmd = app.add_subcommand("compare", "Paired Wilcoxon signed-rank test between two run sets");
    cmp_cmd->add_option("--runs", runs, "DIR_A DIR_B")->required()->expected(2);
    cmp_cmd->add_option("--metric", metric, "metrics.csv column (final row)");
    cmp_cmd->add_option("--out", out, "Also write the table to this file");

    auto* diag_cmd = app.add_subcommand("diagnose-correlation", "Flip-gain estimate vs true gain correlation");
    diag_cmd->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    diag_cmd->add_option("--samples", samples, "Number of random genotypes")->check(CLI::PositiveNumber);
    diag_cmd->add_option("--out", out, "Report CSV")->required();
    diag_cmd->add_option("--weights", weights, "fitness | random")->check(CLI::IsMember({"fitness", "random"}));

    auto* bf_cmd = app.add_subcommand("brute-force", "Exhaustive oracle archive for small problems");
    bf_cmd->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    bf_cmd->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run_cmd)
            return cmd_run(config, out);
        if (*sweep_cmd)
            return cmd_sweep(config, grid, seeds, out);
        if (*cmp_cmd)
            return cmd_compare(runs, metric, out);
        if (*diag_cmd)
            return cmd_diagnose(config, samples, out, weights);
        if (*bf_cmd)
            return cmd_brute_force(config, out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
