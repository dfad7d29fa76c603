#pragma once

// The QD loop: initialise the archive, then per iteration select -> emit ->
// evaluate -> insert, logging one metrics row.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qdd/config.hpp"
#include "qdd/problem.hpp"
#include "qdd/repertoire.hpp"

namespace qdd {

/// Builds the benchmark problem named by the [problem] section.
std::unique_ptr<Problem> make_problem(const ProblemConfig& cfg);

/// CVT over the descriptor bounds, or k-means++ over tessellation.data_file.
/// Seeded from the problem seed so every run on a problem shares cells.
Tessellation make_tessellation(const Problem& problem, const RunConfig& cfg);

struct MetricsRow {
    std::size_t iteration = 0;
    std::uint64_t evaluations = 0;
    std::uint64_t gradient_evaluations = 0;
    double qd_score = 0.0;
    /// Sum over elites of (fitness - lowest fitness evaluated so far).
    double qd_score_offset = 0.0;
    double coverage = 0.0;
    double max_fitness = 0.0;
    std::optional<double> mean_entropy; // me-gide only
    std::optional<double> temperature;  // me-gide only
    std::optional<std::size_t> solver_iterations;
};

struct RunMetrics {
    std::uint64_t initial_evaluations = 0;
    std::uint64_t nonfinite_rejections = 0;
    std::vector<MetricsRow> rows;
};

struct RunResult {
    Repertoire repertoire;
    RunMetrics metrics;
};

/// Reads one genotype per line ('#' comments and blank lines skipped).
std::vector<Genotype> load_genotypes(const std::string& path);

/// Builds the tessellation and inserts the initial genotypes: `init_file`
/// when set, otherwise init_count uniform random genotypes. Returns the
/// archive and the number of evaluations spent.
std::pair<Repertoire, std::uint64_t> initialize(const Problem& problem, const RunConfig& cfg);

using ProgressFn = std::function<void(const MetricsRow&)>;

/// Runs cfg.budget.iterations iterations. Deterministic for a given config;
/// independent of the worker count.
RunResult run(const Problem& problem, const RunConfig& cfg, const ProgressFn& progress = {});

struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

struct SweepRow {
    std::size_t run_index = 0;
    std::size_t point_index = 0;
    std::size_t seed_index = 0;
    std::uint64_t run_seed = 0;
    std::vector<std::pair<std::string, std::string>> assignment;
    RunConfig config;
    std::optional<MetricsRow> final_row; // nullopt when the run failed or had N = 0
    double final_qd_score = 0.0;
    double final_coverage = 0.0;
    std::string error;
};

/// Seed of replicate s: the base seed for s = 0, derive_seed(base, s) after.
/// Replicates share seeds across grid points so methods can be paired.
std::uint64_t sweep_seed(std::uint64_t base_seed, std::size_t seed_index);

using RunSink = std::function<void(const SweepRow&, const RunResult&)>;

/// Cartesian product of the axes (first axis outermost) times `seeds`
/// replicates. Run errors are recorded per row without stopping the sweep.
std::vector<SweepRow> sweep(const RunConfig& base, const std::vector<GridAxis>& grid, std::size_t seeds,
                            const RunSink& sink = {});

} // namespace qdd
