#pragma once

// File formats. Column orders are frozen; golden tests in tests/test_output.cpp.
//
// metrics.csv
//   iteration,evaluations,gradient_evaluations,qd_score,qd_score_offset,
//   coverage,max_fitness,mean_entropy,temperature,solver_iterations
//   (the last three are blank for methods other than me-gide)
//
// repertoire.csv
//   cell_id,centroid_0..centroid_{d-1},occupied,fitness,
//   descriptor_0..descriptor_{d-1},genotype
//   (empty cells leave fitness, descriptors and genotype blank; the genotype
//   is a quoted space-separated list of 0-based categories)

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qdd/benchmarks.hpp"
#include "qdd/config.hpp"
#include "qdd/repertoire.hpp"
#include "qdd/scheduler.hpp"
#include "qdd/stats.hpp"

namespace qdd {

void write_metrics_csv(std::ostream& os, const RunMetrics& metrics);
void write_repertoire_csv(std::ostream& os, const Repertoire& repertoire);
/// Single polyline of QD-score against evaluations.
void write_qd_svg(std::ostream& os, const RunMetrics& metrics);

/// metrics.csv, repertoire.csv, config-echo.json and (if enabled) qd_score.svg.
void emit_outputs(const Repertoire& repertoire, const RunMetrics& metrics, const ResolvedConfig& cfg,
                  const std::filesystem::path& out_dir);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_correlation_csv(std::ostream& os, const CorrelationReport& report);

/// Last-row value of `column` in a metrics.csv file.
double read_final_metric(const std::filesystem::path& metrics_csv, const std::string& column);

/// Run directories (those holding a metrics.csv) directly under `dir`,
/// sorted by name; `dir` itself if it holds one.
std::vector<std::filesystem::path> find_run_dirs(const std::filesystem::path& dir);

struct Comparison {
    std::string metric;
    std::vector<std::string> runs_a;
    std::vector<std::string> runs_b;
    std::vector<double> a;
    std::vector<double> b;
    WilcoxonResult test;
};

/// Pairs runs of two directories by sorted order and tests "b > a".
Comparison compare_runs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
                        const std::string& metric);
void write_comparison_csv(std::ostream& os, const Comparison& c);

} // namespace qdd
