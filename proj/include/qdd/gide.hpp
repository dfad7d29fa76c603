#pragma once

// Gradient-informed discrete emitter: first-order flip-gain estimates,
// tempered softmax over all m*K flips, and a temperature chosen so that the
// proposal entropy meets a target fraction of its maximum.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qdd/problem.hpp"
#include "qdd/rng.hpp"
#include "qdd/table.hpp"

namespace qdd {

/// w[0] weighs the fitness gradient (through |w[0]|), w[1..d] the descriptors.
struct DirectionWeights {
    std::vector<double> w;
};

/// delta(i, k) estimates g(x with position i set to k) - g(x).
struct FlipLogits {
    Table delta;
};

struct FlipDistribution {
    Table probs;
    double temperature = 1.0;
};

struct EntropyTarget {
    double alpha = 0.0;
    double h_max = 0.0;
    double h_target = 0.0;
    double tolerance = 0.0;

    /// h_max = log(m K), h_target = alpha h_max, tolerance = rel_tol h_max.
    static EntropyTarget from_alpha(double alpha, std::size_t m, std::size_t K, double rel_tol = 1e-6);
};

/// Sum of |w0| grad f + sum_i w_i grad c_i. With `normalize`, each of the
/// 1 + d tables is first scaled to unit Frobenius norm (zero tables kept).
Table combine_gradients(const GradientBundle& bundle, const DirectionWeights& w, bool normalize);

/// delta(i, k) = grad(i, k) - grad(i, x_i); zero on the current categories.
FlipLogits flip_logits(const Genotype& x, const Table& grad_g);

/// Shannon entropy (nats) of softmax(delta / T) over all m K entries.
double entropy_of(const FlipLogits& logits, double T);

FlipDistribution flip_distribution(const FlipLogits& logits, double T);

/// Inverse-CDF draw of one flip from the row-major table; a no-op flip
/// returns x unchanged.
Genotype sample_flip(const Genotype& x, const FlipDistribution& p, Rng& rng);

enum class SolveStatus {
    converged,
    /// Every logit table is constant: entropy is h_max for any T.
    degenerate,
    /// Target below the entropy reachable at the smallest bracketed T.
    clamped_low,
};

struct TemperatureSolution {
    double temperature = 1.0;
    double mean_entropy = 0.0;
    std::size_t iterations = 0;
    SolveStatus status = SolveStatus::converged;
};

struct SolverOptions {
    double log_t_min = -30.0;
    double log_t_max = 30.0;
    std::size_t max_iterations = 100;
};

/// Finds T such that the batch-mean entropy equals target.h_target within
/// target.tolerance. Safeguarded Newton on log T inside a bisection bracket;
/// mean entropy is non-decreasing in T. Throws SolverError on running out of
/// iterations, DomainError on an out-of-range target.
TemperatureSolution solve_temperature(std::span<const FlipLogits> batch, const EntropyTarget& target,
                                      std::optional<double> warm_start = std::nullopt, SolverOptions opts = {});

enum class TemperatureMode { shared, per_candidate };

struct GideOptions {
    bool normalize = true;
    TemperatureMode mode = TemperatureMode::shared;
    std::optional<double> warm_start;
};

struct GideResult {
    std::vector<Genotype> mutants;
    /// One entry in shared mode, B entries in per-candidate mode.
    std::vector<TemperatureSolution> solutions;
    double mean_entropy = 0.0;
    double temperature = 1.0; // shared T, or the mean in per-candidate mode
    std::size_t solver_iterations = 0;
};

/// One GIDE step over a batch of parents with their gradients and weights.
GideResult gide_emit(std::span<const Genotype> parents, std::span<const GradientBundle> gradients,
                     std::span<const DirectionWeights> weights, const EntropyTarget& target, Rng& rng,
                     const GideOptions& opts = {});

} // namespace qdd
