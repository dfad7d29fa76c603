#pragma once

// Desk-scale differentiable discrete benchmarks and the oracles built on them.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qdd/problem.hpp"
#include "qdd/repertoire.hpp"
#include "qdd/rng.hpp"
#include "qdd/table.hpp"

namespace qdd {

/// f(x) = sum_i F[i, x_i], c_j(x) = sum_i C_j[i, x_i]. The one-hot extension
/// is linear, so its gradients are the tables and flip estimates are exact.
class SeparableTableProblem final : public Problem {
public:
    /// Descriptor bounds are the exact per-dimension (sum of row minima,
    /// sum of row maxima).
    SeparableTableProblem(Table fitness, std::vector<Table> descriptors);

    const ProblemSpec& spec() const noexcept override { return spec_; }
    Evaluation evaluate(const Genotype& x) const override;
    GradientBundle gradients(const Genotype& x) const override;
    Evaluation evaluate_relaxed(const Table& onehot) const override;

    const Table& fitness_table() const noexcept { return F_; }
    const std::vector<Table>& descriptor_tables() const noexcept { return C_; }

private:
    Table F_;
    std::vector<Table> C_;
    ProblemSpec spec_;
};

/// Tables filled with standard normal draws.
SeparableTableProblem make_separable_problem(std::size_t m, std::size_t K, std::size_t d, std::uint64_t seed);

struct RbmParams {
    Table W;                      // hidden x visible
    std::vector<double> b;        // visible bias
    std::vector<double> c;        // hidden bias

    std::size_t visible() const noexcept { return W.cols(); }
    std::size_t hidden() const noexcept { return W.rows(); }
};

/// Free energy of a (possibly relaxed) visible vector:
/// -b.v - sum_j softplus(c_j + W_j . v).
double rbm_free_energy(const RbmParams& p, std::span<const double> v);

struct CdOptions {
    std::size_t epochs = 200;
    double learning_rate = 0.05;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
};

/// CD-1 training on binary rows of `data` (N x visible). Weights start at
/// N(0, 0.01^2), biases at zero.
RbmParams rbm_train_cd1(std::size_t visible, std::size_t hidden, const Table& data, const CdOptions& opts);

/// All bars-and-stripes images of a side x side grid, 2^(side+1) - 2 rows.
Table bars_and_stripes(std::size_t side);

/// Fitness -FreeEnergy(v); descriptors are the top-d principal components of
/// the hidden activation probabilities sigma(c + W v). Binary visibles (K=2);
/// the relaxation reads v_i from the one-hot column of category 1.
class RbmProblem final : public Problem {
public:
    RbmProblem(RbmParams params, Table components, std::vector<double> embedding_mean,
               std::vector<std::pair<double, double>> bounds);

    const ProblemSpec& spec() const noexcept override { return spec_; }
    Evaluation evaluate(const Genotype& x) const override;
    GradientBundle gradients(const Genotype& x) const override;
    Evaluation evaluate_relaxed(const Table& onehot) const override;

    const RbmParams& params() const noexcept { return params_; }
    /// d x hidden, orthonormal rows.
    const Table& components() const noexcept { return components_; }
    std::vector<double> embed(std::span<const double> v) const;

private:
    Evaluation evaluate_visible(std::span<const double> v) const;

    RbmParams params_;
    Table components_;
    std::vector<double> mean_;
    ProblemSpec spec_;
};

/// PCA over hidden embeddings of `fit_data`; bounds are the projected
/// min/max widened by 10% of the range on each side.
RbmProblem make_rbm_problem(RbmParams params, std::size_t d, const Table& fit_data);

/// Trained desk-scale RBM benchmark on bars-and-stripes.
struct RbmBenchmarkOptions {
    std::size_t side = 4;
    std::size_t hidden = 16;
    std::size_t d = 2;
    CdOptions training{};
};
RbmProblem make_rbm_benchmark(const RbmBenchmarkOptions& opts);

/// Optimal archive by enumerating all K^m genotypes. Refuses above `cap`.
Repertoire brute_force_archive(const Problem& problem, const Tessellation& tessellation,
                               std::uint64_t cap = std::uint64_t{1} << 20);

enum class WeightsMode { fitness_only, random };

struct CorrelationReport {
    /// One entry per sample; nullopt where either side has zero variance.
    std::vector<std::optional<double>> rho;
    std::vector<Genotype> samples;
    std::size_t defined = 0;
    double mean = 0.0;
    double median = 0.0;
    /// Counts over `bins` equal-width bins of [-1, 1].
    std::vector<std::size_t> histogram;
};

/// Pearson correlation between true flip gains g(x^(i,k)) - g(x) and their
/// first-order estimates over every non-trivial flip of uniformly drawn x.
CorrelationReport correlation_diagnostic(const Problem& problem, std::size_t n_samples, WeightsMode mode, Rng& rng,
                                         std::size_t bins = 20);

/// Pearson correlation; nullopt when either input has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

} // namespace qdd
