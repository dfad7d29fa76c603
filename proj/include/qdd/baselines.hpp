#pragma once

// Baseline emitters: uniform point mutation, one-point crossover, projected
// OMG-MEGA and projected CMA-MAP-Elites.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "qdd/problem.hpp"
#include "qdd/repertoire.hpp"
#include "qdd/rng.hpp"

namespace qdd {

/// Flips n_flips distinct positions, each to one of the K - 1 other categories.
Genotype random_point_mutation(const Genotype& x, std::size_t n_flips, std::size_t K, Rng& rng);

/// child = a[0, c) ++ b[c, m) with c uniform in [1, m - 1].
Genotype one_point_crossover(const Genotype& a, const Genotype& b, Rng& rng);
/// Same with an explicit cut point.
Genotype one_point_crossover_at(const Genotype& a, const Genotype& b, std::size_t cut);

/// Point in the one-hot relaxation, m*K entries, row-major.
struct ContinuousCandidate {
    std::vector<double> vector;
};

/// Per-row argmax of the m x K reshaping; ties go to the lowest category.
Genotype project_to_discrete(std::span<const double> v, const ProblemSpec& spec);
inline Genotype project_to_discrete(const ContinuousCandidate& v, const ProblemSpec& spec) {
    return project_to_discrete(std::span<const double>(v.vector), spec);
}

struct OmgMegaConfig {
    double sigma_g = 10.0;
    /// Scale each gradient table to unit Frobenius norm before weighting.
    bool normalize = true;
};

/// Weights for one projected OMG-MEGA step: w_i ~ N(0, sigma_g^2).
std::vector<double> draw_omg_weights(std::size_t d, const OmgMegaConfig& cfg, Rng& rng);

/// x' = proj(onehot(x) + |w0| grad f + sum w_i grad c_i).
Genotype omg_mega_step(const Genotype& x, const GradientBundle& grads, std::span<const double> weights,
                       const ProblemSpec& spec, bool normalize = true);

std::vector<Genotype> omg_mega_emit(std::span<const Genotype> parents, std::span<const GradientBundle> grads,
                                    const OmgMegaConfig& cfg, const ProblemSpec& spec, Rng& rng);

struct CmaConfig {
    double sigma0 = 0.5;
    std::size_t n_emitters = 5;
    /// Above this m*K the emitters keep only a diagonal covariance.
    std::size_t max_full_dim = 256;
};

/// One CMA-ES emitter over the m*K one-hot relaxation. The covariance of
/// the search distribution is sigma^2 * C.
struct CmaEmitterState {
    Eigen::VectorXd mean;
    double sigma = 0.5;
    double sigma0 = 0.5;
    bool diagonal = false;
    Eigen::MatrixXd C;         // full mode
    Eigen::VectorXd c_diag;    // diagonal mode
    Eigen::MatrixXd basis;     // eigenvectors of C (full mode)
    Eigen::VectorXd axis_len;  // sqrt of eigenvalues (full) or of c_diag
    Eigen::VectorXd p_sigma;
    Eigen::VectorXd p_c;
    std::uint64_t generation = 0;
    std::uint64_t solutions_generated = 0;
    std::uint64_t restarts = 0;

    static CmaEmitterState create(Eigen::VectorXd mean, double sigma0, bool diagonal);
    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
    /// mean <- start, C <- I, sigma <- sigma0, paths cleared.
    void reset(Eigen::VectorXd start);
};

struct CmaSample {
    std::size_t emitter = 0;
    ContinuousCandidate sample;
};

struct CmaEmitResult {
    std::vector<Genotype> genotypes;
    std::vector<CmaSample> bookkeeping;
};

/// Fills B slots, each from the emitter that has generated the fewest
/// solutions so far (ties to the lowest index).
CmaEmitResult cma_me_emit(std::vector<CmaEmitterState>& emitters, std::size_t B, const ProblemSpec& spec, Rng& rng);

struct CmaResult {
    ContinuousCandidate sample;
    double improvement = 0.0; // fitness for new cells, gain over the incumbent otherwise
    InsertStatus status = InsertStatus::rejected;
};

/// Ranks by improvement (new cells first, by fitness; then replacements and
/// rejections by gain), applies a rank-mu CMA-ES update over the top half.
/// Restarts the emitter at a uniformly drawn elite when nothing was added or
/// the covariance stops being positive definite.
void cma_me_update(CmaEmitterState& emitter, std::span<const CmaResult> results, const Repertoire& repertoire,
                   const ProblemSpec& spec, Rng& rng);

/// Recombination weights for mu parents: log-decreasing, normalised, and
/// averaged inside groups of tied ranking keys.
/// Keys are (tier, value) pairs already sorted best first.
std::vector<double> recombination_weights(std::span<const std::pair<int, double>> sorted_keys, std::size_t mu);

} // namespace qdd
