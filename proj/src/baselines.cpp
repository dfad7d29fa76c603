#include "qdd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "qdd/error.hpp"
#include "qdd/gide.hpp"

namespace qdd {

Genotype random_point_mutation(const Genotype& x, std::size_t n_flips, std::size_t K, Rng& rng) {
    const std::size_t m = x.size();
    if (n_flips < 1 || n_flips > m)
        throw ConfigError("point mutation: n_flips must lie in [1, m]");
    if (K < 2)
        throw ConfigError("point mutation: need K >= 2");
    std::vector<std::size_t> positions(m);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    Genotype y = x;
    std::uniform_int_distribution<int> other(0, static_cast<int>(K) - 2);
    for (std::size_t f = 0; f < n_flips; ++f) {
        const std::size_t j = std::uniform_int_distribution<std::size_t>(f, m - 1)(rng);
        std::swap(positions[f], positions[j]);
        const std::size_t i = positions[f];
        int v = other(rng);
        if (v >= x[i])
            ++v;
        y[i] = v;
    }
    return y;
}

Genotype one_point_crossover_at(const Genotype& a, const Genotype& b, std::size_t cut) {
    if (a.size() != b.size())
        throw InvalidGenotype("crossover parents differ in length");
    if (a.size() < 2)
        throw ConfigError("crossover unavailable for genotypes shorter than 2");
    if (cut < 1 || cut > a.size() - 1)
        throw InvalidIndex("crossover cut must lie in [1, m - 1]");
    Genotype child = a;
    std::copy(b.values.begin() + static_cast<std::ptrdiff_t>(cut), b.values.end(),
              child.values.begin() + static_cast<std::ptrdiff_t>(cut));
    return child;
}

Genotype one_point_crossover(const Genotype& a, const Genotype& b, Rng& rng) {
    if (a.size() < 2)
        throw ConfigError("crossover unavailable for genotypes shorter than 2");
    const std::size_t cut = std::uniform_int_distribution<std::size_t>(1, a.size() - 1)(rng);
    return one_point_crossover_at(a, b, cut);
}

Genotype project_to_discrete(std::span<const double> v, const ProblemSpec& spec) {
    if (v.size() != spec.m * spec.K)
        throw ShapeError("projection: expected " + std::to_string(spec.m * spec.K) + " coordinates, got " +
                         std::to_string(v.size()));
    Genotype g;
    g.values.resize(spec.m);
    for (std::size_t i = 0; i < spec.m; ++i) {
        const auto row = v.subspan(i * spec.K, spec.K);
        g[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return g;
}

std::vector<double> draw_omg_weights(std::size_t d, const OmgMegaConfig& cfg, Rng& rng) {
    if (!(cfg.sigma_g > 0.0))
        throw ConfigError("omg-mega: sigma_g must be positive");
    std::normal_distribution<double> normal(0.0, cfg.sigma_g);
    std::vector<double> w(d + 1);
    for (double& v : w)
        v = normal(rng);
    return w;
}

Genotype omg_mega_step(const Genotype& x, const GradientBundle& grads, std::span<const double> weights,
                       const ProblemSpec& spec, bool normalize) {
    const Table step = combine_gradients(grads, DirectionWeights{{weights.begin(), weights.end()}}, normalize);
    Table point = onehot_encode(x, spec);
    if (!point.same_shape(step))
        throw ShapeError("omg-mega: gradient shape does not match the problem");
    for (std::size_t j = 0; j < point.size(); ++j)
        point.flat()[j] += step.flat()[j];
    return project_to_discrete(point.flat(), spec);
}

std::vector<Genotype> omg_mega_emit(std::span<const Genotype> parents, std::span<const GradientBundle> grads,
                                    const OmgMegaConfig& cfg, const ProblemSpec& spec, Rng& rng) {
    if (parents.size() != grads.size())
        throw ShapeError("omg-mega: parents and gradients differ in count");
    std::vector<Genotype> out;
    out.reserve(parents.size());
    for (std::size_t n = 0; n < parents.size(); ++n)
        out.push_back(omg_mega_step(parents[n], grads[n], draw_omg_weights(spec.d, cfg, rng), spec, cfg.normalize));
    return out;
}

// ---------------------------------------------------------------------------
// CMA emitters

CmaEmitterState CmaEmitterState::create(Eigen::VectorXd mean, double sigma0, bool diagonal) {
    if (!(sigma0 > 0.0))
        throw ConfigError("cma: sigma0 must be positive");
    CmaEmitterState s;
    s.sigma0 = sigma0;
    s.diagonal = diagonal;
    s.reset(std::move(mean));
    return s;
}

void CmaEmitterState::reset(Eigen::VectorXd start) {
    const auto n = start.size();
    mean = std::move(start);
    sigma = sigma0;
    if (diagonal) {
        C.resize(0, 0);
        basis.resize(0, 0);
        c_diag = Eigen::VectorXd::Ones(n);
    } else {
        C = Eigen::MatrixXd::Identity(n, n);
        basis = Eigen::MatrixXd::Identity(n, n);
        c_diag.resize(0);
    }
    axis_len = Eigen::VectorXd::Ones(n);
    p_sigma = Eigen::VectorXd::Zero(n);
    p_c = Eigen::VectorXd::Zero(n);
    generation = 0;
}

CmaEmitResult cma_me_emit(std::vector<CmaEmitterState>& emitters, std::size_t B, const ProblemSpec& spec, Rng& rng) {
    if (emitters.empty())
        throw ConfigError("cma: no emitters configured");
    const std::size_t n = spec.m * spec.K;
    CmaEmitResult out;
    out.genotypes.reserve(B);
    out.bookkeeping.reserve(B);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (std::size_t slot = 0; slot < B; ++slot) {
        std::size_t pick = 0;
        for (std::size_t e = 1; e < emitters.size(); ++e)
            if (emitters[e].solutions_generated < emitters[pick].solutions_generated)
                pick = e;
        auto& em = emitters[pick];
        if (em.dim() != n)
            throw ShapeError("cma: emitter dimension does not match m*K");
        for (auto& v : z)
            v = normal(rng);
        Eigen::VectorXd y = em.diagonal ? Eigen::VectorXd(em.axis_len.cwiseProduct(z))
                                        : Eigen::VectorXd(em.basis * em.axis_len.cwiseProduct(z));
        Eigen::VectorXd x = em.mean + em.sigma * y;
        ContinuousCandidate cand{std::vector<double>(x.data(), x.data() + x.size())};
        out.genotypes.push_back(project_to_discrete(cand, spec));
        out.bookkeeping.push_back({pick, std::move(cand)});
        ++em.solutions_generated;
    }
    return out;
}

std::vector<double> recombination_weights(std::span<const std::pair<int, double>> sorted_keys, std::size_t mu) {
    mu = std::min(mu, sorted_keys.size());
    std::vector<double> w(mu);
    double total = 0.0;
    for (std::size_t i = 0; i < mu; ++i) {
        w[i] = std::log(static_cast<double>(mu) + 0.5) - std::log(static_cast<double>(i) + 1.0);
        total += w[i];
    }
    for (double& v : w)
        v /= total;
    // Tied keys share the mean of the weights their ranks would receive.
    for (std::size_t i = 0; i < mu;) {
        std::size_t j = i + 1;
        while (j < mu && sorted_keys[j] == sorted_keys[i])
            ++j;
        if (j - i > 1) {
            const double avg = std::accumulate(w.begin() + static_cast<std::ptrdiff_t>(i),
                                               w.begin() + static_cast<std::ptrdiff_t>(j), 0.0) /
                               static_cast<double>(j - i);
            std::fill(w.begin() + static_cast<std::ptrdiff_t>(i), w.begin() + static_cast<std::ptrdiff_t>(j), avg);
        }
        i = j;
    }
    // Renormalise: truncating a tie group at mu can shift the total.
    total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w)
        v /= total;
    return w;
}

namespace {

void restart(CmaEmitterState& em, const Repertoire& repertoire, const ProblemSpec& spec, Rng& rng) {
    const auto ids = repertoire.sample_cells(1, rng);
    const Table onehot = onehot_encode(repertoire.cell(ids[0])->genotype, spec);
    const auto flat = onehot.flat();
    em.reset(Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size())));
    ++em.restarts;
}

int tier(InsertStatus s) {
    switch (s) {
    case InsertStatus::added_empty: return 2;
    case InsertStatus::replaced: return 1;
    case InsertStatus::rejected: return 0;
    }
    return 0;
}

} // namespace

void cma_me_update(CmaEmitterState& em, std::span<const CmaResult> results, const Repertoire& repertoire,
                   const ProblemSpec& spec, Rng& rng) {
    if (results.empty())
        return;
    const bool any_added = std::any_of(results.begin(), results.end(), [](const CmaResult& r) {
        return r.status != InsertStatus::rejected;
    });
    if (!any_added) {
        restart(em, repertoire, spec, rng);
        return;
    }

    const std::size_t lambda = results.size();
    const auto n = static_cast<Eigen::Index>(em.dim());
    const double nd = static_cast<double>(n);
    std::vector<std::size_t> order(lambda);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const int ta = tier(results[a].status), tb = tier(results[b].status);
        if (ta != tb)
            return ta > tb;
        return results[a].improvement > results[b].improvement;
    });
    const std::size_t mu = std::max<std::size_t>(1, lambda / 2);
    std::vector<std::pair<int, double>> keys;
    for (std::size_t i = 0; i < lambda; ++i)
        keys.emplace_back(tier(results[order[i]].status), results[order[i]].improvement);
    const std::vector<double> w = recombination_weights(keys, mu);
    double sum_sq = 0.0;
    for (double v : w)
        sum_sq += v * v;
    const double mu_eff = 1.0 / sum_sq;

    // Standard CMA-ES constants (Hansen's defaults); sep-CMA scaling in diagonal mode.
    const double c_sigma = (mu_eff + 2.0) / (nd + mu_eff + 5.0);
    const double d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (nd + 1.0)) - 1.0) + c_sigma;
    const double c_c = (4.0 + mu_eff / nd) / (nd + 4.0 + 2.0 * mu_eff / nd);
    double c_1 = 2.0 / ((nd + 1.3) * (nd + 1.3) + mu_eff);
    double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nd + 2.0) * (nd + 2.0) + mu_eff));
    if (em.diagonal) {
        const double scale = (nd + 2.0) / 3.0;
        c_1 = std::min(1.0, c_1 * scale);
        c_mu = std::min(1.0 - c_1, c_mu * scale);
    }
    c_mu = std::max(0.0, c_mu);
    const double chi_n = std::sqrt(nd) * (1.0 - 1.0 / (4.0 * nd) + 1.0 / (21.0 * nd * nd));

    const Eigen::VectorXd old_mean = em.mean;
    std::vector<Eigen::VectorXd> ys;
    ys.reserve(w.size());
    Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const auto& s = results[order[i]].sample.vector;
        if (static_cast<Eigen::Index>(s.size()) != n)
            throw ShapeError("cma: sample dimension mismatch");
        const Eigen::Map<const Eigen::VectorXd> x(s.data(), n);
        new_mean += w[i] * x;
        ys.emplace_back((x - old_mean) / em.sigma);
    }
    const Eigen::VectorXd y_w = (new_mean - old_mean) / em.sigma;
    em.mean = new_mean;

    // C^{-1/2} y_w
    Eigen::VectorXd whitened;
    if (em.diagonal)
        whitened = y_w.cwiseQuotient(em.axis_len);
    else
        whitened = em.basis * (em.basis.transpose() * y_w).cwiseQuotient(em.axis_len);
    em.p_sigma = (1.0 - c_sigma) * em.p_sigma + std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * whitened;
    const double ps_norm = em.p_sigma.norm();
    const double decay = 1.0 - std::pow(1.0 - c_sigma, 2.0 * static_cast<double>(em.generation + 1));
    const bool h_sigma = ps_norm / std::sqrt(std::max(decay, 1e-300)) < (1.4 + 2.0 / (nd + 1.0)) * chi_n;
    em.p_c = (1.0 - c_c) * em.p_c + (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) : 0.0) * y_w;
    const double delta_h = h_sigma ? 0.0 : c_c * (2.0 - c_c);

    bool healthy = true;
    if (em.diagonal) {
        Eigen::VectorXd rank_mu = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i < ys.size(); ++i)
            rank_mu += w[i] * ys[i].cwiseProduct(ys[i]);
        em.c_diag = (1.0 - c_1 - c_mu) * em.c_diag + c_1 * (em.p_c.cwiseProduct(em.p_c) + delta_h * em.c_diag) +
                    c_mu * rank_mu;
        healthy = em.c_diag.allFinite() && em.c_diag.minCoeff() > 0.0;
        if (healthy)
            em.axis_len = em.c_diag.cwiseSqrt();
    } else {
        Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < ys.size(); ++i)
            rank_mu.noalias() += w[i] * ys[i] * ys[i].transpose();
        em.C = (1.0 - c_1 - c_mu) * em.C + c_1 * (em.p_c * em.p_c.transpose() + delta_h * em.C) + c_mu * rank_mu;
        em.C = 0.5 * (em.C + em.C.transpose());
        if (em.C.allFinite()) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(em.C);
            healthy = eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0;
            if (healthy) {
                em.basis = eig.eigenvectors();
                em.axis_len = eig.eigenvalues().cwiseSqrt();
            }
        } else {
            healthy = false;
        }
    }

    em.sigma *= std::exp((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0));
    ++em.generation;
    if (!healthy || !std::isfinite(em.sigma) || !(em.sigma > 0.0) || !em.mean.allFinite())
        restart(em, repertoire, spec, rng);
}

} // namespace qdd
