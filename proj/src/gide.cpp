#include "qdd/gide.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qdd/error.hpp"
#include "qdd/kernels/kernels.hpp"

namespace qdd {

EntropyTarget EntropyTarget::from_alpha(double alpha, std::size_t m, std::size_t K, double rel_tol) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw DomainError("entropy target: alpha must lie in [0, 1]");
    EntropyTarget t;
    t.alpha = alpha;
    t.h_max = std::log(static_cast<double>(m * K));
    t.h_target = alpha * t.h_max;
    t.tolerance = rel_tol * t.h_max;
    return t;
}

Table combine_gradients(const GradientBundle& bundle, const DirectionWeights& w, bool normalize) {
    const std::size_t d = bundle.descriptor_grads.size();
    if (w.w.size() != d + 1)
        throw ShapeError("combine_gradients: expected " + std::to_string(d + 1) + " weights, got " +
                         std::to_string(w.w.size()));
    Table out(bundle.fitness_grad.rows(), bundle.fitness_grad.cols());
    auto accumulate = [&](const Table& g, double weight) {
        if (!g.same_shape(out))
            throw ShapeError("combine_gradients: gradient tables differ in shape");
        if (normalize) {
            const double norm = std::sqrt(kernels::sum_squares(g.flat()));
            if (norm > 0.0)
                weight /= norm;
        }
        kernels::axpy(weight, g.flat(), out.flat());
    };
    accumulate(bundle.fitness_grad, std::abs(w.w[0]));
    for (std::size_t j = 0; j < d; ++j)
        accumulate(bundle.descriptor_grads[j], w.w[j + 1]);
    return out;
}

FlipLogits flip_logits(const Genotype& x, const Table& grad_g) {
    if (x.size() != grad_g.rows())
        throw ShapeError("flip_logits: genotype length does not match gradient rows");
    FlipLogits out{Table(grad_g.rows(), grad_g.cols())};
    for (std::size_t i = 0; i < grad_g.rows(); ++i) {
        const auto cur = static_cast<std::size_t>(x[i]);
        if (cur >= grad_g.cols())
            throw InvalidGenotype("flip_logits: category out of range");
        const double base = grad_g(i, cur);
        for (std::size_t k = 0; k < grad_g.cols(); ++k)
            out.delta(i, k) = k == cur ? 0.0 : grad_g(i, k) - base;
    }
    return out;
}

namespace {

struct LogitStats {
    double max = 0.0;
    bool constant = true;
};

LogitStats stats_of(const FlipLogits& l) {
    const auto flat = l.delta.flat();
    if (flat.empty())
        throw ShapeError("flip logits are empty");
    LogitStats s;
    const auto [lo, hi] = std::minmax_element(flat.begin(), flat.end());
    s.max = *hi;
    s.constant = *lo == *hi;
    if (!std::isfinite(*lo) || !std::isfinite(*hi))
        throw NumericError("flip logits contain non-finite values");
    return s;
}

struct EntropyPoint {
    double h = 0.0;
    double dh_dlogt = 0.0;
};

// H = log s0 - beta s1 / s0 and dH/dlogT = beta^2 Var_p(delta).
EntropyPoint entropy_point(const FlipLogits& l, double max, double T) {
    const double beta = 1.0 / T;
    const auto m = kernels::softmax_moments(l.delta.flat(), max, beta);
    const double mean = m.s1 / m.s0;
    const double var = std::max(0.0, m.s2 / m.s0 - mean * mean);
    const double h_max = std::log(static_cast<double>(l.delta.size()));
    const double h = std::clamp(std::log(m.s0) - beta * mean, 0.0, h_max);
    return {h, beta * beta * var};
}

void require_temperature(double T) {
    if (!(T > 0.0) || !std::isfinite(T))
        throw DomainError("temperature must be positive and finite");
}

} // namespace

double entropy_of(const FlipLogits& logits, double T) {
    require_temperature(T);
    const LogitStats s = stats_of(logits);
    if (s.constant)
        return std::log(static_cast<double>(logits.delta.size()));
    return entropy_point(logits, s.max, T).h;
}

FlipDistribution flip_distribution(const FlipLogits& logits, double T) {
    require_temperature(T);
    const LogitStats s = stats_of(logits);
    FlipDistribution p{Table(logits.delta.rows(), logits.delta.cols()), T};
    const double sum = kernels::exp_shifted(logits.delta.flat(), s.max, 1.0 / T, p.probs.flat());
    const double inv = 1.0 / sum;
    for (double& v : p.probs.flat())
        v *= inv;
    return p;
}

Genotype sample_flip(const Genotype& x, const FlipDistribution& p, Rng& rng) {
    const std::size_t K = p.probs.cols();
    if (x.size() != p.probs.rows())
        throw ShapeError("sample_flip: genotype length does not match distribution rows");
    const auto flat = p.probs.flat();
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cum = 0.0;
    std::size_t pick = flat.size();
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < flat.size(); ++j) {
        if (flat[j] > 0.0)
            last_positive = j;
        cum += flat[j];
        if (u < cum) {
            pick = j;
            break;
        }
    }
    if (pick == flat.size())
        pick = last_positive; // u fell into the rounding gap above the final sum
    Genotype y = x;
    y[pick / K] = static_cast<int>(pick % K);
    return y;
}

TemperatureSolution solve_temperature(std::span<const FlipLogits> batch, const EntropyTarget& target,
                                      std::optional<double> warm_start, SolverOptions opts) {
    if (batch.empty())
        throw DomainError("solve_temperature: empty batch");
    if (!(target.h_target >= 0.0) || target.h_target > target.h_max * (1.0 + 1e-12))
        throw DomainError("solve_temperature: target entropy must lie in [0, h_max]");

    std::vector<LogitStats> stats;
    stats.reserve(batch.size());
    for (const auto& l : batch)
        stats.push_back(stats_of(l));

    auto mean_at = [&](double log_t) {
        const double T = std::exp(log_t);
        EntropyPoint acc;
        for (std::size_t n = 0; n < batch.size(); ++n) {
            if (stats[n].constant) {
                acc.h += std::log(static_cast<double>(batch[n].delta.size()));
                continue;
            }
            const EntropyPoint p = entropy_point(batch[n], stats[n].max, T);
            acc.h += p.h;
            acc.dh_dlogt += p.dh_dlogt;
        }
        const auto B = static_cast<double>(batch.size());
        acc.h /= B;
        acc.dh_dlogt /= B;
        return acc;
    };

    TemperatureSolution sol;
    if (std::all_of(stats.begin(), stats.end(), [](const LogitStats& s) { return s.constant; })) {
        sol.temperature = warm_start.value_or(1.0);
        sol.mean_entropy = mean_at(0.0).h;
        sol.status = SolveStatus::degenerate;
        return sol;
    }

    double lo = opts.log_t_min;
    double hi = opts.log_t_max;
    const EntropyPoint at_lo = mean_at(lo);
    const double r_lo = at_lo.h - target.h_target;
    if (std::abs(r_lo) <= target.tolerance || r_lo > 0.0) {
        sol.temperature = std::exp(lo);
        sol.mean_entropy = at_lo.h;
        sol.iterations = 1;
        sol.status = r_lo > target.tolerance ? SolveStatus::clamped_low : SolveStatus::converged;
        return sol;
    }
    const EntropyPoint at_hi = mean_at(hi);
    if (at_hi.h - target.h_target <= target.tolerance) {
        // Entropy saturates below the bracket top only within tolerance of h_max.
        sol.temperature = std::exp(hi);
        sol.mean_entropy = at_hi.h;
        sol.iterations = 2;
        if (std::abs(at_hi.h - target.h_target) > target.tolerance)
            throw SolverError("solve_temperature: target entropy unreachable inside the bracket",
                              at_hi.h - target.h_target);
        return sol;
    }

    double u = 0.5 * (lo + hi);
    if (warm_start && *warm_start > 0.0) {
        const double w = std::log(*warm_start);
        if (w > lo && w < hi)
            u = w;
    }
    double residual = 0.0;
    for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
        const EntropyPoint p = mean_at(u);
        residual = p.h - target.h_target;
        if (std::abs(residual) <= target.tolerance) {
            sol.temperature = std::exp(u);
            sol.mean_entropy = p.h;
            sol.iterations = it + 2;
            return sol;
        }
        if (residual < 0.0)
            lo = u;
        else
            hi = u;
        double next = p.dh_dlogt > 0.0 ? u - residual / p.dh_dlogt : lo - 1.0;
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        u = next;
    }
    throw SolverError("solve_temperature: no convergence after " + std::to_string(opts.max_iterations) +
                          " iterations (residual " + std::to_string(residual) + ")",
                      residual);
}

GideResult gide_emit(std::span<const Genotype> parents, std::span<const GradientBundle> gradients,
                     std::span<const DirectionWeights> weights, const EntropyTarget& target, Rng& rng,
                     const GideOptions& opts) {
    const std::size_t B = parents.size();
    if (B == 0 || gradients.size() != B || weights.size() != B)
        throw ShapeError("gide_emit: parents, gradients and weights must be non-empty and equally long");

    std::vector<FlipLogits> logits;
    logits.reserve(B);
    for (std::size_t n = 0; n < B; ++n)
        logits.push_back(flip_logits(parents[n], combine_gradients(gradients[n], weights[n], opts.normalize)));

    GideResult out;
    std::vector<double> temps(B);
    if (opts.mode == TemperatureMode::shared) {
        const auto sol = solve_temperature(logits, target, opts.warm_start);
        std::fill(temps.begin(), temps.end(), sol.temperature);
        out.temperature = sol.temperature;
        out.mean_entropy = sol.mean_entropy;
        out.solver_iterations = sol.iterations;
        out.solutions.push_back(sol);
    } else {
        double t_sum = 0.0;
        double h_sum = 0.0;
        for (std::size_t n = 0; n < B; ++n) {
            const auto sol = solve_temperature(std::span(&logits[n], 1), target, opts.warm_start);
            temps[n] = sol.temperature;
            t_sum += sol.temperature;
            h_sum += sol.mean_entropy;
            out.solver_iterations += sol.iterations;
            out.solutions.push_back(sol);
        }
        out.temperature = t_sum / static_cast<double>(B);
        out.mean_entropy = h_sum / static_cast<double>(B);
    }

    out.mutants.reserve(B);
    for (std::size_t n = 0; n < B; ++n)
        out.mutants.push_back(sample_flip(parents[n], flip_distribution(logits[n], temps[n]), rng));
    return out;
}

} // namespace qdd
