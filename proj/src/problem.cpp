#include "qdd/problem.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "qdd/error.hpp"

namespace qdd {

void ProblemSpec::validate() const {
    if (m < 1)
        throw ConfigError("problem: m must be >= 1");
    if (K < 2)
        throw ConfigError("problem: K must be >= 2");
    if (d < 1)
        throw ConfigError("problem: d must be >= 1");
    if (descriptor_bounds.size() != d)
        throw ConfigError("problem: expected " + std::to_string(d) + " descriptor bounds");
    for (const auto& [lo, hi] : descriptor_bounds)
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw ConfigError("problem: descriptor bounds need finite lo < hi");
}

bool Evaluation::finite() const noexcept {
    return std::isfinite(fitness) && std::all_of(descriptor.begin(), descriptor.end(), [](double v) { return std::isfinite(v); });
}

void validate_genotype(const Genotype& x, const ProblemSpec& spec) {
    if (x.size() != spec.m)
        throw InvalidGenotype("genotype has length " + std::to_string(x.size()) + ", expected " + std::to_string(spec.m));
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < 0 || static_cast<std::size_t>(x[i]) >= spec.K)
            throw InvalidGenotype("genotype entry " + std::to_string(i) + " = " + std::to_string(x[i]) + " outside [0, " +
                                  std::to_string(spec.K) + ")");
}

Table onehot_encode(const Genotype& x, const ProblemSpec& spec) {
    validate_genotype(x, spec);
    Table t(spec.m, spec.K);
    for (std::size_t i = 0; i < spec.m; ++i)
        t(i, static_cast<std::size_t>(x[i])) = 1.0;
    return t;
}

Genotype neighbor(const Genotype& x, std::size_t i, std::size_t k, const ProblemSpec& spec) {
    if (i >= spec.m || i >= x.size())
        throw InvalidIndex("flip position " + std::to_string(i) + " out of range");
    if (k >= spec.K)
        throw InvalidIndex("flip category " + std::to_string(k) + " out of range");
    Genotype y = x;
    y[i] = static_cast<int>(k);
    return y;
}

std::size_t hamming_distance(const Genotype& a, const Genotype& b) {
    if (a.size() != b.size())
        throw InvalidGenotype("hamming distance of genotypes with different lengths");
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        n += a[i] != b[i];
    return n;
}

namespace {

double rel_err(double analytic, double numeric) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / scale;
}

void require_finite(const Evaluation& e) {
    if (!e.finite())
        throw NumericError("finite_difference_check: non-finite evaluation");
}

} // namespace

double finite_difference_check(const Problem& problem, const Genotype& x, double h) {
    if (!(h > 0.0))
        throw DomainError("finite_difference_check: step must be positive");
    const ProblemSpec& spec = problem.spec();
    const Table base = onehot_encode(x, spec);
    const GradientBundle g = problem.gradients(x);
    if (g.fitness_grad.rows() != spec.m || g.fitness_grad.cols() != spec.K || g.descriptor_grads.size() != spec.d)
        throw ShapeError("finite_difference_check: gradient bundle shape mismatch");

    double worst = 0.0;
    Table probe = base;
    for (std::size_t i = 0; i < spec.m; ++i) {
        for (std::size_t k = 0; k < spec.K; ++k) {
            probe(i, k) = base(i, k) + h;
            const Evaluation plus = problem.evaluate_relaxed(probe);
            probe(i, k) = base(i, k) - h;
            const Evaluation minus = problem.evaluate_relaxed(probe);
            probe(i, k) = base(i, k);
            require_finite(plus);
            require_finite(minus);

            worst = std::max(worst, rel_err(g.fitness_grad(i, k), (plus.fitness - minus.fitness) / (2.0 * h)));
            for (std::size_t j = 0; j < spec.d; ++j) {
                const double numeric = (plus.descriptor[j] - minus.descriptor[j]) / (2.0 * h);
                worst = std::max(worst, rel_err(g.descriptor_grads[j](i, k), numeric));
            }
        }
    }
    return worst;
}

std::string format_genotype(const Genotype& x) {
    std::string out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i)
            out += ' ';
        out += std::to_string(x[i]);
    }
    return out;
}

Genotype parse_genotype(std::string_view text) {
    Genotype g;
    const char* p = text.data();
    const char* end = p + text.size();
    while (p < end) {
        while (p < end && (*p == ' ' || *p == '\t' || *p == '\r' || *p == '\n'))
            ++p;
        if (p == end)
            break;
        int v = 0;
        auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc{} || (next < end && *next != ' ' && *next != '\t' && *next != '\r' && *next != '\n'))
            throw InvalidGenotype("cannot parse genotype text '" + std::string(text) + "'");
        g.values.push_back(v);
        p = next;
    }
    return g;
}

} // namespace qdd
