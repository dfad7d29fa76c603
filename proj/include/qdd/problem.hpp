#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qdd/table.hpp"

namespace qdd {

/// Sizes of a discrete QD problem: m positions, K categories each, d
/// descriptor dimensions, plus a bounding box of the reachable descriptors.
struct ProblemSpec {
    std::size_t m = 0;
    std::size_t K = 0;
    std::size_t d = 0;
    std::vector<std::pair<double, double>> descriptor_bounds;

    /// Throws ConfigError unless m >= 1, K >= 2, d >= 1 and every lo < hi.
    void validate() const;

    friend bool operator==(const ProblemSpec&, const ProblemSpec&) = default;
};

/// A point of the search space. Categories are 0-based: values[i] in [0, K).
struct Genotype {
    std::vector<int> values;

    std::size_t size() const noexcept { return values.size(); }
    int operator[](std::size_t i) const { return values[i]; }
    int& operator[](std::size_t i) { return values[i]; }

    friend bool operator==(const Genotype&, const Genotype&) = default;
    friend auto operator<=>(const Genotype&, const Genotype&) = default;
};

struct Evaluation {
    double fitness = 0.0;
    std::vector<double> descriptor;

    bool finite() const noexcept;
    friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

/// Gradients of the one-hot extensions of f and c_1..c_d, each m x K,
/// evaluated at the one-hot vertex of a genotype.
struct GradientBundle {
    Table fitness_grad;
    std::vector<Table> descriptor_grads;
};

/// Evaluated-and-differentiable problem. Implementations must be pure and
/// safe to call concurrently.
class Problem {
public:
    virtual ~Problem() = default;

    virtual const ProblemSpec& spec() const noexcept = 0;
    virtual Evaluation evaluate(const Genotype& x) const = 0;
    virtual GradientBundle gradients(const Genotype& x) const = 0;

    /// The continuous extension at an arbitrary m x K point. Agrees with
    /// evaluate() on one-hot vertices; used for finite-difference checks.
    virtual Evaluation evaluate_relaxed(const Table& onehot) const = 0;
};

/// Throws InvalidGenotype on length or range mismatch.
void validate_genotype(const Genotype& x, const ProblemSpec& spec);

Table onehot_encode(const Genotype& x, const ProblemSpec& spec);

/// Copy of x with position i set to category k. k == x[i] is a no-op flip.
Genotype neighbor(const Genotype& x, std::size_t i, std::size_t k, const ProblemSpec& spec);

std::size_t hamming_distance(const Genotype& a, const Genotype& b);

/// Max relative error between analytic gradients and central differences of
/// the relaxed extension around the one-hot vertex of x, over every entry of
/// the 1 + d gradient tables. Relative error is |a - n| / max(1, |a|, |n|).
double finite_difference_check(const Problem& problem, const Genotype& x, double h = 1e-5);

/// "0 3 1 1" style text form.
std::string format_genotype(const Genotype& x);
Genotype parse_genotype(std::string_view text);

} // namespace qdd
