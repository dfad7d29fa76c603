#pragma once

// Small problems and helpers shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "qdd/problem.hpp"
#include "qdd/rng.hpp"

namespace qdd::test {

/// f = 0, c = 0 everywhere.
class ZeroProblem final : public Problem {
public:
    ZeroProblem(std::size_t m, std::size_t K) : spec_{m, K, 1, {{-1.0, 1.0}}} {}
    const ProblemSpec& spec() const noexcept override { return spec_; }
    Evaluation evaluate(const Genotype&) const override { return {0.0, {0.0}}; }
    GradientBundle gradients(const Genotype&) const override {
        return {Table(spec_.m, spec_.K), {Table(spec_.m, spec_.K)}};
    }
    Evaluation evaluate_relaxed(const Table&) const override { return {0.0, {0.0}}; }

private:
    ProblemSpec spec_;
};

inline Genotype random_genotype(std::size_t m, std::size_t K, Rng& rng) {
    std::uniform_int_distribution<int> cat(0, static_cast<int>(K) - 1);
    Genotype g;
    g.values.resize(m);
    for (int& v : g.values)
        v = cat(rng);
    return g;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("qdd_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace qdd::test

namespace qdd::test {

/// Upper 1% point of the chi-square distribution (Wilson-Hilferty).
inline double chi2_critical_01(std::size_t df) {
    const double k = static_cast<double>(df);
    const double z = 2.3263478740408408; // standard normal 0.99 quantile
    const double a = 2.0 / (9.0 * k);
    return k * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

inline double chi2_statistic(const std::vector<std::size_t>& counts, double expected) {
    double s = 0.0;
    for (std::size_t c : counts)
        s += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    return s;
}

/// Shannon entropy of softmax(z / T), evaluated directly in long double.
inline double entropy_oracle(std::span<const double> z, double T) {
    long double mx = z[0];
    for (double v : z)
        mx = std::max<long double>(mx, v);
    long double s = 0;
    for (double v : z)
        s += std::exp((v - mx) / T);
    long double h = 0;
    for (double v : z) {
        const long double p = std::exp((v - mx) / T) / s;
        if (p > 0)
            h -= p * std::log(p);
    }
    return static_cast<double>(h);
}

} // namespace qdd::test
