#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "qdd/kernels/kernels.hpp"

using namespace qdd::kernels;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> N(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v)
        x = N(rng);
    return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)}); }

struct Centroids {
    std::vector<double> soa;
    std::size_t count, dims, stride;
    CentroidView view() const { return {soa.data(), count, dims, stride}; }
};

Centroids pack(const std::vector<std::vector<double>>& rows) {
    Centroids c;
    c.count = rows.size();
    c.dims = rows.front().size();
    c.stride = (c.count + 3) / 4 * 4;
    c.soa.assign(c.dims * c.stride, std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < c.count; ++j)
        for (std::size_t k = 0; k < c.dims; ++k)
            c.soa[k * c.stride + j] = rows[j][k];
    return c;
}

// Long-double reference for the softmax moments.
SoftmaxMoments moments_oracle(const std::vector<double>& z, double shift, double beta) {
    long double s0 = 0, s1 = 0, s2 = 0;
    for (double v : z) {
        const long double u = static_cast<long double>(v) - shift;
        const long double e = std::exp(static_cast<long double>(beta) * u);
        s0 += e;
        s1 += e * u;
        s2 += e * u * u;
    }
    return {static_cast<double>(s0), static_cast<double>(s1), static_cast<double>(s2)};
}

} // namespace

TEST_CASE("scalar softmax moments match a long-double reference") {
    std::mt19937_64 rng(1);
    for (std::size_t n : {1u, 2u, 3u, 7u, 40u, 129u}) {
        for (double beta : {1e-3, 0.5, 1.0, 20.0}) {
            const auto z = randn(n, rng, 3.0);
            const double shift = *std::max_element(z.begin(), z.end());
            const auto got = scalar_table().softmax_moments(z, shift, beta);
            const auto want = moments_oracle(z, shift, beta);
            CHECK(rel(got.s0, want.s0) < 1e-13);
            CHECK(std::abs(got.s1 - want.s1) < 1e-12 * std::max(1.0, std::abs(want.s1)));
            CHECK(std::abs(got.s2 - want.s2) < 1e-12 * std::max(1.0, std::abs(want.s2)));
        }
    }
}

TEST_CASE("scalar nearest centroid: lowest index wins ties") {
    const auto c = pack({{0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}});
    const std::vector<double> mid = {0.5, 0.5};
    CHECK(scalar_table().nearest_centroid(c.view(), mid) == 0);
    const std::vector<double> p = {0.9, 0.8};
    CHECK(scalar_table().nearest_centroid(c.view(), p) == 1);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
    const KernelTable* v = avx2_table();
    if (v == nullptr || !cpu_has_avx2()) {
        MESSAGE("AVX2 backend unavailable on this build or CPU; equivalence not exercised");
        return;
    }
    const KernelTable& s = scalar_table();
    std::mt19937_64 rng(7);

    SUBCASE("softmax moments and exp") {
        for (std::size_t n = 1; n <= 70; ++n) {
            for (double beta : {1e-6, 0.1, 1.0, 5.0, 1e3}) {
                auto z = randn(n, rng, 4.0);
                const double shift = *std::max_element(z.begin(), z.end());
                const auto a = s.softmax_moments(z, shift, beta);
                const auto b = v->softmax_moments(z, shift, beta);
                CHECK(rel(a.s0, b.s0) < 1e-13);
                CHECK(std::abs(a.s1 - b.s1) <= 1e-12 * std::max(1.0, std::abs(a.s1)));
                CHECK(std::abs(a.s2 - b.s2) <= 1e-12 * std::max(1.0, std::abs(a.s2)));

                std::vector<double> ea(n), eb(n);
                const double sa = s.exp_shifted(z, shift, beta, ea);
                const double sb = v->exp_shifted(z, shift, beta, eb);
                CHECK(rel(sa, sb) < 1e-13);
                for (std::size_t i = 0; i < n; ++i)
                    CHECK(std::abs(ea[i] - eb[i]) <= 1e-14 * std::max(ea[i], 1e-300) + 1e-300);
            }
        }
    }

    SUBCASE("exp underflow and extreme exponents") {
        std::vector<double> z = {0.0, -700.0, -745.0, -800.0, -1e6, -1.0, -0.5, -1e-12};
        std::vector<double> ea(z.size()), eb(z.size());
        s.exp_shifted(z, 0.0, 1.0, ea);
        v->exp_shifted(z, 0.0, 1.0, eb);
        for (std::size_t i = 0; i < z.size(); ++i) {
            CHECK(std::isfinite(eb[i]));
            CHECK(eb[i] >= 0.0);
            CHECK(std::abs(ea[i] - eb[i]) <= 1e-14 * ea[i] + 1e-300);
        }
    }

    SUBCASE("nearest centroid is bitwise identical") {
        for (std::size_t M : {1u, 2u, 3u, 4u, 5u, 17u, 64u}) {
            for (std::size_t d : {1u, 2u, 5u}) {
                std::vector<std::vector<double>> rows(M, std::vector<double>(d));
                for (auto& r : rows)
                    r = randn(d, rng);
                if (M > 2)
                    rows[M - 1] = rows[1]; // duplicate centroid: exact tie
                const auto c = pack(rows);
                for (int t = 0; t < 200; ++t) {
                    const auto p = randn(d, rng, 1.5);
                    CHECK(s.nearest_centroid(c.view(), p) == v->nearest_centroid(c.view(), p));
                }
                for (std::size_t j = 0; j < M; ++j)
                    CHECK(v->nearest_centroid(c.view(), rows[j]) == s.nearest_centroid(c.view(), rows[j]));
            }
        }
    }

    SUBCASE("dot, axpy, sum of squares") {
        for (std::size_t n = 0; n <= 41; ++n) {
            const auto a = randn(n, rng), b = randn(n, rng);
            const double scale = std::max(1.0, s.sum_squares(a) + s.sum_squares(b));
            CHECK(std::abs(s.dot(a, b) - v->dot(a, b)) <= 1e-13 * scale);
            CHECK(rel(s.sum_squares(a), v->sum_squares(a)) <= 1e-13);
            auto ya = randn(n, rng), yb = ya;
            s.axpy(0.37, a, ya);
            v->axpy(0.37, a, yb);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(std::abs(ya[i] - yb[i]) <= 1e-15 * std::max(1.0, std::abs(ya[i])));
        }
    }
}

TEST_CASE("backend selection") {
    const Backend before = active_backend();
    CHECK(set_backend(Backend::scalar));
    CHECK(active_backend() == Backend::scalar);
    CHECK(&active() == &scalar_table());
    if (avx2_table() && cpu_has_avx2()) {
        CHECK(set_backend(Backend::avx2));
        CHECK(active_backend() == Backend::avx2);
    } else {
        CHECK_FALSE(set_backend(Backend::avx2));
    }
    CHECK(backend_name(Backend::scalar) == "scalar");
    CHECK(backend_name(Backend::avx2) == "avx2");
    set_backend(before);
}
