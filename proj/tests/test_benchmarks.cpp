#include "doctest.h"

#include <cmath>
#include <numeric>

#include "qdd/benchmarks.hpp"
#include "qdd/error.hpp"
#include "qdd/gide.hpp"
#include "support.hpp"

using namespace qdd;

namespace {

double mean_free_energy(const RbmParams& p, const Table& data) {
    double s = 0.0;
    for (std::size_t r = 0; r < data.rows(); ++r)
        s += rbm_free_energy(p, data.row(r));
    return s / static_cast<double>(data.rows());
}

std::vector<double> as_visible(const Genotype& x) { return {x.values.begin(), x.values.end()}; }

} // namespace

TEST_CASE("separable problem construction") {
    CHECK_THROWS_AS(make_separable_problem(1, 1, 1, 0), ConfigError);
    const auto a = make_separable_problem(4, 3, 2, 5);
    const auto b = make_separable_problem(4, 3, 2, 5);
    CHECK(a.fitness_table() == b.fitness_table());
    CHECK(a.descriptor_tables() == b.descriptor_tables());
    CHECK_FALSE(a.fitness_table() == make_separable_problem(4, 3, 2, 6).fitness_table());
    // Gradients are the tables themselves.
    const auto g = a.gradients(Genotype{{0, 2, 1, 1}});
    CHECK(g.fitness_grad == a.fitness_table());
    CHECK(g.descriptor_grads == a.descriptor_tables());
}

TEST_CASE("separable descriptor bounds contain every genotype and are attained") {
    const std::size_t m = 6, K = 3, d = 2;
    const auto p = make_separable_problem(m, K, d, 12);
    std::vector<double> lo(d, INFINITY), hi(d, -INFINITY);
    std::size_t count = 0;
    Genotype x{std::vector<int>(m, 0)};
    for (;;) {
        const auto e = p.evaluate(x);
        for (std::size_t j = 0; j < d; ++j) {
            CHECK(e.descriptor[j] >= p.spec().descriptor_bounds[j].first - 1e-12);
            CHECK(e.descriptor[j] <= p.spec().descriptor_bounds[j].second + 1e-12);
            lo[j] = std::min(lo[j], e.descriptor[j]);
            hi[j] = std::max(hi[j], e.descriptor[j]);
        }
        ++count;
        std::size_t i = 0;
        while (i < m && ++x[i] == static_cast<int>(K))
            x[i++] = 0;
        if (i == m)
            break;
    }
    CHECK(count == 729);
    for (std::size_t j = 0; j < d; ++j) {
        CHECK(lo[j] == doctest::Approx(p.spec().descriptor_bounds[j].first).epsilon(1e-12));
        CHECK(hi[j] == doctest::Approx(p.spec().descriptor_bounds[j].second).epsilon(1e-12));
    }
}

TEST_CASE("bars and stripes") {
    const Table bs = bars_and_stripes(4);
    CHECK(bs.rows() == 30);
    CHECK(bs.cols() == 16);
    // Every row is all-rows-constant or all-columns-constant, and rows are distinct.
    for (std::size_t r = 0; r < bs.rows(); ++r) {
        bool rows_const = true, cols_const = true;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                rows_const = rows_const && bs(r, i * 4 + j) == bs(r, i * 4);
                cols_const = cols_const && bs(r, i * 4 + j) == bs(r, j);
            }
        CHECK((rows_const || cols_const));
        for (std::size_t s = r + 1; s < bs.rows(); ++s) {
            bool same = true;
            for (std::size_t c = 0; c < 16; ++c)
                same = same && bs(r, c) == bs(s, c);
            CHECK_FALSE(same);
        }
    }
    CHECK(bars_and_stripes(2).rows() == 6);
}

TEST_CASE("CD-1 training") {
    const Table data = bars_and_stripes(4);
    CdOptions none;
    none.epochs = 0;
    none.seed = 3;
    const RbmParams init = rbm_train_cd1(16, 16, data, none);
    Rng rng(3);
    std::normal_distribution<double> N(0.0, 0.01);
    for (double w : init.W.flat())
        CHECK(w == N(rng));
    CHECK(init.b == std::vector<double>(16, 0.0));
    CHECK(init.c == std::vector<double>(16, 0.0));

    CdOptions full;
    full.seed = 3;
    const RbmParams trained = rbm_train_cd1(16, 16, data, full);
    CHECK(mean_free_energy(trained, data) < mean_free_energy(init, data));
    const RbmParams again = rbm_train_cd1(16, 16, data, full);
    CHECK(trained.W == again.W);
    CHECK(trained.b == again.b);
    CHECK(trained.c == again.c);
    CHECK_THROWS_AS(rbm_train_cd1(15, 16, data, full), ConfigError);
}

TEST_CASE("RBM problem") {
    RbmBenchmarkOptions opts;
    opts.training.epochs = 60;
    opts.training.seed = 4;
    opts.d = 3;
    const RbmProblem p = make_rbm_benchmark(opts);
    CHECK(p.spec().m == 16);
    CHECK(p.spec().K == 2);
    CHECK(p.spec().d == 3);

    SUBCASE("fitness is the negative free energy") {
        Rng rng(1);
        for (int t = 0; t < 20; ++t) {
            const auto x = test::random_genotype(16, 2, rng);
            CHECK(p.evaluate(x).fitness == doctest::Approx(-rbm_free_energy(p.params(), as_visible(x))).epsilon(1e-14));
        }
    }
    SUBCASE("PCA components are orthonormal") {
        const Table& P = p.components();
        for (std::size_t a = 0; a < P.rows(); ++a)
            for (std::size_t b = 0; b < P.rows(); ++b) {
                double s = 0.0;
                for (std::size_t j = 0; j < P.cols(); ++j)
                    s += P(a, j) * P(b, j);
                CHECK(std::abs(s - (a == b ? 1.0 : 0.0)) <= 1e-9);
            }
    }
    SUBCASE("training vectors fall inside the descriptor bounds") {
        const Table data = bars_and_stripes(4);
        for (std::size_t r = 0; r < data.rows(); ++r) {
            Genotype x;
            for (double v : data.row(r))
                x.values.push_back(static_cast<int>(v));
            const auto e = p.evaluate(x);
            for (std::size_t q = 0; q < 3; ++q) {
                CHECK(e.descriptor[q] >= p.spec().descriptor_bounds[q].first);
                CHECK(e.descriptor[q] <= p.spec().descriptor_bounds[q].second);
            }
        }
    }
    SUBCASE("analytic gradients match central differences") {
        Rng rng(2);
        for (int t = 0; t < 50; ++t)
            CHECK(finite_difference_check(p, test::random_genotype(16, 2, rng)) < 1e-5);
    }
    SUBCASE("descriptor dimension is limited by the hidden size") {
        CHECK_THROWS_AS(make_rbm_problem(p.params(), 17, bars_and_stripes(4)), ConfigError);
        CHECK_THROWS_AS(make_rbm_problem(p.params(), 0, bars_and_stripes(4)), ConfigError);
    }
}

TEST_CASE("full-rank PCA preserves distances between embeddings") {
    CdOptions cd;
    cd.epochs = 30;
    cd.seed = 8;
    const Table data = bars_and_stripes(3);
    const RbmParams params = rbm_train_cd1(9, 6, data, cd);
    const RbmProblem p = make_rbm_problem(params, 6, data);
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        const auto x = test::random_genotype(9, 2, rng), y = test::random_genotype(9, 2, rng);
        const auto ex = p.embed(as_visible(x)), ey = p.embed(as_visible(y));
        const auto dx = p.evaluate(x).descriptor, dy = p.evaluate(y).descriptor;
        double de = 0.0, dd = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
            de += (ex[j] - ey[j]) * (ex[j] - ey[j]);
            dd += (dx[j] - dy[j]) * (dx[j] - dy[j]);
        }
        CHECK(std::sqrt(dd) == doctest::Approx(std::sqrt(de)).epsilon(1e-9));
    }
}

TEST_CASE("brute-force archive on a hand-checked problem") {
    // f(x) = F[0, x0] + F[1, x1], c(x) = C[0, x0] + C[1, x1].
    Table F(2, 2), C(2, 2);
    F(0, 0) = 1.0, F(0, 1) = 3.0, F(1, 0) = 2.0, F(1, 1) = -1.0;
    C(0, 0) = 0.0, C(0, 1) = 1.0, C(1, 0) = 0.0, C(1, 1) = 2.0;
    const SeparableTableProblem p(F, {C});
    // Genotypes: 00 -> (f 3, c 0), 01 -> (0, 2), 10 -> (5, 1), 11 -> (2, 3).
    Table cent(2, 1);
    cent(0, 0) = 0.4;
    cent(1, 0) = 2.6;
    const Repertoire r = brute_force_archive(p, Tessellation(cent));
    CHECK(r.occupied() == 2);
    CHECK(r.cell(0)->genotype == Genotype{{1, 0}});
    CHECK(r.cell(0)->fitness == 5.0);
    CHECK(r.cell(1)->genotype == Genotype{{1, 1}});
    CHECK(r.cell(1)->fitness == 2.0);
    CHECK(r.qd_score() == 7.0);
}

TEST_CASE("brute-force cap") {
    const auto p = make_separable_problem(30, 2, 1, 0);
    Table cent(1, 1);
    CHECK_THROWS_AS(brute_force_archive(p, Tessellation(cent)), ConfigError);
    const auto small = make_separable_problem(4, 3, 1, 0);
    CHECK_THROWS_AS(brute_force_archive(small, Tessellation(cent), 80), ConfigError);
    CHECK_NOTHROW(brute_force_archive(small, Tessellation(cent), 81));
}

TEST_CASE("brute force bounds any archive on the same tessellation") {
    const auto p = make_separable_problem(6, 3, 2, 21);
    const Tessellation t = build_cvt(p.spec().descriptor_bounds, 20, 1000, 3);
    const Repertoire oracle = brute_force_archive(p, t);
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        Repertoire r(t);
        for (int i = 0; i < 200; ++i) {
            const auto x = test::random_genotype(6, 3, rng);
            r.try_insert(x, p.evaluate(x));
        }
        CHECK(r.qd_score() <= oracle.qd_score());
        for (std::size_t id : r.occupied_ids())
            CHECK(r.cell(id)->fitness <= oracle.cell(id)->fitness);
    }
}

TEST_CASE("pearson") {
    const std::vector<double> a = {1, 2, 3, 4}, b = {2, 4, 6, 8}, c = {8, 6, 4, 2}, k = {5, 5, 5, 5};
    CHECK(*pearson(a, b) == doctest::Approx(1.0));
    CHECK(*pearson(a, c) == doctest::Approx(-1.0));
    CHECK_FALSE(pearson(a, k).has_value());
}

TEST_CASE("correlation diagnostic") {
    SUBCASE("affine problem: every sample correlates perfectly") {
        const auto p = make_separable_problem(7, 4, 2, 2);
        for (auto mode : {WeightsMode::fitness_only, WeightsMode::random}) {
            Rng rng(3);
            const auto rep = correlation_diagnostic(p, 50, mode, rng);
            CHECK(rep.defined == 50);
            for (const auto& r : rep.rho) {
                REQUIRE(r.has_value());
                CHECK(std::abs(*r - 1.0) <= 1e-12);
            }
            CHECK(rep.histogram.back() == 50);
        }
    }
    SUBCASE("zero function: every sample is excluded") {
        const test::ZeroProblem z(5, 3);
        Rng rng(4);
        const auto rep = correlation_diagnostic(z, 20, WeightsMode::fitness_only, rng);
        CHECK(rep.defined == 0);
        for (const auto& r : rep.rho)
            CHECK_FALSE(r.has_value());
        CHECK(std::accumulate(rep.histogram.begin(), rep.histogram.end(), std::size_t{0}) == 0);
    }
    SUBCASE("RBM: reports a summary") {
        RbmBenchmarkOptions opts;
        opts.training.epochs = 60;
        const auto p = make_rbm_benchmark(opts);
        Rng rng(5);
        const auto rep = correlation_diagnostic(p, 100, WeightsMode::fitness_only, rng);
        CHECK(rep.defined >= 95);
        CHECK(rep.mean > 0.0);
        for (const auto& r : rep.rho)
            if (r) {
                CHECK(*r >= -1.0);
                CHECK(*r <= 1.0);
            }
        MESSAGE("RBM mean rho = " << rep.mean << ", median = " << rep.median);
    }
}
