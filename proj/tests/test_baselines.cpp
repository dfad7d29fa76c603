#include "doctest.h"

#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>

#include "qdd/baselines.hpp"
#include "qdd/benchmarks.hpp"
#include "qdd/error.hpp"
#include "support.hpp"

using namespace qdd;

namespace {

ProblemSpec spec_of(std::size_t m, std::size_t K) { return {m, K, 1, {{0.0, 1.0}}}; }

Repertoire one_elite(const Genotype& g) {
    Table c(1, 1);
    Repertoire r{Tessellation(c)};
    r.try_insert(g, {1.0, {0.0}});
    return r;
}

Eigen::VectorXd onehot_vec(const Genotype& g, const ProblemSpec& spec) {
    const Table t = onehot_encode(g, spec);
    return Eigen::Map<const Eigen::VectorXd>(t.flat().data(), static_cast<Eigen::Index>(t.size()));
}

} // namespace

TEST_CASE("random point mutation") {
    Rng rng(1);
    CHECK(random_point_mutation(Genotype{{0}}, 1, 2, rng) == Genotype{{1}});
    for (int t = 0; t < 500; ++t) {
        const auto x = test::random_genotype(6, 5, rng);
        CHECK(hamming_distance(x, random_point_mutation(x, 1, 5, rng)) == 1);
        CHECK(hamming_distance(x, random_point_mutation(x, 3, 5, rng)) == 3);
    }
    CHECK_THROWS_AS(random_point_mutation(Genotype{{0, 1}}, 3, 2, rng), ConfigError);
}

TEST_CASE("random point mutation is uniform over position and new category") {
    const std::size_t m = 4, K = 4, n = 100000;
    const Genotype x{{0, 1, 2, 3}};
    std::map<std::pair<std::size_t, int>, std::size_t> counts;
    Rng rng(2);
    for (std::size_t t = 0; t < n; ++t) {
        const auto y = random_point_mutation(x, 1, K, rng);
        for (std::size_t i = 0; i < m; ++i)
            if (y[i] != x[i])
                ++counts[{i, y[i]}];
    }
    CHECK(counts.size() == m * (K - 1));
    const double q = 1.0 / (m * (K - 1)), sd = std::sqrt(n * q * (1 - q));
    for (const auto& [key, c] : counts) {
        CHECK(key.second != x[key.first]);
        CHECK(std::abs(static_cast<double>(c) - n * q) <= 3.0 * sd);
    }
}

TEST_CASE("one-point crossover") {
    Rng rng(3);
    const Genotype a{{0, 0, 0, 0}}, b{{1, 1, 1, 1}};
    CHECK(one_point_crossover_at(a, b, 2) == Genotype{{0, 0, 1, 1}});
    for (int t = 0; t < 100; ++t) {
        const auto x = test::random_genotype(7, 3, rng);
        CHECK(one_point_crossover(x, x, rng) == x);
        const auto c = one_point_crossover(a, b, rng);
        // A prefix of a followed by a non-empty suffix of b.
        std::size_t cut = 0;
        while (cut < 4 && c[cut] == 0)
            ++cut;
        CHECK(cut >= 1);
        CHECK(cut <= 3);
        for (std::size_t i = cut; i < 4; ++i)
            CHECK(c[i] == 1);
    }
    CHECK_THROWS_AS(one_point_crossover_at(a, b, 0), InvalidIndex);
    CHECK_THROWS_AS(one_point_crossover_at(a, b, 4), InvalidIndex);
    CHECK_THROWS_AS(one_point_crossover(Genotype{{0}}, Genotype{{1}}, rng), ConfigError);
}

TEST_CASE("projection to the discrete space") {
    const auto spec = spec_of(3, 3);
    Rng rng(4);
    for (int t = 0; t < 100; ++t) {
        const auto x = test::random_genotype(3, 3, rng);
        CHECK(project_to_discrete(onehot_encode(x, spec).flat(), spec) == x);
    }
    const std::vector<double> v = {0.2, 0.9, 0.1};
    CHECK(project_to_discrete(v, spec_of(1, 3)) == Genotype{{1}});
    const std::vector<double> tie = {0.5, 0.5};
    CHECK(project_to_discrete(tie, spec_of(1, 2)) == Genotype{{0}});
    CHECK_THROWS_AS(project_to_discrete(tie, spec_of(2, 2)), ShapeError);
}

TEST_CASE("projected OMG-MEGA step") {
    const auto spec = spec_of(3, 2);
    const Genotype x{{0, 0, 0}};
    SUBCASE("zero gradients keep x") {
        const GradientBundle z{Table(3, 2), {Table(3, 2)}};
        const std::vector<double> w = {3.0, -2.0};
        CHECK(omg_mega_step(x, z, w, spec) == x);
        CHECK(omg_mega_step(x, z, w, spec, false) == x);
    }
    SUBCASE("a +2 push on entry (0, 1) flips position 0") {
        GradientBundle g{Table(3, 2), {Table(3, 2)}};
        g.fitness_grad(0, 1) = 2.0;
        const std::vector<double> w = {1.0, 0.0};
        CHECK(omg_mega_step(x, g, w, spec, false) == Genotype{{1, 0, 0}});
        // Normalised, the same push has unit size: the row ties at (1, 1) and
        // the lowest category is kept.
        CHECK(omg_mega_step(x, g, w, spec, true) == x);
        const std::vector<double> w2 = {1.5, 0.0};
        CHECK(omg_mega_step(x, g, w2, spec, true) == Genotype{{1, 0, 0}});
    }
    SUBCASE("emit draws weights with the configured spread") {
        Rng rng(5);
        OmgMegaConfig cfg{2.5};
        double s = 0.0, s2 = 0.0;
        const int n = 40000;
        for (int t = 0; t < n; ++t) {
            const auto w = draw_omg_weights(1, cfg, rng);
            REQUIRE(w.size() == 2);
            s += w[1];
            s2 += w[1] * w[1];
        }
        CHECK(std::abs(s / n) < 0.05);
        CHECK(std::sqrt(s2 / n) == doctest::Approx(2.5).epsilon(0.02));
        CHECK_THROWS_AS(draw_omg_weights(1, OmgMegaConfig{0.0}, rng), ConfigError);
    }
    SUBCASE("emit is deterministic given the rng") {
        const auto p = make_separable_problem(3, 2, 1, 7);
        std::vector<Genotype> parents = {x, Genotype{{1, 1, 0}}};
        std::vector<GradientBundle> grads = {p.gradients(parents[0]), p.gradients(parents[1])};
        Rng a(9), b(9);
        CHECK(omg_mega_emit(parents, grads, {}, p.spec(), a) == omg_mega_emit(parents, grads, {}, p.spec(), b));
    }
}

TEST_CASE("CMA emitter selection") {
    const auto spec = spec_of(2, 2);
    const Eigen::VectorXd mean = onehot_vec(Genotype{{0, 1}}, spec);
    Rng rng(6);
    SUBCASE("a single emitter fills the batch") {
        std::vector<CmaEmitterState> em = {CmaEmitterState::create(mean, 0.5, false)};
        const auto r = cma_me_emit(em, 4, spec, rng);
        CHECK(r.genotypes.size() == 4);
        for (const auto& b : r.bookkeeping)
            CHECK(b.emitter == 0);
        CHECK(em[0].solutions_generated == 4);
    }
    SUBCASE("the least-used emitter is chosen") {
        std::vector<CmaEmitterState> em = {CmaEmitterState::create(mean, 0.5, false),
                                           CmaEmitterState::create(mean, 0.5, false)};
        em[1].solutions_generated = 5;
        const auto r = cma_me_emit(em, 3, spec, rng);
        for (const auto& b : r.bookkeeping)
            CHECK(b.emitter == 0);
        CHECK(em[0].solutions_generated == 3);
        CHECK(em[1].solutions_generated == 5);
    }
    SUBCASE("counters stay balanced") {
        std::vector<CmaEmitterState> em;
        for (int e = 0; e < 5; ++e)
            em.push_back(CmaEmitterState::create(mean, 0.5, e % 2 == 0));
        em[2].solutions_generated = 4;
        for (std::size_t B : {1u, 3u, 7u, 12u}) {
            cma_me_emit(em, B, spec, rng);
            std::uint64_t lo = em[0].solutions_generated, hi = lo;
            for (const auto& e : em) {
                lo = std::min(lo, e.solutions_generated);
                hi = std::max(hi, e.solutions_generated);
            }
            CHECK(hi - lo <= std::max<std::uint64_t>(B, 4));
        }
    }
    SUBCASE("vanishing step size samples the projected mean") {
        const Genotype g{{1, 0}};
        std::vector<CmaEmitterState> em = {CmaEmitterState::create(onehot_vec(g, spec), 1e-12, false),
                                           CmaEmitterState::create(onehot_vec(g, spec), 1e-12, true)};
        for (const auto& y : cma_me_emit(em, 20, spec, rng).genotypes)
            CHECK(y == g);
    }
}

TEST_CASE("CMA emitter update") {
    const auto spec = spec_of(2, 3);
    const Genotype elite{{2, 1}};
    const Repertoire rep = one_elite(elite);
    Rng rng(7);
    std::normal_distribution<double> N;
    auto sample = [&](const Eigen::VectorXd& around) {
        ContinuousCandidate c{std::vector<double>(static_cast<std::size_t>(around.size()))};
        for (std::size_t i = 0; i < c.vector.size(); ++i)
            c.vector[i] = around[static_cast<Eigen::Index>(i)] + 0.3 * N(rng);
        return c;
    };

    for (bool diagonal : {false, true}) {
        CAPTURE(diagonal);
        const Eigen::VectorXd start = Eigen::VectorXd::Constant(6, 0.2);

        SUBCASE("all rejected triggers a restart at an elite") {
            auto em = CmaEmitterState::create(start, 0.5, diagonal);
            em.sigma = 3.0;
            std::vector<CmaResult> res;
            for (int i = 0; i < 6; ++i)
                res.push_back({sample(start), -1.0, InsertStatus::rejected});
            cma_me_update(em, res, rep, spec, rng);
            CHECK(em.restarts == 1);
            CHECK(em.sigma == 0.5);
            CHECK(em.mean == onehot_vec(elite, spec));
            if (diagonal)
                CHECK(em.c_diag == Eigen::VectorXd::Ones(6));
            else
                CHECK(em.C == Eigen::MatrixXd::Identity(6, 6));
        }

        SUBCASE("equal improvements give the plain average of the top half") {
            auto em = CmaEmitterState::create(start, 0.5, diagonal);
            std::vector<CmaResult> res;
            for (int i = 0; i < 8; ++i)
                res.push_back({sample(start), 1.25, InsertStatus::replaced});
            cma_me_update(em, res, rep, spec, rng);
            Eigen::VectorXd want = Eigen::VectorXd::Zero(6);
            for (int i = 0; i < 4; ++i)
                want += Eigen::Map<const Eigen::VectorXd>(res[i].sample.vector.data(), 6);
            want /= 4.0;
            CHECK((em.mean - want).norm() <= 1e-12);
            CHECK(em.restarts == 0);
        }

        SUBCASE("a single added sample pulls the mean toward it") {
            auto em = CmaEmitterState::create(start, 0.5, diagonal);
            const auto s = sample(start);
            const Eigen::Map<const Eigen::VectorXd> target(s.vector.data(), 6);
            const double before = (em.mean - target).norm();
            const CmaResult one[] = {{s, 0.7, InsertStatus::added_empty}};
            cma_me_update(em, one, rep, spec, rng);
            CHECK((em.mean - target).norm() < before);
        }

        SUBCASE("new cells outrank replacements regardless of value") {
            auto em = CmaEmitterState::create(start, 0.5, diagonal);
            std::vector<CmaResult> res = {{sample(start), 100.0, InsertStatus::replaced},
                                          {sample(start), -5.0, InsertStatus::added_empty}};
            cma_me_update(em, res, rep, spec, rng);
            CHECK(em.mean == Eigen::Map<const Eigen::VectorXd>(res[1].sample.vector.data(), 6));
        }

        SUBCASE("covariance stays symmetric positive definite over many updates") {
            auto em = CmaEmitterState::create(start, 0.5, diagonal);
            for (int gen = 0; gen < 30; ++gen) {
                std::vector<CmaResult> res;
                for (int i = 0; i < 10; ++i)
                    res.push_back({sample(em.mean), N(rng), i % 3 ? InsertStatus::replaced : InsertStatus::rejected});
                cma_me_update(em, res, rep, spec, rng);
                if (diagonal) {
                    CHECK(em.c_diag.minCoeff() > 0.0);
                } else {
                    CHECK((em.C - em.C.transpose()).norm() <= 1e-12);
                    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(em.C).eigenvalues().minCoeff() > 0.0);
                }
                CHECK(std::isfinite(em.sigma));
                CHECK(em.sigma > 0.0);
            }
        }
    }
}

TEST_CASE("recombination weights") {
    const std::vector<std::pair<int, double>> distinct = {{1, 5.0}, {1, 4.0}, {1, 3.0}, {0, 2.0}};
    const auto w = recombination_weights(distinct, 3);
    REQUIRE(w.size() == 3);
    double total = 0.0;
    for (double v : w)
        total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w[0] > w[1]);
    CHECK(w[1] > w[2]);
    const double raw[] = {std::log(3.5) - std::log(1.0), std::log(3.5) - std::log(2.0), std::log(3.5) - std::log(3.0)};
    const double raw_total = raw[0] + raw[1] + raw[2];
    for (int i = 0; i < 3; ++i)
        CHECK(w[static_cast<std::size_t>(i)] == doctest::Approx(raw[i] / raw_total).epsilon(1e-14));

    const std::vector<std::pair<int, double>> tied = {{1, 2.0}, {1, 2.0}, {0, 1.0}, {0, 1.0}};
    const auto t = recombination_weights(tied, 2);
    CHECK(t[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(t[1] == doctest::Approx(0.5).epsilon(1e-15));
}
