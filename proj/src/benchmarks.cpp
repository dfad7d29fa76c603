#include "qdd/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "qdd/error.hpp"
#include "qdd/gide.hpp"
#include "qdd/kernels/kernels.hpp"
#include "qdd/parallel.hpp"
#include "qdd/stats.hpp"

namespace qdd {

// ---------------------------------------------------------------------------
// Separable table problem

SeparableTableProblem::SeparableTableProblem(Table fitness, std::vector<Table> descriptors)
    : F_(std::move(fitness)), C_(std::move(descriptors)) {
    spec_.m = F_.rows();
    spec_.K = F_.cols();
    spec_.d = C_.size();
    for (const Table& c : C_) {
        if (!c.same_shape(F_))
            throw ShapeError("separable problem: descriptor table shape differs from fitness table");
        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < c.rows(); ++i) {
            const auto row = c.row(i);
            lo += *std::min_element(row.begin(), row.end());
            hi += *std::max_element(row.begin(), row.end());
        }
        spec_.descriptor_bounds.emplace_back(lo, hi);
    }
    spec_.validate();
}

Evaluation SeparableTableProblem::evaluate(const Genotype& x) const {
    validate_genotype(x, spec_);
    Evaluation e;
    e.descriptor.assign(spec_.d, 0.0);
    for (std::size_t i = 0; i < spec_.m; ++i) {
        const auto k = static_cast<std::size_t>(x[i]);
        e.fitness += F_(i, k);
        for (std::size_t j = 0; j < spec_.d; ++j)
            e.descriptor[j] += C_[j](i, k);
    }
    return e;
}

GradientBundle SeparableTableProblem::gradients(const Genotype& x) const {
    validate_genotype(x, spec_);
    return {F_, C_};
}

Evaluation SeparableTableProblem::evaluate_relaxed(const Table& onehot) const {
    if (!onehot.same_shape(F_))
        throw ShapeError("separable problem: relaxed input has the wrong shape");
    Evaluation e;
    e.fitness = kernels::dot(F_.flat(), onehot.flat());
    for (const Table& c : C_)
        e.descriptor.push_back(kernels::dot(c.flat(), onehot.flat()));
    return e;
}

SeparableTableProblem make_separable_problem(std::size_t m, std::size_t K, std::size_t d, std::uint64_t seed) {
    if (m < 1 || K < 2 || d < 1)
        throw ConfigError("separable problem needs m >= 1, K >= 2, d >= 1");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&] {
        Table t(m, K);
        for (double& v : t.flat())
            v = normal(rng);
        return t;
    };
    Table F = fill();
    std::vector<Table> C;
    for (std::size_t j = 0; j < d; ++j)
        C.push_back(fill());
    return SeparableTableProblem(std::move(F), std::move(C));
}

// ---------------------------------------------------------------------------
// RBM

namespace {

double sigmoid(double a) {
    return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

double softplus(double a) { return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a))); }

std::vector<double> hidden_preactivation(const RbmParams& p, std::span<const double> v) {
    std::vector<double> a(p.hidden());
    for (std::size_t j = 0; j < a.size(); ++j)
        a[j] = p.c[j] + kernels::dot(p.W.row(j), v);
    return a;
}

} // namespace

double rbm_free_energy(const RbmParams& p, std::span<const double> v) {
    double f = -kernels::dot(p.b, v);
    for (double a : hidden_preactivation(p, v))
        f -= softplus(a);
    return f;
}

RbmParams rbm_train_cd1(std::size_t visible, std::size_t hidden, const Table& data, const CdOptions& opts) {
    if (data.rows() == 0)
        throw ConfigError("rbm training: empty dataset");
    if (data.cols() != visible)
        throw ConfigError("rbm training: dataset rows have length " + std::to_string(data.cols()) + ", expected " +
                          std::to_string(visible));
    if (hidden < 1 || opts.batch_size < 1)
        throw ConfigError("rbm training: hidden size and batch size must be positive");

    Rng rng(opts.seed);
    RbmParams p{Table(hidden, visible), std::vector<double>(visible, 0.0), std::vector<double>(hidden, 0.0)};
    std::normal_distribution<double> init(0.0, 0.01);
    for (double& w : p.W.flat())
        w = init(rng);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t N = data.rows();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Table dW(hidden, visible);
    std::vector<double> db(visible), dc(hidden), h0(hidden), h0s(hidden), v1(visible), h1(hidden);

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < N; start += opts.batch_size) {
            const std::size_t end = std::min(N, start + opts.batch_size);
            std::fill(dW.flat().begin(), dW.flat().end(), 0.0);
            std::fill(db.begin(), db.end(), 0.0);
            std::fill(dc.begin(), dc.end(), 0.0);
            for (std::size_t s = start; s < end; ++s) {
                const auto v0 = data.row(order[s]);
                for (std::size_t j = 0; j < hidden; ++j) {
                    h0[j] = sigmoid(p.c[j] + kernels::dot(p.W.row(j), v0));
                    h0s[j] = unit(rng) < h0[j] ? 1.0 : 0.0;
                }
                for (std::size_t i = 0; i < visible; ++i) {
                    double a = p.b[i];
                    for (std::size_t j = 0; j < hidden; ++j)
                        a += p.W(j, i) * h0s[j];
                    v1[i] = unit(rng) < sigmoid(a) ? 1.0 : 0.0;
                }
                for (std::size_t j = 0; j < hidden; ++j)
                    h1[j] = sigmoid(p.c[j] + kernels::dot(p.W.row(j), v1));
                for (std::size_t j = 0; j < hidden; ++j) {
                    kernels::axpy(h0[j], v0, dW.row(j));
                    kernels::axpy(-h1[j], v1, dW.row(j));
                    dc[j] += h0[j] - h1[j];
                }
                for (std::size_t i = 0; i < visible; ++i)
                    db[i] += v0[i] - v1[i];
            }
            const double step = opts.learning_rate / static_cast<double>(end - start);
            kernels::axpy(step, dW.flat(), p.W.flat());
            kernels::axpy(step, db, p.b);
            kernels::axpy(step, dc, p.c);
        }
    }
    return p;
}

Table bars_and_stripes(std::size_t side) {
    if (side < 1 || side > 16)
        throw ConfigError("bars-and-stripes side must lie in [1, 16]");
    const std::size_t patterns = std::size_t{1} << side;
    Table out(2 * patterns - 2, side * side);
    std::size_t row = 0;
    // Horizontal stripes for every row mask, then vertical bars for every
    // column mask except all-off and all-on (already present as stripes).
    for (std::size_t mask = 0; mask < patterns; ++mask, ++row)
        for (std::size_t r = 0; r < side; ++r)
            for (std::size_t c = 0; c < side; ++c)
                out(row, r * side + c) = (mask >> r) & 1U ? 1.0 : 0.0;
    for (std::size_t mask = 1; mask + 1 < patterns; ++mask, ++row)
        for (std::size_t r = 0; r < side; ++r)
            for (std::size_t c = 0; c < side; ++c)
                out(row, r * side + c) = (mask >> c) & 1U ? 1.0 : 0.0;
    return out;
}

RbmProblem::RbmProblem(RbmParams params, Table components, std::vector<double> embedding_mean,
                       std::vector<std::pair<double, double>> bounds)
    : params_(std::move(params)), components_(std::move(components)), mean_(std::move(embedding_mean)) {
    if (params_.b.size() != params_.visible() || params_.c.size() != params_.hidden())
        throw ShapeError("rbm problem: bias sizes do not match the weight matrix");
    if (components_.cols() != params_.hidden() || mean_.size() != params_.hidden())
        throw ShapeError("rbm problem: PCA basis does not match the hidden size");
    spec_.m = params_.visible();
    spec_.K = 2;
    spec_.d = components_.rows();
    spec_.descriptor_bounds = std::move(bounds);
    spec_.validate();
}

std::vector<double> RbmProblem::embed(std::span<const double> v) const {
    auto h = hidden_preactivation(params_, v);
    for (double& x : h)
        x = sigmoid(x);
    return h;
}

Evaluation RbmProblem::evaluate_visible(std::span<const double> v) const {
    const auto a = hidden_preactivation(params_, v);
    Evaluation e;
    e.fitness = kernels::dot(params_.b, v);
    std::vector<double> centred(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        e.fitness += softplus(a[j]);
        centred[j] = sigmoid(a[j]) - mean_[j];
    }
    for (std::size_t q = 0; q < spec_.d; ++q)
        e.descriptor.push_back(kernels::dot(components_.row(q), centred));
    return e;
}

Evaluation RbmProblem::evaluate(const Genotype& x) const {
    validate_genotype(x, spec_);
    std::vector<double> v(spec_.m);
    for (std::size_t i = 0; i < spec_.m; ++i)
        v[i] = static_cast<double>(x[i]);
    return evaluate_visible(v);
}

Evaluation RbmProblem::evaluate_relaxed(const Table& onehot) const {
    if (onehot.rows() != spec_.m || onehot.cols() != 2)
        throw ShapeError("rbm problem: relaxed input has the wrong shape");
    std::vector<double> v(spec_.m);
    for (std::size_t i = 0; i < spec_.m; ++i)
        v[i] = onehot(i, 1);
    return evaluate_visible(v);
}

GradientBundle RbmProblem::gradients(const Genotype& x) const {
    validate_genotype(x, spec_);
    std::vector<double> v(spec_.m);
    for (std::size_t i = 0; i < spec_.m; ++i)
        v[i] = static_cast<double>(x[i]);
    const auto a = hidden_preactivation(params_, v);
    const std::size_t H = a.size();
    std::vector<double> s(H), ds(H);
    for (std::size_t j = 0; j < H; ++j) {
        s[j] = sigmoid(a[j]);
        ds[j] = s[j] * (1.0 - s[j]);
    }

    // d/dv of b.v + sum softplus(a) is b + W^T sigma(a); descriptor q has
    // W^T (P_q * sigma'(a)). Only the category-1 column carries v.
    GradientBundle g{Table(spec_.m, 2), std::vector<Table>(spec_.d, Table(spec_.m, 2))};
    std::vector<double> grad_v(params_.b);
    for (std::size_t j = 0; j < H; ++j)
        kernels::axpy(s[j], params_.W.row(j), grad_v);
    for (std::size_t i = 0; i < spec_.m; ++i)
        g.fitness_grad(i, 1) = grad_v[i];

    for (std::size_t q = 0; q < spec_.d; ++q) {
        std::fill(grad_v.begin(), grad_v.end(), 0.0);
        for (std::size_t j = 0; j < H; ++j)
            kernels::axpy(components_(q, j) * ds[j], params_.W.row(j), grad_v);
        for (std::size_t i = 0; i < spec_.m; ++i)
            g.descriptor_grads[q](i, 1) = grad_v[i];
    }
    return g;
}

RbmProblem make_rbm_problem(RbmParams params, std::size_t d, const Table& fit_data) {
    const std::size_t H = params.hidden();
    if (d < 1 || d > H)
        throw ConfigError("rbm problem: descriptor dimension " + std::to_string(d) + " must lie in [1, hidden=" +
                          std::to_string(H) + "]");
    if (fit_data.rows() == 0 || fit_data.cols() != params.visible())
        throw ConfigError("rbm problem: descriptor fit data is empty or has the wrong width");

    const auto N = static_cast<Eigen::Index>(fit_data.rows());
    Eigen::MatrixXd emb(N, static_cast<Eigen::Index>(H));
    for (Eigen::Index r = 0; r < N; ++r) {
        auto a = hidden_preactivation(params, fit_data.row(static_cast<std::size_t>(r)));
        for (std::size_t j = 0; j < H; ++j)
            emb(r, static_cast<Eigen::Index>(j)) = sigmoid(a[j]);
    }
    const Eigen::RowVectorXd mean = emb.colwise().mean();
    const Eigen::MatrixXd centred = emb.rowwise() - mean;
    const Eigen::MatrixXd cov = centred.transpose() * centred / static_cast<double>(N);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
        throw NumericError("rbm problem: PCA eigendecomposition failed");

    // Eigenvalues ascend; take the last d columns, largest first, with the
    // sign fixed so the largest-magnitude loading is positive.
    Table components(d, H);
    for (std::size_t q = 0; q < d; ++q) {
        Eigen::VectorXd col = eig.eigenvectors().col(static_cast<Eigen::Index>(H - 1 - q));
        Eigen::Index arg = 0;
        col.cwiseAbs().maxCoeff(&arg);
        if (col(arg) < 0.0)
            col = -col;
        for (std::size_t j = 0; j < H; ++j)
            components(q, j) = col(static_cast<Eigen::Index>(j));
    }

    std::vector<std::pair<double, double>> bounds(d, {std::numeric_limits<double>::infinity(),
                                                      -std::numeric_limits<double>::infinity()});
    for (Eigen::Index r = 0; r < N; ++r) {
        for (std::size_t q = 0; q < d; ++q) {
            double proj = 0.0;
            for (std::size_t j = 0; j < H; ++j)
                proj += components(q, j) * centred(r, static_cast<Eigen::Index>(j));
            bounds[q].first = std::min(bounds[q].first, proj);
            bounds[q].second = std::max(bounds[q].second, proj);
        }
    }
    for (auto& [lo, hi] : bounds) {
        const double pad = 0.1 * std::max(hi - lo, 1e-9);
        lo -= pad;
        hi += pad;
    }
    std::vector<double> mean_vec(mean.data(), mean.data() + mean.size());
    return RbmProblem(std::move(params), std::move(components), std::move(mean_vec), std::move(bounds));
}

RbmProblem make_rbm_benchmark(const RbmBenchmarkOptions& opts) {
    const Table data = bars_and_stripes(opts.side);
    RbmParams params = rbm_train_cd1(opts.side * opts.side, opts.hidden, data, opts.training);
    return make_rbm_problem(std::move(params), opts.d, data);
}

// ---------------------------------------------------------------------------
// Oracles

Repertoire brute_force_archive(const Problem& problem, const Tessellation& tessellation, std::uint64_t cap) {
    const ProblemSpec& spec = problem.spec();
    std::uint64_t total = 1;
    for (std::size_t i = 0; i < spec.m; ++i) {
        if (total > cap / spec.K + 1) {
            total = cap + 1;
            break;
        }
        total *= spec.K;
    }
    if (total > cap)
        throw ConfigError("brute force: K^m = " + std::to_string(spec.K) + "^" + std::to_string(spec.m) +
                          " exceeds the enumeration cap " + std::to_string(cap));

    auto genotype_at = [&](std::uint64_t index) {
        Genotype g;
        g.values.assign(spec.m, 0);
        for (std::size_t i = spec.m; i-- > 0;) {
            g[i] = static_cast<int>(index % spec.K);
            index /= spec.K;
        }
        return g;
    };

    Repertoire rep(tessellation);
    constexpr std::uint64_t chunk = 4096;
    std::vector<Evaluation> evals;
    for (std::uint64_t start = 0; start < total; start += chunk) {
        const std::uint64_t n = std::min(chunk, total - start);
        evals.assign(n, {});
        parallel_for(n, [&](std::size_t j) { evals[j] = problem.evaluate(genotype_at(start + j)); });
        for (std::uint64_t j = 0; j < n; ++j)
            rep.try_insert(genotype_at(start + j), evals[j]);
    }
    return rep;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2)
        return std::nullopt;
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    // Relative variance floor: rounding noise around a constant is not signal.
    const double floor_a = 1e-24 * std::max(1.0, ma * ma) * n;
    const double floor_b = 1e-24 * std::max(1.0, mb * mb) * n;
    if (saa <= floor_a || sbb <= floor_b)
        return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationReport correlation_diagnostic(const Problem& problem, std::size_t n_samples, WeightsMode mode, Rng& rng,
                                         std::size_t bins) {
    const ProblemSpec& spec = problem.spec();
    if (n_samples * spec.m * (spec.K - 1) > 1'000'000)
        throw ConfigError("correlation diagnostic: more than 10^6 neighbour evaluations requested");
    if (bins < 1)
        throw ConfigError("correlation diagnostic: need at least one histogram bin");

    CorrelationReport rep;
    std::vector<DirectionWeights> weights;
    std::uniform_int_distribution<int> cat(0, static_cast<int>(spec.K) - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t s = 0; s < n_samples; ++s) {
        Genotype x;
        x.values.resize(spec.m);
        for (int& v : x.values)
            v = cat(rng);
        rep.samples.push_back(std::move(x));
        DirectionWeights w{std::vector<double>(spec.d + 1, 0.0)};
        if (mode == WeightsMode::fitness_only)
            w.w[0] = 1.0;
        else
            for (double& v : w.w)
                v = normal(rng);
        weights.push_back(std::move(w));
    }

    rep.rho.assign(n_samples, std::nullopt);
    parallel_for(n_samples, [&](std::size_t s) {
        const Genotype& x = rep.samples[s];
        const auto& w = weights[s].w;
        auto g_of = [&](const Evaluation& e) {
            double g = std::abs(w[0]) * e.fitness;
            for (std::size_t j = 0; j < spec.d; ++j)
                g += w[j + 1] * e.descriptor[j];
            return g;
        };
        const double g0 = g_of(problem.evaluate(x));
        const FlipLogits est = flip_logits(x, combine_gradients(problem.gradients(x), weights[s], false));
        std::vector<double> truth, approx;
        for (std::size_t i = 0; i < spec.m; ++i)
            for (std::size_t k = 0; k < spec.K; ++k) {
                if (static_cast<int>(k) == x[i])
                    continue;
                truth.push_back(g_of(problem.evaluate(neighbor(x, i, k, spec))) - g0);
                approx.push_back(est.delta(i, k));
            }
        rep.rho[s] = pearson(truth, approx);
    });

    std::vector<double> defined;
    for (const auto& r : rep.rho)
        if (r)
            defined.push_back(*r);
    rep.defined = defined.size();
    rep.histogram.assign(bins, 0);
    if (!defined.empty()) {
        rep.mean = std::accumulate(defined.begin(), defined.end(), 0.0) / static_cast<double>(defined.size());
        rep.median = median(defined);
        for (double r : defined) {
            auto b = static_cast<std::size_t>((r + 1.0) / 2.0 * static_cast<double>(bins));
            ++rep.histogram[std::min(b, bins - 1)];
        }
    }
    return rep;
}

} // namespace qdd
