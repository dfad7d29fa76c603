#include "qdd/repertoire.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qdd/error.hpp"
#include "qdd/kernels/kernels.hpp"
#include "qdd/parallel.hpp"

namespace qdd {

Tessellation::Tessellation(Table centroids) : centroids_(std::move(centroids)) {
    if (centroids_.rows() < 1 || centroids_.cols() < 1)
        throw ConfigError("tessellation needs at least one centroid of dimension >= 1");
    for (double v : centroids_.flat())
        if (!std::isfinite(v))
            throw NumericError("tessellation centroid is not finite");
    const std::size_t M = centroids_.rows();
    const std::size_t d = centroids_.cols();
    stride_ = (M + 3) / 4 * 4;
    soa_.assign(d * stride_, std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < d; ++k)
            soa_[k * stride_ + j] = centroids_(j, k);
}

std::size_t Tessellation::cell_index(std::span<const double> descriptor) const {
    if (descriptor.size() != dims())
        throw ShapeError("descriptor has " + std::to_string(descriptor.size()) + " entries, tessellation expects " +
                         std::to_string(dims()));
    return kernels::nearest_centroid({soa_.data(), cells(), dims(), stride_}, descriptor);
}

namespace {

// Lloyd iterations from the given initial centroids. Assignment fans out
// over the worker pool; the centroid update is a sequential reduction.
Table lloyd(const Table& points, Table centroids, Rng& rng, const KMeansOptions& opts) {
    const std::size_t N = points.rows();
    const std::size_t M = centroids.rows();
    const std::size_t d = points.cols();
    std::vector<std::size_t> assign(N);
    std::uniform_int_distribution<std::size_t> pick(0, N - 1);

    for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
        const Tessellation current(centroids);
        constexpr std::size_t chunk = 1024;
        parallel_for((N + chunk - 1) / chunk, [&](std::size_t c) {
            const std::size_t end = std::min(N, (c + 1) * chunk);
            for (std::size_t i = c * chunk; i < end; ++i)
                assign[i] = current.cell_index(points.row(i));
        });

        Table sums(M, d);
        std::vector<std::size_t> counts(M, 0);
        for (std::size_t i = 0; i < N; ++i) {
            ++counts[assign[i]];
            auto row = points.row(i);
            for (std::size_t k = 0; k < d; ++k)
                sums(assign[i], k) += row[k];
        }

        double moved = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            if (counts[j] == 0) {
                // Empty cluster: reseed from a random sample and keep iterating.
                const std::size_t r = pick(rng);
                for (std::size_t k = 0; k < d; ++k)
                    centroids(j, k) = points(r, k);
                moved = std::numeric_limits<double>::infinity();
                continue;
            }
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double next = sums(j, k) / static_cast<double>(counts[j]);
                sq += (next - centroids(j, k)) * (next - centroids(j, k));
                centroids(j, k) = next;
            }
            moved = std::max(moved, std::sqrt(sq));
        }
        if (moved < opts.tolerance)
            break;
    }
    return centroids;
}

} // namespace

Tessellation build_cvt(std::span<const std::pair<double, double>> bounds, std::size_t M, std::size_t n_samples,
                       std::uint64_t seed, KMeansOptions opts) {
    if (M < 1)
        throw ConfigError("tessellation: cell count must be >= 1");
    if (n_samples < M)
        throw ConfigError("tessellation: need at least as many samples (" + std::to_string(n_samples) + ") as cells (" +
                          std::to_string(M) + ")");
    if (bounds.empty())
        throw ConfigError("tessellation: descriptor bounds are empty");
    const std::size_t d = bounds.size();
    Rng rng(seed);
    Table samples(n_samples, d);
    for (std::size_t i = 0; i < n_samples; ++i)
        for (std::size_t k = 0; k < d; ++k)
            samples(i, k) = std::uniform_real_distribution<double>(bounds[k].first, bounds[k].second)(rng);

    Table init(M, d);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t k = 0; k < d; ++k)
            init(j, k) = samples(j, k);
    return Tessellation(lloyd(samples, std::move(init), rng, opts));
}

Tessellation build_kmeans_from_data(const Table& points, std::size_t M, std::uint64_t seed, KMeansOptions opts) {
    const std::size_t N = points.rows();
    if (M < 1)
        throw ConfigError("tessellation: cell count must be >= 1");
    if (N < M)
        throw ConfigError("tessellation: " + std::to_string(N) + " data points cannot seed " + std::to_string(M) +
                          " cells");
    for (double v : points.flat())
        if (!std::isfinite(v))
            throw NumericError("tessellation: data points must be finite");
    const std::size_t d = points.cols();
    Rng rng(seed);

    // k-means++: first centre uniform, then proportional to squared distance.
    Table centroids(M, d);
    std::vector<double> d2(N, std::numeric_limits<double>::infinity());
    std::size_t chosen = std::uniform_int_distribution<std::size_t>(0, N - 1)(rng);
    for (std::size_t j = 0; j < M; ++j) {
        for (std::size_t k = 0; k < d; ++k)
            centroids(j, k) = points(chosen, k);
        if (j + 1 == M)
            break;
        double total = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = points(i, k) - centroids(j, k);
                s += diff * diff;
            }
            d2[i] = std::min(d2[i], s);
            total += d2[i];
        }
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            chosen = N - 1;
            for (std::size_t i = 0; i < N; ++i) {
                if (d2[i] > 0.0 && u < d2[i]) {
                    chosen = i;
                    break;
                }
                u -= d2[i];
            }
            while (d2[chosen] == 0.0 && chosen > 0)
                --chosen;
        } else {
            chosen = std::uniform_int_distribution<std::size_t>(0, N - 1)(rng);
        }
    }
    return Tessellation(lloyd(points, std::move(centroids), rng, opts));
}

Repertoire::Repertoire(Tessellation tessellation)
    : tessellation_(std::move(tessellation)), cells_(tessellation_.cells()) {}

InsertOutcome Repertoire::try_insert(const Genotype& g, const Evaluation& e) {
    InsertOutcome out;
    if (!e.finite()) {
        out.numeric_warning = true;
        return out;
    }
    out.cell = tessellation_.cell_index(e.descriptor);
    auto& slot = cells_[out.cell];
    if (!slot) {
        slot = Elite{g, e.fitness, e.descriptor};
        occupied_ids_.push_back(out.cell);
        out.status = InsertStatus::added_empty;
        return out;
    }
    out.previous_fitness = slot->fitness;
    if (e.fitness > slot->fitness) {
        *slot = Elite{g, e.fitness, e.descriptor};
        out.status = InsertStatus::replaced;
    }
    return out;
}

double Repertoire::qd_score() const noexcept {
    double s = 0.0;
    for (std::size_t id : occupied_ids_)
        s += cells_[id]->fitness;
    return s;
}

double Repertoire::coverage() const noexcept {
    return cells_.empty() ? 0.0 : static_cast<double>(occupied_ids_.size()) / static_cast<double>(cells_.size());
}

std::optional<double> Repertoire::max_fitness() const noexcept {
    std::optional<double> best;
    for (std::size_t id : occupied_ids_)
        if (!best || cells_[id]->fitness > *best)
            best = cells_[id]->fitness;
    return best;
}

std::optional<double> Repertoire::min_fitness() const noexcept {
    std::optional<double> worst;
    for (std::size_t id : occupied_ids_)
        if (!worst || cells_[id]->fitness < *worst)
            worst = cells_[id]->fitness;
    return worst;
}

std::vector<std::size_t> Repertoire::sample_cells(std::size_t B, Rng& rng) const {
    if (occupied_ids_.empty())
        throw EmptyArchiveError("cannot sample from an empty repertoire");
    std::uniform_int_distribution<std::size_t> pick(0, occupied_ids_.size() - 1);
    std::vector<std::size_t> ids(B);
    for (auto& id : ids)
        id = occupied_ids_[pick(rng)];
    return ids;
}

std::vector<Genotype> Repertoire::sample_uniform(std::size_t B, Rng& rng) const {
    std::vector<Genotype> out;
    out.reserve(B);
    for (std::size_t id : sample_cells(B, rng))
        out.push_back(cells_[id]->genotype);
    return out;
}

} // namespace qdd
