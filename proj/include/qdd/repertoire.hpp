#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qdd/problem.hpp"
#include "qdd/rng.hpp"
#include "qdd/table.hpp"

namespace qdd {

/// Nearest-centroid partition of descriptor space into M cells.
class Tessellation {
public:
    Tessellation() = default;
    /// centroids is M x d, M >= 1.
    explicit Tessellation(Table centroids);

    std::size_t cells() const noexcept { return centroids_.rows(); }
    std::size_t dims() const noexcept { return centroids_.cols(); }
    const Table& centroids() const noexcept { return centroids_; }

    /// argmin of Euclidean distance; ties resolve to the lowest index.
    std::size_t cell_index(std::span<const double> descriptor) const;

private:
    Table centroids_;
    std::vector<double> soa_; // dimension-major, padded to a multiple of 4 with +inf
    std::size_t stride_ = 0;
};

struct KMeansOptions {
    std::size_t max_iterations = 200;
    double tolerance = 1e-8; // max centroid movement
};

/// CVT: n_samples uniform points in the bounding box, then Lloyd's k-means
/// seeded with the first M samples. Empty clusters are reseeded from a
/// uniformly chosen sample.
Tessellation build_cvt(std::span<const std::pair<double, double>> bounds, std::size_t M, std::size_t n_samples,
                       std::uint64_t seed, KMeansOptions opts = {});

/// k-means++ initialisation then Lloyd's iterations over `points` (N x d).
Tessellation build_kmeans_from_data(const Table& points, std::size_t M, std::uint64_t seed, KMeansOptions opts = {});

struct Elite {
    Genotype genotype;
    double fitness = 0.0;
    std::vector<double> descriptor;
};

enum class InsertStatus { added_empty, replaced, rejected };

struct InsertOutcome {
    InsertStatus status = InsertStatus::rejected;
    std::size_t cell = 0;
    /// Incumbent fitness before a replacement or rejection, if any.
    std::optional<double> previous_fitness;
    bool numeric_warning = false;

    bool added() const noexcept { return status != InsertStatus::rejected; }
};

class Repertoire {
public:
    Repertoire() = default;
    explicit Repertoire(Tessellation tessellation);

    const Tessellation& tessellation() const noexcept { return tessellation_; }
    std::size_t size() const noexcept { return cells_.size(); }
    std::size_t occupied() const noexcept { return occupied_ids_.size(); }
    const std::optional<Elite>& cell(std::size_t id) const { return cells_.at(id); }
    /// Occupied cell ids in first-fill order.
    std::span<const std::size_t> occupied_ids() const noexcept { return occupied_ids_; }

    /// Empty cell: store. Strictly greater fitness: replace. Otherwise reject.
    InsertOutcome try_insert(const Genotype& g, const Evaluation& e);

    double qd_score() const noexcept;
    double coverage() const noexcept;
    /// Nullopt for an empty archive.
    std::optional<double> max_fitness() const noexcept;
    std::optional<double> min_fitness() const noexcept;

    /// B draws of occupied cell ids, uniform with replacement.
    std::vector<std::size_t> sample_cells(std::size_t B, Rng& rng) const;
    std::vector<Genotype> sample_uniform(std::size_t B, Rng& rng) const;

private:
    Tessellation tessellation_;
    std::vector<std::optional<Elite>> cells_;
    std::vector<std::size_t> occupied_ids_;
};

} // namespace qdd
