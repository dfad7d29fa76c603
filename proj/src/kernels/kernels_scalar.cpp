#include "qdd/kernels/kernels.hpp"

#include <cmath>
#include <limits>

namespace qdd::kernels {
namespace {

SoftmaxMoments softmax_moments_scalar(std::span<const double> z, double shift, double beta) {
    SoftmaxMoments m;
    for (double v : z) {
        const double u = v - shift;
        const double w = std::exp(beta * u);
        m.s0 += w;
        m.s1 += w * u;
        m.s2 += w * u * u;
    }
    return m;
}

double exp_shifted_scalar(std::span<const double> z, double shift, double beta, std::span<double> out) {
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(beta * (z[i] - shift));
        sum += out[i];
    }
    return sum;
}

std::size_t nearest_centroid_scalar(const CentroidView& c, std::span<const double> point) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c.count; ++j) {
        double dist = 0.0;
        for (std::size_t k = 0; k < c.dims; ++k) {
            const double diff = point[k] - c.data[k * c.stride + j];
            dist += diff * diff;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = j;
        }
    }
    return best;
}

double dot_scalar(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += alpha * x[i];
}

double sum_squares_scalar(std::span<const double> x) {
    double s = 0.0;
    for (double v : x)
        s += v * v;
    return s;
}

constexpr KernelTable kScalar{
    softmax_moments_scalar, exp_shifted_scalar, nearest_centroid_scalar,
    dot_scalar,             axpy_scalar,        sum_squares_scalar,
};

} // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

} // namespace qdd::kernels
