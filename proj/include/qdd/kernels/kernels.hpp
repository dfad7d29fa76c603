#pragma once

// Data-parallel inner loops shared by the emitters, the archive and the
// benchmarks. Every kernel has a scalar reference implementation; an AVX2
// variant is selected at runtime when the CPU supports it. The two agree to
// rounding (see tests/test_kernels.cpp), not bitwise.

#include <cstddef>
#include <span>
#include <string_view>

namespace qdd::kernels {

enum class Backend { scalar, avx2 };

/// Weighted moments of a tempered softmax over logits z:
///   s0 = sum exp(beta * (z - shift)),
///   s1 = sum exp(beta * (z - shift)) * (z - shift),
///   s2 = sum exp(beta * (z - shift)) * (z - shift)^2.
/// `shift` is normally max(z) so that every exponent is <= 0.
struct SoftmaxMoments {
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
};

/// Centroids stored dimension-major (d rows of `stride` doubles, padded with
/// +inf beyond `count`) so the vector path can score four cells at once.
struct CentroidView {
    const double* data = nullptr;
    std::size_t count = 0;
    std::size_t dims = 0;
    std::size_t stride = 0;
};

struct KernelTable {
    SoftmaxMoments (*softmax_moments)(std::span<const double> z, double shift, double beta);
    double (*exp_shifted)(std::span<const double> z, double shift, double beta, std::span<double> out);
    std::size_t (*nearest_centroid)(const CentroidView& centroids, std::span<const double> point);
    double (*dot)(std::span<const double> a, std::span<const double> b);
    void (*axpy)(double alpha, std::span<const double> x, std::span<double> y);
    double (*sum_squares)(std::span<const double> x);
};

const KernelTable& scalar_table() noexcept;
/// Null when the binary was built without AVX2 support for this target.
const KernelTable* avx2_table() noexcept;

bool cpu_has_avx2() noexcept;

/// Currently dispatched backend. Initialised from QD_DISCRETE_SIMD
/// ("scalar", "avx2" or "auto", default auto).
Backend active_backend() noexcept;
/// Returns false (and leaves the backend unchanged) if `b` is unavailable.
bool set_backend(Backend b) noexcept;
std::string_view backend_name(Backend b) noexcept;

const KernelTable& active() noexcept;

inline SoftmaxMoments softmax_moments(std::span<const double> z, double shift, double beta) {
    return active().softmax_moments(z, shift, beta);
}
/// Writes exp(beta * (z - shift)) into out and returns their sum.
inline double exp_shifted(std::span<const double> z, double shift, double beta, std::span<double> out) {
    return active().exp_shifted(z, shift, beta, out);
}
/// Index of the closest centroid (squared Euclidean), lowest index on ties.
inline std::size_t nearest_centroid(const CentroidView& c, std::span<const double> point) {
    return active().nearest_centroid(c, point);
}
inline double dot(std::span<const double> a, std::span<const double> b) { return active().dot(a, b); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) { active().axpy(alpha, x, y); }
inline double sum_squares(std::span<const double> x) { return active().sum_squares(x); }

} // namespace qdd::kernels
