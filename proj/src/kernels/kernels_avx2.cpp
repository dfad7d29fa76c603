// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "qdd/kernels/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

namespace qdd::kernels {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// 2^n for integral n in [-1022, 1023] held in a double lane.
inline __m256d pow2_int(__m256d n) {
    const __m256d magic = _mm256_set1_pd(6755399441055744.0); // 2^52 + 2^51
    const __m256i bits = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)),
                                          _mm256_castpd_si256(magic));
    const __m256i biased = _mm256_add_epi64(bits, _mm256_set1_epi64x(1023));
    return _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
}

// exp(x) to a few ulp: range reduction by ln2, degree-13 Taylor polynomial
// on |r| <= ln2/2, and a split 2^n scale so subnormal results stay exact
// enough. Inputs below -745.2 flush to zero.
inline __m256d exp_pd(__m256d x) {
    const __m256d lo_cut = _mm256_set1_pd(-745.2);
    const __m256d underflow = _mm256_cmp_pd(x, lo_cut, _CMP_LT_OQ);
    x = _mm256_max_pd(x, lo_cut);
    x = _mm256_min_pd(x, _mm256_set1_pd(709.78));

    const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
    const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
    const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
    r = _mm256_fnmadd_pd(n, ln2_lo, r);

    // Horner on 1/k! coefficients, highest degree first.
    static constexpr double c[] = {
        1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
        1.0 / 40320.0,      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,
        1.0 / 6.0,          0.5,               1.0,              1.0,
    };
    __m256d p = _mm256_set1_pd(c[0]);
    for (int i = 1; i < 14; ++i)
        p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(c[i]));

    const __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)));
    const __m256d n2 = _mm256_sub_pd(n, n1);
    p = _mm256_mul_pd(_mm256_mul_pd(p, pow2_int(n1)), pow2_int(n2));
    return _mm256_andnot_pd(underflow, p);
}

SoftmaxMoments softmax_moments_avx2(std::span<const double> z, double shift, double beta) {
    const std::size_t n = z.size();
    const __m256d vshift = _mm256_set1_pd(shift);
    const __m256d vbeta = _mm256_set1_pd(beta);
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd(), a2 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d u = _mm256_sub_pd(_mm256_loadu_pd(z.data() + i), vshift);
        const __m256d w = exp_pd(_mm256_mul_pd(vbeta, u));
        const __m256d wu = _mm256_mul_pd(w, u);
        a0 = _mm256_add_pd(a0, w);
        a1 = _mm256_add_pd(a1, wu);
        a2 = _mm256_fmadd_pd(wu, u, a2);
    }
    SoftmaxMoments m{hsum(a0), hsum(a1), hsum(a2)};
    for (; i < n; ++i) {
        const double u = z[i] - shift;
        const double w = std::exp(beta * u);
        m.s0 += w;
        m.s1 += w * u;
        m.s2 += w * u * u;
    }
    return m;
}

double exp_shifted_avx2(std::span<const double> z, double shift, double beta, std::span<double> out) {
    const std::size_t n = z.size();
    const __m256d vshift = _mm256_set1_pd(shift);
    const __m256d vbeta = _mm256_set1_pd(beta);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d w = exp_pd(_mm256_mul_pd(vbeta, _mm256_sub_pd(_mm256_loadu_pd(z.data() + i), vshift)));
        _mm256_storeu_pd(out.data() + i, w);
        acc = _mm256_add_pd(acc, w);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) {
        out[i] = std::exp(beta * (z[i] - shift));
        sum += out[i];
    }
    return sum;
}

// Distances use mul/add only (no FMA) so each lane rounds exactly like the
// scalar loop; cell assignment is therefore identical across backends.
std::size_t nearest_centroid_avx2(const CentroidView& c, std::span<const double> point) {
    __m256d best_d = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    __m256d best_i = _mm256_setzero_pd();
    __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
    const __m256d four = _mm256_set1_pd(4.0);
    for (std::size_t j = 0; j < c.count; j += 4) {
        __m256d dist = _mm256_setzero_pd();
        for (std::size_t k = 0; k < c.dims; ++k) {
            const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(point[k]), _mm256_loadu_pd(c.data + k * c.stride + j));
            dist = _mm256_add_pd(dist, _mm256_mul_pd(diff, diff));
        }
        const __m256d better = _mm256_cmp_pd(dist, best_d, _CMP_LT_OQ);
        best_d = _mm256_blendv_pd(best_d, dist, better);
        best_i = _mm256_blendv_pd(best_i, idx, better);
        idx = _mm256_add_pd(idx, four);
    }
    alignas(32) double d[4];
    alignas(32) double ix[4];
    _mm256_store_pd(d, best_d);
    _mm256_store_pd(ix, best_i);
    std::size_t best = static_cast<std::size_t>(ix[0]);
    double bd = d[0];
    for (int l = 1; l < 4; ++l) {
        const auto li = static_cast<std::size_t>(ix[l]);
        if (d[l] < bd || (d[l] == bd && li < best)) {
            bd = d[l];
            best = li;
        }
    }
    return best;
}

double dot_avx2(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i)
        s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, std::span<const double> x, std::span<double> y) {
    const std::size_t n = x.size();
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y.data() + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i)));
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

double sum_squares_avx2(std::span<const double> x) { return dot_avx2(x, x); }

constexpr KernelTable kAvx2{
    softmax_moments_avx2, exp_shifted_avx2, nearest_centroid_avx2,
    dot_avx2,             axpy_avx2,        sum_squares_avx2,
};

} // namespace

const KernelTable* avx2_table() noexcept { return &kAvx2; }

} // namespace qdd::kernels
