#include "qdd/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace qdd::kernels {

#if !defined(QDD_HAVE_AVX2)
const KernelTable* avx2_table() noexcept { return nullptr; }
#endif

bool cpu_has_avx2() noexcept {
#if defined(QDD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

bool available(Backend b) noexcept {
    return b == Backend::scalar || (avx2_table() != nullptr && cpu_has_avx2());
}

Backend initial_backend() noexcept {
    const char* env = std::getenv("QD_DISCRETE_SIMD");
    const std::string_view req = env ? env : "auto";
    if (req == "scalar")
        return Backend::scalar;
    return available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() noexcept {
    static std::atomic<Backend> b{initial_backend()};
    return b;
}

} // namespace

Backend active_backend() noexcept { return current().load(std::memory_order_relaxed); }

bool set_backend(Backend b) noexcept {
    if (!available(b))
        return false;
    current().store(b, std::memory_order_relaxed);
    return true;
}

std::string_view backend_name(Backend b) noexcept {
    switch (b) {
    case Backend::avx2: return "avx2";
    case Backend::scalar: return "scalar";
    }
    return "unknown";
}

const KernelTable& active() noexcept {
    return active_backend() == Backend::avx2 ? *avx2_table() : scalar_table();
}

} // namespace qdd::kernels
