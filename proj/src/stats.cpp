#include "qdd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "qdd/error.hpp"

namespace qdd {

double median(std::span<const double> v) {
    if (v.empty())
        throw DomainError("median of an empty sample");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DomainError("wilcoxon: samples differ in length");
    if (a.size() < 5)
        throw DomainError("wilcoxon: need at least 5 pairs");

    std::vector<double> diff;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double dv = b[i] - a[i];
        if (dv != 0.0)
            diff.push_back(dv);
    }
    WilcoxonResult r;
    r.n_used = diff.size();
    if (diff.empty()) {
        r.degenerate = true;
        return r;
    }

    // Mid-ranks of |diff|, kept as doubled integers so sums stay exact.
    const std::size_t n = diff.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return std::abs(diff[x]) < std::abs(diff[y]); });
    std::vector<long> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && std::abs(diff[order[j]]) == std::abs(diff[order[i]]))
            ++j;
        const long doubled = static_cast<long>(i + 1 + j); // 2 * mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t)
            rank2[order[t]] = doubled;
        const double size = static_cast<double>(j - i);
        tie_term += size * size * size - size;
        i = j;
    }
    long w2_plus = 0, total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (diff[i] > 0.0)
            w2_plus += rank2[i];
    }
    r.w_plus = 0.5 * static_cast<double>(w2_plus);
    r.w_minus = 0.5 * static_cast<double>(total2 - w2_plus);

    if (n <= 12) {
        // Null distribution of 2 W+ by dynamic programming over the ranks.
        std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
        count[0] = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            for (long s = total2; s >= rank2[i]; --s)
                count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - rank2[i])];
        double tail = 0.0;
        for (long s = w2_plus; s <= total2; ++s)
            tail += count[static_cast<std::size_t>(s)];
        r.p_value = tail / std::ldexp(1.0, static_cast<int>(n));
        r.exact = true;
        return r;
    }

    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) {
        r.p_value = r.w_plus > mean ? 0.0 : 1.0;
        return r;
    }
    const double z = (r.w_plus - mean - 0.5) / std::sqrt(var);
    r.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
    return r;
}

} // namespace qdd
