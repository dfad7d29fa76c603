#pragma once

#include <cstddef>
#include <span>

namespace qdd {

struct WilcoxonResult {
    double w_plus = 0.0;  // rank sum of positive differences b - a
    double w_minus = 0.0;
    std::size_t n_used = 0; // pairs left after dropping zero differences
    double p_value = 1.0;   // one-sided, alternative "b > a"
    bool exact = false;
    bool degenerate = false; // every difference was zero
};

/// Wilcoxon signed-rank test on b - a. Zero differences are dropped, tied
/// magnitudes get mid-ranks. Exact null distribution by enumerating sign
/// assignments for n_used <= 12, otherwise the normal approximation with tie
/// and continuity corrections. Requires equal lengths >= 5.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

double median(std::span<const double> v);

} // namespace qdd
