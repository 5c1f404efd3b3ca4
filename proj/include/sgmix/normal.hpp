#pragma once

#include <cmath>
#include <limits>

namespace sgmix {

inline constexpr double kLogTwoPi = 1.8378770664093454836;
inline constexpr double kSqrtHalf = 0.70710678118654752440;

/// Standard normal density.
inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x - 0.5 * kLogTwoPi);
}

inline double norm_log_pdf(double x) {
    return -0.5 * x * x - 0.5 * kLogTwoPi;
}

/// Standard normal distribution function, accurate in both tails.
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * kSqrtHalf);
}

namespace detail {

// Laplace continued fraction for the Mills ratio phi(x)/Phi(x) at x = -t,
// t > 0. The ratio equals t + 1/(t + 2/(t + 3/(t + ...))); `level` selects
// the tail starting at numerator `level`, so level=1 yields the full
// correction 1/(t + 2/(t + ...)) and level=2 yields 2/(t + 3/(t + ...)).
// Converges quickly for t >= 8.
inline double mills_cf_tail(double t, int level) {
    double tail = 0.0;
    for (int k = level + 48; k >= level; --k) {
        tail = static_cast<double>(k) / (t + tail);
    }
    return tail;
}

}  // namespace detail

// Below this point the erfc-based CDF is too close to underflow for a
// stable ratio; the continued fraction takes over.
inline constexpr double kMillsSwitch = -8.0;

/// Mills ratio phi(x)/Phi(x). Stable for arbitrarily negative x, where the
/// ratio grows like |x|.
inline double mills_ratio(double x) {
    if (x >= kMillsSwitch) {
        return norm_pdf(x) / norm_cdf(x);
    }
    const double t = -x;
    return t + detail::mills_cf_tail(t, 1);
}

/// log Phi(x), finite for all finite x (never exp-then-log in the far tail).
inline double norm_log_cdf(double x) {
    if (x >= kMillsSwitch) {
        return std::log(norm_cdf(x));
    }
    return norm_log_pdf(x) - std::log(mills_ratio(x));
}

/// log(sum_i exp(v_i)) over a small contiguous range.
inline double log_sum_exp(const double* v, int n) {
    double m = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        if (v[i] > m) m = v[i];
    }
    if (!std::isfinite(m)) return m;  // all -inf (or a NaN poisoned the max)
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        s += std::exp(v[i] - m);
    }
    return m + std::log(s);
}

}  // namespace sgmix
