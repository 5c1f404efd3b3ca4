#include "sgmix/skew_normal.hpp"

#include <cmath>

#include "sgmix/linalg.hpp"
#include "sgmix/normal.hpp"
#include "sgmix/random.hpp"

namespace sgmix {

void SkewNormalParams::validate() const {
    const int d = dim();
    if (d < 1) {
        throw numeric_error("skew-normal parameters must have dimension >= 1");
    }
    if (dispersion.rows() != d || dispersion.cols() != d ||
        skewness.size() != d) {
        throw numeric_error("location, dispersion and skewness disagree on dimension");
    }
    if (!location.allFinite() || !skewness.allFinite()) {
        throw numeric_error("skew-normal parameters have non-finite entries");
    }
    SpdEigen check(dispersion);  // throws when not symmetric positive-definite
}

CanonicalParams reparam_forward(const SkewNormalParams& p) {
    p.validate();
    const double norm2 = p.skewness.squaredNorm();
    CanonicalParams c;
    c.location = p.location;
    c.delta = p.skewness / std::sqrt(1.0 + norm2);
    const SpdEigen sigma(p.dispersion);
    c.xi = sigma.sqrt() * c.delta;
    c.omega = p.dispersion - c.xi * c.xi.transpose();
    c.omega = 0.5 * (c.omega + c.omega.transpose());
    return c;
}

SkewNormalParams reparam_inverse(const CanonicalParams& c) {
    const int d = c.dim();
    if (d < 1 || c.xi.size() != d || c.omega.rows() != d || c.omega.cols() != d) {
        throw numeric_error("canonical parameters disagree on dimension");
    }
    SkewNormalParams p;
    p.location = c.location;
    p.dispersion = c.omega + c.xi * c.xi.transpose();
    p.dispersion = 0.5 * (p.dispersion + p.dispersion.transpose());
    const SpdEigen sigma(p.dispersion);
    const double s = c.xi.dot(sigma.solve(c.xi));
    if (s >= 1.0) {
        throw numeric_error(
            "degenerate skewness: xi' dispersion^{-1} xi >= 1 (collapsing component)");
    }
    p.skewness = (sigma.inv_sqrt() * c.xi) / std::sqrt(1.0 - s);
    return p;
}

double sn_logpdf(const Eigen::VectorXd& y, const SkewNormalParams& p) {
    p.validate();
    if (y.size() != p.dim()) {
        throw input_error("evaluation point has wrong dimension");
    }
    if (!y.allFinite()) {
        throw input_error("evaluation point has non-finite entries");
    }
    const SpdEigen sigma(p.dispersion);
    const Eigen::MatrixXd whitener = sigma.inv_sqrt();
    const Eigen::VectorXd z = y - p.location;
    const double quad = (whitener * z).squaredNorm();
    const double skew_arg = (whitener * p.skewness).dot(z);
    const double log_normal =
        -0.5 * (p.dim() * kLogTwoPi + sigma.log_det() + quad);
    return std::log(2.0) + log_normal + norm_log_cdf(skew_arg);
}

Eigen::MatrixXd sn_sample(const SkewNormalParams& p, std::size_t n,
                          std::uint64_t seed) {
    p.validate();
    if (n < 1) {
        throw input_error("sample size must be >= 1");
    }
    const int d = p.dim();
    const CanonicalParams c = reparam_forward(p);
    const SpdEigen sigma(p.dispersion);
    const Eigen::MatrixXd root = sigma.sqrt();
    Eigen::MatrixXd residual_shape =
        Eigen::MatrixXd::Identity(d, d) - c.delta * c.delta.transpose();
    const Eigen::MatrixXd residual_root = SpdEigen(residual_shape).sqrt();

    RandomStream rng(seed);
    Eigen::MatrixXd out(n, d);
    Eigen::VectorXd v(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = std::abs(rng.normal());
        for (int j = 0; j < d; ++j) v(j) = rng.normal();
        out.row(i) =
            (p.location + root * (c.delta * u + residual_root * v)).transpose();
    }
    return out;
}

TruncMoments trunc_moments(double alpha, double beta) {
    if (!(beta > 0.0) || !std::isfinite(beta) || !std::isfinite(alpha)) {
        throw numeric_error("truncated moments require finite alpha and beta > 0");
    }
    double mean_factor;    // alpha + mills_ratio(alpha)
    double second_factor;  // 1 + alpha * mills_ratio(alpha) + alpha^2
    if (alpha >= kMillsSwitch) {
        const double r = mills_ratio(alpha);
        mean_factor = alpha + r;
        second_factor = 1.0 + alpha * r + alpha * alpha;
    } else {
        // Continued-fraction tails give both factors without the huge
        // cancellations of the direct expressions.
        const double t = -alpha;
        const double c1 = detail::mills_cf_tail(t, 1);
        const double c2 = detail::mills_cf_tail(t, 2);
        mean_factor = c1;
        second_factor = c2 / (t + c2);
    }
    return {mean_factor / beta, second_factor / (beta * beta)};
}

ConditionalSplit conditional_split(const SkewNormalParams& p) {
    p.validate();
    const int d = p.dim();
    if (d < 2) {
        throw numeric_error("conditional split requires dimension >= 2");
    }
    const SpdEigen sigma(p.dispersion);
    const Eigen::VectorXd nu = sigma.inv_sqrt() * p.skewness;

    ConditionalSplit s;
    s.eta1 = p.location(0);
    s.eta2 = p.location.tail(d - 1);
    s.sigma11 = p.dispersion(0, 0);
    s.sigma12 = p.dispersion.block(0, 1, 1, d - 1).transpose();
    s.sigma22 = p.dispersion.block(1, 1, d - 1, d - 1);
    s.nu = nu;

    const SpdEigen sigma22(s.sigma22);
    s.regression = sigma22.solve(s.sigma12);
    s.sigma11_cond = s.sigma11 - s.sigma12.dot(s.regression);
    if (!(s.sigma11_cond > 0.0)) {
        throw numeric_error(
            "conditional dispersion of the first channel is not positive");
    }
    const double nu1 = nu(0);
    const Eigen::VectorXd nu2 = nu.tail(d - 1);
    const double denom = std::sqrt(1.0 + nu1 * s.sigma11_cond * nu1);
    const Eigen::VectorXd inner = s.regression * nu1 + nu2;
    s.tau = sigma22.sqrt() * inner / denom;
    s.skew_arg = inner / denom;  // sigma22^{-1/2} tau, computed exactly
    s.skew_gain = s.sigma11_cond * nu1 / denom;
    s.whitener2 = sigma22.inv_sqrt();
    s.log_norm2 = -0.5 * ((d - 1) * kLogTwoPi + sigma22.log_det());
    return s;
}

double conditional_mean(const Eigen::VectorXd& y2, const ConditionalSplit& s) {
    if (y2.size() != s.eta2.size()) {
        throw input_error("conditioning point has wrong dimension");
    }
    if (!y2.allFinite()) {
        throw input_error("conditioning point has non-finite entries");
    }
    const Eigen::VectorXd z = y2 - s.eta2;
    const double w = s.skew_arg.dot(z);
    return s.eta1 + s.regression.dot(z) + s.skew_gain * mills_ratio(w);
}

double conditional_mean(const Eigen::VectorXd& y2, const SkewNormalParams& p) {
    return conditional_mean(y2, conditional_split(p));
}

double marginal_logpdf(const Eigen::VectorXd& y2, const ConditionalSplit& s) {
    const Eigen::VectorXd z = y2 - s.eta2;
    const double quad = (s.whitener2 * z).squaredNorm();
    return std::log(2.0) + s.log_norm2 - 0.5 * quad +
           norm_log_cdf(s.skew_arg.dot(z));
}

}  // namespace sgmix
