#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "sgmix/error.hpp"

namespace sgmix {

/// Parameters of a d-dimensional skew-normal distribution with density
///   f(y) = 2 N(y | location, dispersion)
///            * Phi(skewness' dispersion^{-1/2} (y - location)),
/// where dispersion^{-1/2} is the symmetric SPD inverse square root.
struct SkewNormalParams {
    Eigen::VectorXd location;    ///< channel units (HU, MR intensity)
    Eigen::MatrixXd dispersion;  ///< d x d symmetric positive-definite
    Eigen::VectorXd skewness;    ///< dimensionless

    int dim() const { return static_cast<int>(location.size()); }

    /// Checks dimensions, finiteness and positive-definiteness; throws
    /// numeric_error on violation.
    void validate() const;
};

/// Hierarchical reparameterization of the same distribution:
///   Y = location + xi * |U| + W,  U ~ N(0,1),  W ~ N(0, omega),
/// with xi = dispersion^{1/2} delta, omega = dispersion - xi xi', and
/// delta = skewness / sqrt(1 + skewness' skewness), so ||delta|| < 1 and
/// omega + xi xi' reconstructs the dispersion.
struct CanonicalParams {
    Eigen::VectorXd location;
    Eigen::VectorXd xi;
    Eigen::MatrixXd omega;
    Eigen::VectorXd delta;

    int dim() const { return static_cast<int>(location.size()); }
};

/// First and second moments of a normal with mean alpha/beta and standard
/// deviation 1/beta truncated to (0, inf).
struct TruncMoments {
    double mean;
    double second_moment;
};

/// Blocks of a skew-normal split as (first channel | remaining channels),
/// plus the derived quantities needed for the conditional closed forms.
struct ConditionalSplit {
    double eta1;              ///< location of the dependent channel
    Eigen::VectorXd eta2;     ///< locations of the conditioning channels
    double sigma11;
    Eigen::VectorXd sigma12;  ///< cross-dispersion row as a vector
    Eigen::MatrixXd sigma22;
    Eigen::VectorXd nu;       ///< dispersion^{-1/2} skewness, full d-vector
    Eigen::VectorXd tau;      ///< skewness of the marginal over channels 2..d

    // Cached pieces so conditional evaluations are O(d) per point.
    double sigma11_cond;          ///< sigma11 - sigma12' sigma22^{-1} sigma12
    Eigen::VectorXd regression;   ///< sigma22^{-1} sigma12
    Eigen::VectorXd skew_arg;     ///< sigma22^{-1/2} tau
    double skew_gain;             ///< sigma11_cond nu1 / sqrt(1 + nu1 sigma11_cond nu1)
    Eigen::MatrixXd whitener2;    ///< sigma22^{-1/2}
    double log_norm2;             ///< normal log-density constant of sigma22
};

/// (location, dispersion, skewness) -> (location, xi, omega, delta).
CanonicalParams reparam_forward(const SkewNormalParams& p);

/// Inverse of reparam_forward: dispersion = omega + xi xi' and
/// skewness = dispersion^{-1/2} xi / sqrt(1 - xi' dispersion^{-1} xi).
/// Throws numeric_error when xi' dispersion^{-1} xi reaches 1 (collapsing
/// component).
SkewNormalParams reparam_inverse(const CanonicalParams& c);

/// Log density; finite for every finite y.
double sn_logpdf(const Eigen::VectorXd& y, const SkewNormalParams& p);

/// n deterministic draws (rows) for the given seed.
Eigen::MatrixXd sn_sample(const SkewNormalParams& p, std::size_t n,
                          std::uint64_t seed);

/// Moments of the positive-truncated normal N(alpha/beta, 1/beta^2); the
/// Mills ratio is evaluated by a guarded routine so alpha may be
/// arbitrarily negative. Requires beta > 0.
TruncMoments trunc_moments(double alpha, double beta);

/// Splits p as (channel 1 | channels 2..d); requires d >= 2.
ConditionalSplit conditional_split(const SkewNormalParams& p);

/// E[Y_1 | Y_2 = y2] in closed form.
double conditional_mean(const Eigen::VectorXd& y2, const ConditionalSplit& s);
double conditional_mean(const Eigen::VectorXd& y2, const SkewNormalParams& p);

/// Log density of the marginal skew-normal over channels 2..d implied by
/// the split: SN(eta2, sigma22, tau).
double marginal_logpdf(const Eigen::VectorXd& y2, const ConditionalSplit& s);

}  // namespace sgmix
