#pragma once

#include <Eigen/Dense>

#include "sgmix/error.hpp"

namespace sgmix {

/// Relative floor for acceptable eigenvalues of a dispersion matrix.
inline constexpr double kSpdRelTol = 1e-10;

inline bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol = 1e-12) {
    const double scale = m.cwiseAbs().maxCoeff();
    if (scale == 0.0) return true;
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// Cached eigendecomposition of a symmetric positive-definite matrix.
/// All derived matrices (square root, inverse square root, inverse) come
/// from the one decomposition so they are mutually consistent.
class SpdEigen {
public:
    /// Validates symmetry and positive-definiteness. With regularize=true,
    /// eigenvalues below kSpdRelTol * max are clamped up instead of
    /// rejected.
    explicit SpdEigen(const Eigen::MatrixXd& m, bool regularize = false) {
        if (m.rows() != m.cols() || m.rows() < 1) {
            throw numeric_error("dispersion matrix must be square and non-empty");
        }
        if (!m.allFinite()) {
            throw numeric_error("dispersion matrix has non-finite entries");
        }
        if (!is_symmetric(m)) {
            throw numeric_error("dispersion matrix is not symmetric");
        }
        const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
        if (es.info() != Eigen::Success) {
            throw numeric_error("eigendecomposition of dispersion matrix failed");
        }
        values_ = es.eigenvalues();
        vectors_ = es.eigenvectors();
        const double vmax = values_.maxCoeff();
        const double floor = kSpdRelTol * vmax;
        if (vmax <= 0.0 || values_.minCoeff() < floor) {
            if (!regularize) {
                throw numeric_error(
                    "dispersion matrix is not positive-definite within tolerance");
            }
            if (vmax <= 0.0) {
                throw numeric_error("dispersion matrix has no positive eigenvalue");
            }
            values_ = values_.cwiseMax(floor);
        }
    }

    int dim() const { return static_cast<int>(values_.size()); }
    const Eigen::VectorXd& eigenvalues() const { return values_; }

    /// Unique symmetric SPD square root.
    Eigen::MatrixXd sqrt() const { return apply([](double v) { return std::sqrt(v); }); }

    Eigen::MatrixXd inv_sqrt() const {
        return apply([](double v) { return 1.0 / std::sqrt(v); });
    }

    Eigen::MatrixXd inverse() const { return apply([](double v) { return 1.0 / v; }); }

    Eigen::MatrixXd matrix() const { return apply([](double v) { return v; }); }

    double log_det() const { return values_.array().log().sum(); }

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        return vectors_ * (vectors_.transpose() * b).cwiseQuotient(values_);
    }

private:
    template <class F>
    Eigen::MatrixXd apply(F f) const {
        Eigen::VectorXd t = values_.unaryExpr(f);
        return vectors_ * t.asDiagonal() * vectors_.transpose();
    }

    Eigen::VectorXd values_;
    Eigen::MatrixXd vectors_;
};

}  // namespace sgmix
