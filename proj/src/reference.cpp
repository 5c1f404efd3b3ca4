#include "sgmix/reference.hpp"

#include <cmath>
#include <vector>

#include "sgmix/linalg.hpp"
#include "sgmix/normal.hpp"
#include "sgmix/predictor.hpp"

namespace sgmix::reference {

namespace {

double component_logpdf(const Eigen::VectorXd& y, const SkewNormalParams& p) {
    const SpdEigen sigma(p.dispersion);
    const Eigen::MatrixXd w = sigma.inv_sqrt();
    const Eigen::VectorXd z = y - p.location;
    return std::log(2.0) -
           0.5 * (p.dim() * kLogTwoPi + sigma.log_det() + (w * z).squaredNorm()) +
           norm_log_cdf((w * p.skewness).dot(z));
}

}  // namespace

EStepQuantities e_step(const Eigen::MatrixXd& data, const MixtureModel& m) {
    m.validate();
    const int K = m.num_components();
    const int d = m.dim();
    const auto n = data.rows();
    const bool skew = m.variant == Variant::skew;

    std::vector<CanonicalParams> canon(K);
    std::vector<Eigen::VectorXd> omega_inv_xi(K);
    std::vector<double> beta(K, 1.0);
    for (int k = 0; k < K; ++k) {
        canon[k] = reparam_forward(m.components[k]);
        omega_inv_xi[k] = SpdEigen(canon[k].omega).solve(canon[k].xi);
        beta[k] = std::sqrt(1.0 + canon[k].xi.dot(omega_inv_xi[k]));
    }

    EStepQuantities q;
    q.resp.resize(n, K);
    q.resp_u.setZero(n, K);
    q.resp_u2.setZero(n, K);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd y = data.row(i).transpose();
        Eigen::VectorXd logp(K);
        for (int k = 0; k < K; ++k) {
            logp(k) = std::log(m.weights[k]) + component_logpdf(y, m.components[k]);
        }
        const double lse = log_sum_exp(logp.data(), K);
        if (std::isfinite(lse)) {
            for (int k = 0; k < K; ++k) q.resp(i, k) = std::exp(logp(k) - lse);
        } else {
            int nearest = 0;
            double best = (y - m.components[0].location).squaredNorm();
            for (int k = 1; k < K; ++k) {
                const double cur = (y - m.components[k].location).squaredNorm();
                if (cur < best) {
                    best = cur;
                    nearest = k;
                }
            }
            q.resp.row(i).setZero();
            q.resp(i, nearest) = 1.0;
            ++q.degenerate_count;
        }
        q.loglik += lse;
        if (skew) {
            for (int k = 0; k < K; ++k) {
                const double alpha =
                    omega_inv_xi[k].dot(y - m.components[k].location) / beta[k];
                const TruncMoments tm = trunc_moments(alpha, beta[k]);
                q.resp_u(i, k) = q.resp(i, k) * tm.mean;
                q.resp_u2(i, k) = q.resp(i, k) * tm.second_moment;
            }
        }
    }
    (void)d;
    return q;
}

MixtureModel m_step(const Eigen::MatrixXd& data, const EStepQuantities& q,
                    const MixtureModel& current, double ridge,
                    bool update_skewness) {
    const int K = current.num_components();
    const int d = current.dim();
    const auto n = data.rows();
    const bool skew = current.variant == Variant::skew && update_skewness;

    MixtureModel out;
    out.variant = current.variant;
    out.weights.resize(K);
    out.components.resize(K);
    for (int k = 0; k < K; ++k) {
        double w = 0.0, u1 = 0.0, u2 = 0.0;
        Eigen::VectorXd wy = Eigen::VectorXd::Zero(d);
        Eigen::VectorXd u1y = Eigen::VectorXd::Zero(d);
        for (Eigen::Index i = 0; i < n; ++i) {
            w += q.resp(i, k);
            u1 += q.resp_u(i, k);
            u2 += q.resp_u2(i, k);
            wy += q.resp(i, k) * data.row(i).transpose();
            u1y += q.resp_u(i, k) * data.row(i).transpose();
        }
        const Eigen::VectorXd xi_old =
            skew ? reparam_forward(current.components[k]).xi
                 : Eigen::VectorXd::Zero(d).eval();
        const Eigen::VectorXd eta = (wy - u1 * xi_old) / w;
        Eigen::VectorXd xi = Eigen::VectorXd::Zero(d);
        if (skew && u2 > 0.0) {
            xi = (u1y - u1 * eta) / u2;
        }
        Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(d, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd z = data.row(i).transpose() - eta;
            omega += q.resp(i, k) * z * z.transpose() -
                     q.resp_u(i, k) * (z * xi.transpose() + xi * z.transpose()) +
                     q.resp_u2(i, k) * xi * xi.transpose();
        }
        omega /= w;
        omega = 0.5 * (omega + omega.transpose());
        omega += (ridge * omega.trace() / d) * Eigen::MatrixXd::Identity(d, d);

        out.weights[k] = w / static_cast<double>(n);
        CanonicalParams canon;
        canon.location = eta;
        canon.xi = xi;
        canon.omega = omega;
        canon.delta = Eigen::VectorXd::Zero(d);
        out.components[k] = reparam_inverse(canon);
    }
    double total = 0.0;
    for (double v : out.weights) total += v;
    for (double& v : out.weights) v /= total;
    return out;
}

double loglik(const Eigen::MatrixXd& data, const MixtureModel& m) {
    m.validate();
    const int K = m.num_components();
    double total = 0.0;
    Eigen::VectorXd logp(K);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const Eigen::VectorXd y = data.row(i).transpose();
        for (int k = 0; k < K; ++k) {
            logp(k) = std::log(m.weights[k]) + component_logpdf(y, m.components[k]);
        }
        total += log_sum_exp(logp.data(), K);
    }
    return total;
}

Eigen::VectorXd predict_volume(const Eigen::MatrixXd& mr, const MixtureModel& m) {
    Eigen::VectorXd out(mr.rows());
    for (Eigen::Index i = 0; i < mr.rows(); ++i) {
        out(i) = predict_point(mr.row(i).transpose(), m);
    }
    return out;
}

}  // namespace sgmix::reference
