#pragma once

#include <Eigen/Dense>

#include "sgmix/mixture.hpp"

namespace sgmix::reference {

// Straight-line serial implementations of the data-parallel kernels.
// They accumulate in natural row order with no chunking and exist to
// check and benchmark the OpenMP versions; fitting never calls them.

EStepQuantities e_step(const Eigen::MatrixXd& data, const MixtureModel& m);

MixtureModel m_step(const Eigen::MatrixXd& data, const EStepQuantities& q,
                    const MixtureModel& current, double ridge = 1e-6,
                    bool update_skewness = true);

double loglik(const Eigen::MatrixXd& data, const MixtureModel& m);

Eigen::VectorXd predict_volume(const Eigen::MatrixXd& mr, const MixtureModel& m);

}  // namespace sgmix::reference
