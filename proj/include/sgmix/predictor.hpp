#pragma once

#include <Eigen/Dense>

#include "sgmix/dataio.hpp"
#include "sgmix/mixture.hpp"

namespace sgmix {

/// Training intervals for the two major tissue types plus the HU threshold
/// that routes voxels between the partition models at prediction time. The
/// training intervals deliberately overlap; the threshold must lie in the
/// closed hull of the overlap.
struct PartitionSpec {
    HuInterval train_nonbone{-1024.0, 200.0, false, false};
    HuInterval train_bone{100.0, 3071.0, false, true};
    double predict_threshold = 100.0;

    void validate() const;
};

/// The three fitted models of the partition pipeline.
struct PartitionedModel {
    MixtureModel full;
    MixtureModel nonbone;
    MixtureModel bone;
    PartitionSpec spec;

    void validate() const;
};

/// E[CT | MR = y2] under the mixture: component conditional means weighted
/// by Bayes posteriors over the marginal skew-normal of the MR channels.
double predict_point(const Eigen::VectorXd& y2, const MixtureModel& m);

/// Elementwise predict_point over rows; parallel with thread-count
/// independent results.
Eigen::VectorXd predict_volume(const Eigen::MatrixXd& mr, const MixtureModel& m);

/// Fits the full-data model plus one model per tissue partition. Overlap
/// voxels train both partition models.
PartitionedModel train_partitioned(const VoxelTable& train, const PartitionSpec& spec,
                                   const FitConfig& cfg_full,
                                   const FitConfig& cfg_part);

/// Stage 1 predicts every voxel with the full model; stage 2 re-predicts
/// with the non-bone model where the stage-1 value is <= the threshold and
/// with the bone model elsewhere.
Eigen::VectorXd predict_partitioned(const Eigen::MatrixXd& mr,
                                    const PartitionedModel& pm);

/// Restart-selection scorer: mean squared CT prediction error on a held-out
/// table (CT in column 0 of `holdout`). Lower is better.
ModelScorer mse_selector(const Eigen::MatrixXd& holdout);

}  // namespace sgmix
