#pragma once

// Planted-truth fixtures shared by the unit and acceptance suites.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sgmix/dataio.hpp"
#include "sgmix/mixture.hpp"

namespace fixtures {

/// Deterministic draw of n rows from a mixture (labels from the weights,
/// rows from the matching component).
Eigen::MatrixXd sample_mixture(const sgmix::MixtureModel& m, std::size_t n,
                               std::uint64_t seed,
                               std::vector<int>* labels_out = nullptr);

/// Four-subclass truth with two CT regimes (two non-bone subclasses below
/// the 150 HU split, two bone subclasses above). The bone subclasses
/// relate MR to CT non-monotonically, so one global low-K model predicts
/// bone poorly while per-partition models do well; one MR channel still
/// separates the regimes cleanly enough for stage-1 routing.
sgmix::MixtureModel two_regime_truth();

/// Synthetic patient cohort drawn from two_regime_truth().
std::vector<sgmix::VoxelTable> two_regime_cohort(int heads, std::size_t rows_per_head,
                                                 std::uint64_t base_seed);

}  // namespace fixtures
