#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "sgmix/dataio.hpp"
#include "sgmix/predictor.hpp"

namespace sgmix {

/// Non-overlapping 20 HU (by default) windows over the true CT scale,
/// anchored at -1024 HU; empty windows are omitted.
struct ResidualWindow {
    double window_lo = 0.0;
    double window_center = 0.0;
    double mean_truth = 0.0;
    double mean_residual = 0.0;      ///< mean (pred - truth)
    double mean_abs_residual = 0.0;  ///< mean |pred - truth|
    std::size_t count = 0;
};

struct BlandAltmanResult {
    std::vector<std::pair<double, double>> pairs;  ///< (average, difference)
    double bias = 0.0;        ///< mean difference
    double sd = 0.0;          ///< sample standard deviation of differences
    double limit_low = 0.0;   ///< bias - 1.96 sd
    double limit_high = 0.0;  ///< bias + 1.96 sd
};

struct RankTestResult {
    double statistic = 0.0;  ///< W+, sum of positive-difference ranks
    double p_value = 1.0;    ///< one-sided: small when differences favor the left
    int n_effective = 0;     ///< differences remaining after zero removal
};

/// Region metrics for one validation fold. Region membership is decided by
/// the TRUE CT value; a region with count 0 carries a NaN metric and is
/// omitted from the CSV.
struct EvalReport {
    std::string fold_id;
    double mae_nonbone = 0.0;
    double mae_bone = 0.0;
    double mae_dense_bone = 0.0;
    double mae_overall = 0.0;
    std::size_t n_nonbone = 0;
    std::size_t n_bone = 0;
    std::size_t n_dense_bone = 0;
    std::size_t n = 0;
    double psnr = 0.0;
    std::vector<ResidualWindow> residual_curve;
    BlandAltmanResult bland_altman;
};

/// Mean absolute residual over voxels whose truth lies in `region`.
/// Throws input_error when the region is empty.
double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth,
           const HuInterval& region);

/// 10 log10(n M^2 / sum (pred-truth)^2) with M = max truth intensity;
/// +infinity when pred equals truth exactly.
double psnr(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

std::vector<ResidualWindow> smoothed_residuals(const Eigen::VectorXd& pred,
                                               const Eigen::VectorXd& truth,
                                               double window = 20.0);

BlandAltmanResult bland_altman(const Eigen::VectorXd& pred,
                               const Eigen::VectorXd& truth);

/// One-sided Wilcoxon signed-rank test. Zero differences are dropped, tied
/// absolute values share average ranks. The p-value is P(W+ <= observed)
/// under the null: exact enumeration of all sign patterns for up to 20
/// effective differences, normal approximation with continuity correction
/// above. Throws when every difference is zero.
RankTestResult wilcoxon_one_sided(const std::vector<double>& diffs);

/// Builds the full region report; the dense-bone region is truth > 900 HU.
EvalReport evaluate_report(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth,
                           const PartitionSpec& spec, const std::string& fold_id);

struct LoocvConfig {
    PartitionSpec spec;
    FitConfig cfg_full;
    FitConfig cfg_part;
    bool partitioned = true;  ///< false: single full-data model per fold
};

/// Hold each table out in turn, train on the concatenated rest, predict its
/// CT from MR and evaluate against its true CT. Errors are annotated with
/// the fold id.
std::vector<EvalReport> loocv(const std::vector<VoxelTable>& tables,
                              const LoocvConfig& cfg);

void write_report_csv(const std::filesystem::path& path, const EvalReport& r);
void write_residuals_csv(const std::filesystem::path& path, const EvalReport& r);
void write_bland_altman_csv(const std::filesystem::path& path, const EvalReport& r);

}  // namespace sgmix
