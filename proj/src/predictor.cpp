#include "sgmix/predictor.hpp"

#include <cmath>
#include <vector>

#include "sgmix/normal.hpp"
#include "sgmix/parallel.hpp"

namespace sgmix {

namespace {

// Per-component conditional machinery shared by the point and volume paths,
// so a batch of one matches predict_point bit for bit.
struct PreparedPredictor {
    std::vector<ConditionalSplit> splits;
    std::vector<double> log_weights;

    explicit PreparedPredictor(const MixtureModel& m) {
        m.validate();
        if (m.dim() < 2) {
            throw numeric_error("prediction requires dimension >= 2");
        }
        const int K = m.num_components();
        splits.reserve(K);
        log_weights.reserve(K);
        for (int k = 0; k < K; ++k) {
            splits.push_back(conditional_split(m.components[k]));
            log_weights.push_back(std::log(m.weights[k]));
        }
    }

    int conditioning_dim() const {
        return static_cast<int>(splits.front().eta2.size());
    }

    double predict(const Eigen::VectorXd& y2, Eigen::VectorXd& logw_buf) const {
        const int K = static_cast<int>(splits.size());
        for (int k = 0; k < K; ++k) {
            logw_buf(k) = log_weights[k] + marginal_logpdf(y2, splits[k]);
        }
        const double lse = log_sum_exp(logw_buf.data(), K);
        double value = 0.0;
        if (std::isfinite(lse)) {
            for (int k = 0; k < K; ++k) {
                value += std::exp(logw_buf(k) - lse) * conditional_mean(y2, splits[k]);
            }
        } else {
            // All marginals underflowed; fall back to the component whose
            // conditioning location is nearest.
            int nearest = 0;
            double best = (y2 - splits[0].eta2).squaredNorm();
            for (int k = 1; k < K; ++k) {
                const double cur = (y2 - splits[k].eta2).squaredNorm();
                if (cur < best) {
                    best = cur;
                    nearest = k;
                }
            }
            value = conditional_mean(y2, splits[nearest]);
        }
        return value;
    }
};

void check_mr(const Eigen::MatrixXd& mr, int want_cols) {
    if (mr.cols() != want_cols) {
        throw input_error("MR matrix has wrong number of channels");
    }
    if (!mr.allFinite()) {
        throw input_error("MR matrix contains non-finite values");
    }
}

}  // namespace

void PartitionSpec::validate() const {
    if (!(train_nonbone.lo < train_nonbone.hi) || !(train_bone.lo < train_bone.hi)) {
        throw input_error("partition training intervals must be non-empty");
    }
    if (train_bone.lo > train_nonbone.hi) {
        throw input_error("partition training intervals must overlap (or touch)");
    }
    if (predict_threshold < train_bone.lo || predict_threshold > train_nonbone.hi) {
        throw input_error("prediction threshold must lie inside the overlap");
    }
}

void PartitionedModel::validate() const {
    spec.validate();
    full.validate();
    nonbone.validate();
    bone.validate();
    if (nonbone.dim() != full.dim() || bone.dim() != full.dim()) {
        throw numeric_error("partition models disagree on dimension");
    }
}

double predict_point(const Eigen::VectorXd& y2, const MixtureModel& m) {
    PreparedPredictor pred(m);
    if (y2.size() != pred.conditioning_dim()) {
        throw input_error("conditioning point has wrong dimension");
    }
    if (!y2.allFinite()) {
        throw input_error("conditioning point has non-finite entries");
    }
    Eigen::VectorXd logw(m.num_components());
    return pred.predict(y2, logw);
}

Eigen::VectorXd predict_volume(const Eigen::MatrixXd& mr, const MixtureModel& m) {
    PreparedPredictor pred(m);
    check_mr(mr, pred.conditioning_dim());
    const std::size_t n = static_cast<std::size_t>(mr.rows());
    Eigen::VectorXd out(n);
    const std::size_t chunks = num_chunks(n);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const auto [lo, hi] = chunk_range(static_cast<std::size_t>(c), n);
        Eigen::VectorXd logw(m.num_components());
        for (std::size_t i = lo; i < hi; ++i) {
            out(i) = pred.predict(mr.row(i).transpose(), logw);
        }
    }
    return out;
}

PartitionedModel train_partitioned(const VoxelTable& train, const PartitionSpec& spec,
                                   const FitConfig& cfg_full,
                                   const FitConfig& cfg_part) {
    spec.validate();
    cfg_full.validate();
    cfg_part.validate();
    const VoxelTable nonbone = extract_partition(train, spec.train_nonbone);
    const VoxelTable bone = extract_partition(train, spec.train_bone);
    const int d = 1 + kMrChannels;
    const auto need = [d](const FitConfig& cfg) {
        return static_cast<std::size_t>(cfg.K) * (d + 1);
    };
    if (nonbone.rows() < need(cfg_part)) {
        throw input_error("non-bone partition " + spec.train_nonbone.to_string() +
                          " has too few voxels (" + std::to_string(nonbone.rows()) +
                          ")");
    }
    if (bone.rows() < need(cfg_part)) {
        throw input_error("bone partition " + spec.train_bone.to_string() +
                          " has too few voxels (" + std::to_string(bone.rows()) + ")");
    }

    PartitionedModel pm;
    pm.spec = spec;
    pm.full = fit(train.joint(), cfg_full).first;
    pm.nonbone = fit(nonbone.joint(), cfg_part).first;
    pm.bone = fit(bone.joint(), cfg_part).first;
    return pm;
}

Eigen::VectorXd predict_partitioned(const Eigen::MatrixXd& mr,
                                    const PartitionedModel& pm) {
    pm.validate();
    const Eigen::VectorXd stage1 = predict_volume(mr, pm.full);

    PreparedPredictor nonbone(pm.nonbone);
    PreparedPredictor bone(pm.bone);
    check_mr(mr, nonbone.conditioning_dim());
    const std::size_t n = static_cast<std::size_t>(mr.rows());
    Eigen::VectorXd out(n);
    const std::size_t chunks = num_chunks(n);
    const double threshold = pm.spec.predict_threshold;
    const int K = std::max(pm.nonbone.num_components(), pm.bone.num_components());

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const auto [lo, hi] = chunk_range(static_cast<std::size_t>(c), n);
        Eigen::VectorXd logw(K);
        for (std::size_t i = lo; i < hi; ++i) {
            const Eigen::VectorXd y2 = mr.row(i).transpose();
            // Values at the threshold route to non-bone.
            out(i) = stage1(i) <= threshold ? nonbone.predict(y2, logw)
                                            : bone.predict(y2, logw);
        }
    }
    return out;
}

ModelScorer mse_selector(const Eigen::MatrixXd& holdout) {
    if (holdout.rows() < 1 || holdout.cols() < 2) {
        throw input_error("selection table needs rows and at least two columns");
    }
    const Eigen::VectorXd truth = holdout.col(0);
    const Eigen::MatrixXd mr = holdout.rightCols(holdout.cols() - 1);
    return [truth, mr](const MixtureModel& m) {
        const Eigen::VectorXd pred = predict_volume(mr, m);
        return (pred - truth).squaredNorm() / static_cast<double>(truth.size());
    };
}

}  // namespace sgmix
