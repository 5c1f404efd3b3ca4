#include "sgmix/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "sgmix/normal.hpp"

namespace sgmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDenseBoneThreshold = 900.0;

void check_lengths(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    if (pred.size() != truth.size()) {
        throw input_error("prediction and truth vectors differ in length");
    }
    if (pred.size() < 1) {
        throw input_error("prediction and truth vectors are empty");
    }
}

// MAE over a region, NaN when the region is empty (report path). The
// public mae() turns the empty case into an error.
std::pair<double, std::size_t> region_mae(const Eigen::VectorXd& pred,
                                          const Eigen::VectorXd& truth,
                                          const HuInterval& region) {
    double sum = 0.0;
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        if (region.contains(truth(i))) {
            sum += std::abs(pred(i) - truth(i));
            ++count;
        }
    }
    if (count == 0) {
        return {std::numeric_limits<double>::quiet_NaN(), 0};
    }
    return {sum / static_cast<double>(count), count};
}

// Average ranks of |diffs| (ties share the mean rank).
std::vector<double> signed_ranks(const std::vector<double>& diffs) {
    const std::size_t n = diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(diffs[a]) < std::abs(diffs[b]);
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n &&
               std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) {
            ++j;
        }
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth,
           const HuInterval& region) {
    check_lengths(pred, truth);
    const auto [value, count] = region_mae(pred, truth, region);
    if (count == 0) {
        throw input_error("region " + region.to_string() +
                          " contains no truth voxels");
    }
    return value;
}

double psnr(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    check_lengths(pred, truth);
    const double sse = (pred - truth).squaredNorm();
    if (sse == 0.0) {
        return kInf;
    }
    const double peak = truth.maxCoeff();
    const double n = static_cast<double>(truth.size());
    return 10.0 * std::log10(n * peak * peak / sse);
}

std::vector<ResidualWindow> smoothed_residuals(const Eigen::VectorXd& pred,
                                               const Eigen::VectorXd& truth,
                                               double window) {
    check_lengths(pred, truth);
    if (!(window > 0.0)) {
        throw input_error("window width must be positive");
    }
    const std::size_t nbins =
        static_cast<std::size_t>(std::ceil((kCtMax - kCtMin) / window));
    std::vector<ResidualWindow> bins(nbins);
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        std::ptrdiff_t idx =
            static_cast<std::ptrdiff_t>(std::floor((truth(i) - kCtMin) / window));
        idx = std::clamp<std::ptrdiff_t>(idx, 0,
                                         static_cast<std::ptrdiff_t>(nbins) - 1);
        ResidualWindow& b = bins[idx];
        const double r = pred(i) - truth(i);
        b.mean_truth += truth(i);
        b.mean_residual += r;
        b.mean_abs_residual += std::abs(r);
        ++b.count;
    }
    std::vector<ResidualWindow> out;
    for (std::size_t idx = 0; idx < nbins; ++idx) {
        ResidualWindow& b = bins[idx];
        if (b.count == 0) continue;
        b.window_lo = kCtMin + window * static_cast<double>(idx);
        b.window_center = b.window_lo + 0.5 * window;
        const double c = static_cast<double>(b.count);
        b.mean_truth /= c;
        b.mean_residual /= c;
        b.mean_abs_residual /= c;
        out.push_back(b);
    }
    return out;
}

BlandAltmanResult bland_altman(const Eigen::VectorXd& pred,
                               const Eigen::VectorXd& truth) {
    check_lengths(pred, truth);
    BlandAltmanResult r;
    const std::size_t n = static_cast<std::size_t>(pred.size());
    r.pairs.reserve(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = pred(i) - truth(i);
        r.pairs.emplace_back(0.5 * (pred(i) + truth(i)), diff);
        sum += diff;
    }
    r.bias = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& [avg, diff] : r.pairs) {
        ss += (diff - r.bias) * (diff - r.bias);
    }
    r.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    r.limit_low = r.bias - 1.96 * r.sd;
    r.limit_high = r.bias + 1.96 * r.sd;
    return r;
}

RankTestResult wilcoxon_one_sided(const std::vector<double>& diffs) {
    if (diffs.empty()) {
        throw input_error("rank test needs at least one difference");
    }
    std::vector<double> nonzero;
    for (double d : diffs) {
        if (!std::isfinite(d)) {
            throw input_error("rank test differences must be finite");
        }
        if (d != 0.0) nonzero.push_back(d);
    }
    if (nonzero.empty()) {
        throw input_error("rank test is degenerate: every difference is zero");
    }
    const int n = static_cast<int>(nonzero.size());
    const std::vector<double> ranks = signed_ranks(nonzero);

    RankTestResult out;
    out.n_effective = n;
    for (int i = 0; i < n; ++i) {
        if (nonzero[i] > 0.0) out.statistic += ranks[i];
    }

    if (n <= 20) {
        // Ranks are multiples of 1/2, so the pattern sums compare exactly.
        const std::uint64_t patterns = std::uint64_t{1} << n;
        std::uint64_t favorable = 0;
        for (std::uint64_t mask = 0; mask < patterns; ++mask) {
            double w = 0.0;
            for (int i = 0; i < n; ++i) {
                if (mask & (std::uint64_t{1} << i)) w += ranks[i];
            }
            if (w <= out.statistic) ++favorable;
        }
        out.p_value =
            static_cast<double>(favorable) / static_cast<double>(patterns);
    } else {
        const double nd = static_cast<double>(n);
        const double mean = nd * (nd + 1.0) / 4.0;
        double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
        std::map<double, int> tie_counts;
        for (double r : ranks) ++tie_counts[r];
        for (const auto& [rank, t] : tie_counts) {
            if (t > 1) {
                const double td = static_cast<double>(t);
                var -= td * (td * td - 1.0) / 48.0;
            }
        }
        const double z = (out.statistic + 0.5 - mean) / std::sqrt(var);
        out.p_value = norm_cdf(z);
    }
    return out;
}

EvalReport evaluate_report(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth,
                           const PartitionSpec& spec, const std::string& fold_id) {
    check_lengths(pred, truth);
    spec.validate();
    EvalReport r;
    r.fold_id = fold_id;
    r.n = static_cast<std::size_t>(truth.size());

    const double thr = spec.predict_threshold;
    const HuInterval nonbone{-kInf, thr, false, true};
    const HuInterval bone{thr, kInf, false, false};
    const HuInterval dense{kDenseBoneThreshold, kInf, false, false};
    const HuInterval all{-kInf, kInf, false, false};

    std::tie(r.mae_nonbone, r.n_nonbone) = region_mae(pred, truth, nonbone);
    std::tie(r.mae_bone, r.n_bone) = region_mae(pred, truth, bone);
    std::tie(r.mae_dense_bone, r.n_dense_bone) = region_mae(pred, truth, dense);
    std::tie(r.mae_overall, r.n) = region_mae(pred, truth, all);
    r.psnr = psnr(pred, truth);
    r.residual_curve = smoothed_residuals(pred, truth);
    r.bland_altman = bland_altman(pred, truth);
    return r;
}

std::vector<EvalReport> loocv(const std::vector<VoxelTable>& tables,
                              const LoocvConfig& cfg) {
    if (tables.size() < 2) {
        throw input_error("leave-one-out cross-validation needs at least 2 tables");
    }
    cfg.spec.validate();
    std::vector<EvalReport> reports;
    reports.reserve(tables.size());
    for (std::size_t f = 0; f < tables.size(); ++f) {
        const std::string fold_id =
            tables[f].patient_id.empty() ? "fold" + std::to_string(f)
                                         : tables[f].patient_id;
        try {
            std::vector<VoxelTable> train_tables;
            for (std::size_t j = 0; j < tables.size(); ++j) {
                if (j != f) train_tables.push_back(tables[j]);
            }
            const VoxelTable train = concat_tables(train_tables);
            Eigen::VectorXd pred;
            if (cfg.partitioned) {
                const PartitionedModel pm =
                    train_partitioned(train, cfg.spec, cfg.cfg_full, cfg.cfg_part);
                pred = predict_partitioned(tables[f].mr, pm);
            } else {
                const MixtureModel full = fit(train.joint(), cfg.cfg_full).first;
                pred = predict_volume(tables[f].mr, full);
            }
            reports.push_back(
                evaluate_report(pred, tables[f].ct, cfg.spec, fold_id));
        } catch (const input_error& e) {
            throw input_error("fold " + std::to_string(f) + " (" + fold_id +
                              "): " + e.what());
        } catch (const numeric_error& e) {
            throw numeric_error("fold " + std::to_string(f) + " (" + fold_id +
                                "): " + e.what());
        }
    }
    return reports;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw input_error("cannot write '" + path.string() + "'");
    }
    return out;
}

void metric_row(std::ofstream& out, const char* name, double value,
                std::size_t count) {
    if (count == 0) return;  // empty region: omitted
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%zu\n", name, value, count);
    out << buf;
}

}  // namespace

void write_report_csv(const std::filesystem::path& path, const EvalReport& r) {
    auto out = open_csv(path);
    out << "metric,value,count\n";
    metric_row(out, "mae_nonbone", r.mae_nonbone, r.n_nonbone);
    metric_row(out, "mae_bone", r.mae_bone, r.n_bone);
    metric_row(out, "mae_dense_bone", r.mae_dense_bone, r.n_dense_bone);
    metric_row(out, "mae_overall", r.mae_overall, r.n);
    metric_row(out, "psnr", r.psnr, r.n);
    metric_row(out, "bland_altman_bias", r.bland_altman.bias, r.n);
    metric_row(out, "bland_altman_limit_low", r.bland_altman.limit_low, r.n);
    metric_row(out, "bland_altman_limit_high", r.bland_altman.limit_high, r.n);
}

void write_residuals_csv(const std::filesystem::path& path, const EvalReport& r) {
    auto out = open_csv(path);
    out << "window_lo,window_center,mean_truth,mean_residual,mean_abs_residual,"
           "count\n";
    char buf[192];
    for (const ResidualWindow& w : r.residual_curve) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%zu\n",
                      w.window_lo, w.window_center, w.mean_truth, w.mean_residual,
                      w.mean_abs_residual, w.count);
        out << buf;
    }
}

void write_bland_altman_csv(const std::filesystem::path& path,
                            const EvalReport& r) {
    auto out = open_csv(path);
    out << "average,difference\n";
    char buf[96];
    for (const auto& [avg, diff] : r.bland_altman.pairs) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g\n", avg, diff);
        out << buf;
    }
}

}  // namespace sgmix
