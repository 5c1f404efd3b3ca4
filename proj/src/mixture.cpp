#include "sgmix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include "sgmix/linalg.hpp"
#include "sgmix/normal.hpp"
#include "sgmix/parallel.hpp"
#include "sgmix/random.hpp"

namespace sgmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Effective voxel count below which a component counts as collapsed.
constexpr double kCollapseCount = 10.0;

// Per-component quantities fixed for one E-step sweep.
struct PreparedComponent {
    Eigen::VectorXd location;
    Eigen::MatrixXd whitener;   // dispersion^{-1/2}
    Eigen::VectorXd skew_dir;   // dispersion^{-1/2} skewness
    Eigen::VectorXd alpha_dir;  // omega^{-1} xi / beta
    double beta = 1.0;          // sqrt(1 + xi' omega^{-1} xi)
    double log_norm = 0.0;      // -(d log 2pi + log det dispersion) / 2
    double log_weight = 0.0;
};

std::vector<PreparedComponent> prepare(const MixtureModel& m) {
    m.validate();
    const int K = m.num_components();
    const int d = m.dim();
    std::vector<PreparedComponent> out(K);
    for (int k = 0; k < K; ++k) {
        const SkewNormalParams& p = m.components[k];
        PreparedComponent& pc = out[k];
        const SpdEigen sigma(p.dispersion);
        pc.location = p.location;
        pc.whitener = sigma.inv_sqrt();
        pc.skew_dir = pc.whitener * p.skewness;
        pc.log_norm = -0.5 * (d * kLogTwoPi + sigma.log_det());
        pc.log_weight = std::log(m.weights[k]);

        const CanonicalParams c = reparam_forward(p);
        const SpdEigen omega(c.omega);
        const Eigen::VectorXd oxi = omega.solve(c.xi);
        pc.beta = std::sqrt(1.0 + c.xi.dot(oxi));
        pc.alpha_dir = oxi / pc.beta;
    }
    return out;
}

void check_data(const Eigen::MatrixXd& data, int d) {
    if (data.cols() != d) {
        throw input_error("data dimension does not match the model");
    }
    if (!data.allFinite()) {
        throw input_error("data contains non-finite values");
    }
}

// Extreme rows can push the truncation argument past double range once a
// component has drifted far away; the moments stay finite after clamping.
inline double clamp_alpha(double a) {
    return std::clamp(a, -1e15, 1e15);
}

}  // namespace

std::string to_string(Variant v) {
    return v == Variant::skew ? "skew" : "gaussian";
}

Variant variant_from_string(const std::string& s) {
    if (s == "skew" || s == "sgmm") return Variant::skew;
    if (s == "gaussian" || s == "gmm") return Variant::gaussian;
    throw input_error("unknown variant '" + s + "' (expected skew|gaussian)");
}

void MixtureModel::validate() const {
    const int K = num_components();
    if (K < 1 || static_cast<int>(weights.size()) != K) {
        throw numeric_error("mixture needs K >= 1 components with matching weights");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw numeric_error("mixture weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw numeric_error("mixture weights must sum to 1");
    }
    const int d = dim();
    for (int k = 0; k < K; ++k) {
        if (components[k].dim() != d) {
            throw numeric_error("mixture components disagree on dimension");
        }
        components[k].validate();
        if (variant == Variant::gaussian &&
            components[k].skewness.cwiseAbs().maxCoeff() != 0.0) {
            throw numeric_error("gaussian variant requires zero skewness");
        }
    }
}

void FitConfig::validate() const {
    if (K < 1) throw input_error("K must be >= 1");
    if (max_iter < 1) throw input_error("max_iter must be >= 1");
    if (!(stop_tol > 0.0)) throw input_error("stop_tol must be > 0");
    if (restarts < 1) throw input_error("restarts must be >= 1");
    if (!(ridge >= 0.0)) throw input_error("ridge must be >= 0");
}

EStepQuantities e_step(const Eigen::MatrixXd& data, const MixtureModel& m) {
    const std::vector<PreparedComponent> comp = prepare(m);
    const int K = m.num_components();
    const int d = m.dim();
    check_data(data, d);
    const std::size_t n = static_cast<std::size_t>(data.rows());
    const bool skew = m.variant == Variant::skew;

    EStepQuantities q;
    q.resp.resize(n, K);
    q.resp_u.setZero(n, K);
    q.resp_u2.setZero(n, K);

    const std::size_t chunks = num_chunks(n);
    std::vector<double> chunk_loglik(chunks, 0.0);
    std::vector<std::size_t> chunk_degenerate(chunks, 0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const auto [lo, hi] = chunk_range(static_cast<std::size_t>(c), n);
        Eigen::VectorXd z(d), logp(K), alpha(K);
        double acc = 0.0;
        std::size_t degenerate = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            int nearest = 0;
            double nearest_quad = kInf;
            for (int k = 0; k < K; ++k) {
                z = data.row(i).transpose() - comp[k].location;
                const double quad = (comp[k].whitener * z).squaredNorm();
                logp(k) = comp[k].log_weight + std::log(2.0) + comp[k].log_norm -
                          0.5 * quad + norm_log_cdf(comp[k].skew_dir.dot(z));
                alpha(k) = comp[k].alpha_dir.dot(z);
                if (quad < nearest_quad) {
                    nearest_quad = quad;
                    nearest = k;
                }
            }
            const double lse = log_sum_exp(logp.data(), K);
            if (std::isfinite(lse)) {
                for (int k = 0; k < K; ++k) {
                    q.resp(i, k) = std::exp(logp(k) - lse);
                }
            } else {
                // Every component underflowed; hand the voxel to the
                // nearest component so the M-step stays defined.
                for (int k = 0; k < K; ++k) q.resp(i, k) = 0.0;
                q.resp(i, nearest) = 1.0;
                ++degenerate;
            }
            acc += lse;
            if (skew) {
                for (int k = 0; k < K; ++k) {
                    const TruncMoments tm =
                        trunc_moments(clamp_alpha(alpha(k)), comp[k].beta);
                    q.resp_u(i, k) = q.resp(i, k) * tm.mean;
                    q.resp_u2(i, k) = q.resp(i, k) * tm.second_moment;
                }
            }
        }
        chunk_loglik[c] = acc;
        chunk_degenerate[c] = degenerate;
    }

    q.loglik = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        q.loglik += chunk_loglik[c];
        q.degenerate_count += chunk_degenerate[c];
    }
    return q;
}

MixtureModel m_step(const Eigen::MatrixXd& data, const EStepQuantities& q,
                    const MixtureModel& current, double ridge,
                    bool update_skewness) {
    const int K = current.num_components();
    const int d = current.dim();
    check_data(data, d);
    const std::size_t n = static_cast<std::size_t>(data.rows());
    if (q.resp.rows() != data.rows() || q.resp.cols() != K ||
        q.resp_u.rows() != data.rows() || q.resp_u2.rows() != data.rows()) {
        throw input_error("E-step quantities do not match data and model shape");
    }
    const bool skew = current.variant == Variant::skew && update_skewness;
    const std::size_t chunks = num_chunks(n);

    // Pass 1: responsibility-weighted sums that determine weights,
    // locations and xi.
    struct Pass1 {
        Eigen::VectorXd w, u1, u2;
        Eigen::MatrixXd wy, u1y;  // d x K
    };
    std::vector<Pass1> part1(chunks);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const auto [lo, hi] = chunk_range(static_cast<std::size_t>(c), n);
        Pass1 acc;
        acc.w.setZero(K);
        acc.u1.setZero(K);
        acc.u2.setZero(K);
        acc.wy.setZero(d, K);
        acc.u1y.setZero(d, K);
        for (std::size_t i = lo; i < hi; ++i) {
            const Eigen::VectorXd y = data.row(i).transpose();
            for (int k = 0; k < K; ++k) {
                acc.w(k) += q.resp(i, k);
                acc.u1(k) += q.resp_u(i, k);
                acc.u2(k) += q.resp_u2(i, k);
                acc.wy.col(k) += q.resp(i, k) * y;
                acc.u1y.col(k) += q.resp_u(i, k) * y;
            }
        }
        part1[c] = std::move(acc);
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd u1 = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd u2 = Eigen::VectorXd::Zero(K);
    Eigen::MatrixXd wy = Eigen::MatrixXd::Zero(d, K);
    Eigen::MatrixXd u1y = Eigen::MatrixXd::Zero(d, K);
    for (std::size_t c = 0; c < chunks; ++c) {
        w += part1[c].w;
        u1 += part1[c].u1;
        u2 += part1[c].u2;
        wy += part1[c].wy;
        u1y += part1[c].u1y;
    }

    Eigen::MatrixXd eta(d, K), xi(d, K);
    for (int k = 0; k < K; ++k) {
        if (!(w(k) > 0.0)) {
            throw numeric_error("component " + std::to_string(k) +
                                " received zero total responsibility");
        }
        if (K > 1 && w(k) < kCollapseCount) {
            char buf[128];
            std::snprintf(buf, sizeof(buf),
                          "component %d collapsed: effective weight %.3g of %zu voxels",
                          k, w(k), n);
            throw collapse_error(k, buf);
        }
        const Eigen::VectorXd xi_old =
            skew ? reparam_forward(current.components[k]).xi
                 : Eigen::VectorXd::Zero(d).eval();
        eta.col(k) = (wy.col(k) - u1(k) * xi_old) / w(k);
        if (skew && u2(k) > 0.0) {
            xi.col(k) = (u1y.col(k) - u1(k) * eta.col(k)) / u2(k);
        } else {
            xi.col(k).setZero();
        }
    }

    // Pass 2: responsibility-weighted scatter about the new locations.
    std::vector<std::vector<Eigen::MatrixXd>> part2(chunks);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const auto [lo, hi] = chunk_range(static_cast<std::size_t>(c), n);
        std::vector<Eigen::MatrixXd> acc(K, Eigen::MatrixXd::Zero(d, d));
        Eigen::VectorXd z(d);
        for (std::size_t i = lo; i < hi; ++i) {
            for (int k = 0; k < K; ++k) {
                z = data.row(i).transpose() - eta.col(k);
                acc[k].noalias() += q.resp(i, k) * (z * z.transpose());
            }
        }
        part2[c] = std::move(acc);
    }

    MixtureModel out;
    out.variant = current.variant;
    out.weights.resize(K);
    out.components.resize(K);
    for (int k = 0; k < K; ++k) {
        Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
        for (std::size_t c = 0; c < chunks; ++c) scatter += part2[c][k];
        // Sum_i vartheta_ik (y_i - eta_k) reuses the pass-1 totals.
        const Eigen::VectorXd b = u1y.col(k) - u1(k) * eta.col(k);
        Eigen::MatrixXd omega =
            (scatter - b * xi.col(k).transpose() - xi.col(k) * b.transpose() +
             u2(k) * xi.col(k) * xi.col(k).transpose()) /
            w(k);
        omega = 0.5 * (omega + omega.transpose());
        omega += (ridge * omega.trace() / d) * Eigen::MatrixXd::Identity(d, d);

        out.weights[k] = w(k) / static_cast<double>(n);
        CanonicalParams canon;
        canon.location = eta.col(k);
        canon.xi = xi.col(k);
        canon.omega = omega;
        canon.delta = Eigen::VectorXd::Zero(d);  // unused by the inverse map
        out.components[k] = reparam_inverse(canon);
    }
    // Guard against accumulated rounding in the weight normalization.
    double total = 0.0;
    for (double v : out.weights) total += v;
    for (double& v : out.weights) v /= total;
    return out;
}

double loglik(const Eigen::MatrixXd& data, const MixtureModel& m) {
    const std::vector<PreparedComponent> comp = prepare(m);
    const int K = m.num_components();
    check_data(data, m.dim());
    const std::size_t n = static_cast<std::size_t>(data.rows());
    const std::size_t chunks = num_chunks(n);
    std::vector<double> chunk_sum(chunks, 0.0);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const auto [lo, hi] = chunk_range(static_cast<std::size_t>(c), n);
        Eigen::VectorXd z(m.dim()), logp(K);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            for (int k = 0; k < K; ++k) {
                z = data.row(i).transpose() - comp[k].location;
                logp(k) = comp[k].log_weight + std::log(2.0) + comp[k].log_norm -
                          0.5 * (comp[k].whitener * z).squaredNorm() +
                          norm_log_cdf(comp[k].skew_dir.dot(z));
            }
            acc += log_sum_exp(logp.data(), K);
        }
        chunk_sum[c] = acc;
    }
    double total = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) total += chunk_sum[c];
    return total;
}

MixtureModel kmeans_init(const Eigen::MatrixXd& data, int K, std::uint64_t seed,
                         Variant variant, double ridge) {
    const std::size_t n = static_cast<std::size_t>(data.rows());
    const int d = static_cast<int>(data.cols());
    if (K < 1) throw input_error("K must be >= 1");
    if (!data.allFinite()) throw input_error("data contains non-finite values");
    if (static_cast<std::ptrdiff_t>(n) < static_cast<std::ptrdiff_t>(K) * (d + 1)) {
        throw input_error("need at least K*(d+1) rows to initialize the mixture");
    }

    RandomStream rng(seed);
    Eigen::MatrixXd centers(K, d);
    centers.row(0) = data.row(rng.index(n));
    Eigen::VectorXd mindist2 = Eigen::VectorXd::Constant(n, kInf);
    for (int k = 1; k < K; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            const double d2 = (data.row(i) - centers.row(k - 1)).squaredNorm();
            if (d2 < mindist2(i)) mindist2(i) = d2;
        }
        const double total = mindist2.sum();
        if (total <= 0.0) {
            centers.row(k) = data.row(rng.index(n));  // only duplicates remain
            continue;
        }
        double u = rng.uniform() * total;
        std::size_t chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            u -= mindist2(i);
            if (u <= 0.0) {
                chosen = i;
                break;
            }
        }
        centers.row(k) = data.row(chosen);
    }

    std::vector<int> assign(n, 0);
    Eigen::VectorXd dist2(n);
    auto lloyd = [&]() -> bool {  // true when every cluster is non-empty
        for (int iter = 0; iter < 50; ++iter) {
            bool changed = false;
#pragma omp parallel for schedule(static) reduction(|| : changed)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
                int best = 0;
                double best_d2 = (data.row(i) - centers.row(0)).squaredNorm();
                for (int k = 1; k < K; ++k) {
                    const double d2 = (data.row(i) - centers.row(k)).squaredNorm();
                    if (d2 < best_d2) {  // ties keep the lowest index
                        best_d2 = d2;
                        best = k;
                    }
                }
                dist2(i) = best_d2;
                if (assign[i] != best) {
                    assign[i] = best;
                    changed = true;
                }
            }
            std::vector<std::size_t> count(K, 0);
            Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(K, d);
            for (std::size_t i = 0; i < n; ++i) {
                ++count[assign[i]];
                sum.row(assign[i]) += data.row(i);
            }
            for (int k = 0; k < K; ++k) {
                if (count[k] == 0) return false;
                centers.row(k) = sum.row(k) / static_cast<double>(count[k]);
            }
            if (!changed && iter > 0) break;
        }
        std::vector<bool> seen(K, false);
        for (std::size_t i = 0; i < n; ++i) seen[assign[i]] = true;
        return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
    };

    if (!lloyd()) {
        // One retry: re-seed every empty center at the farthest point.
        std::vector<std::size_t> count(K, 0);
        for (std::size_t i = 0; i < n; ++i) ++count[assign[i]];
        for (int k = 0; k < K; ++k) {
            if (count[k] > 0) continue;
            std::size_t far = 0;
            for (std::size_t i = 1; i < n; ++i) {
                if (dist2(i) > dist2(far)) far = i;
            }
            centers.row(k) = data.row(far);
            dist2(far) = 0.0;
        }
        if (!lloyd()) {
            throw input_error("k-means initialization left an empty cluster");
        }
    }

    std::vector<std::size_t> count(K, 0);
    for (std::size_t i = 0; i < n; ++i) ++count[assign[i]];
    Eigen::RowVectorXd gmean = data.colwise().mean();
    double gscale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        gscale += (data.row(i) - gmean).squaredNorm();
    }
    gscale /= static_cast<double>(n) * d;
    if (!(gscale > 0.0)) gscale = 1.0;

    MixtureModel m;
    m.variant = variant;
    m.weights.resize(K);
    m.components.resize(K);
    const double jitter = ridge;
    for (int k = 0; k < K; ++k) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i < n; ++i) {
            if (assign[i] == k) mean += data.row(i).transpose();
        }
        mean /= static_cast<double>(count[k]);
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        for (std::size_t i = 0; i < n; ++i) {
            if (assign[i] != k) continue;
            const Eigen::VectorXd z = data.row(i).transpose() - mean;
            cov.noalias() += z * z.transpose();
        }
        cov /= static_cast<double>(count[k]);
        double cscale = cov.trace() / d;
        if (cscale <= 1e-12 * gscale) cscale = gscale;
        cov += jitter * cscale * Eigen::MatrixXd::Identity(d, d);

        m.weights[k] = static_cast<double>(count[k]) / static_cast<double>(n);
        m.components[k].location = mean;
        m.components[k].dispersion = cov;
        m.components[k].skewness = Eigen::VectorXd::Zero(d);
        if (variant == Variant::skew) {
            for (int j = 0; j < d; ++j) {
                m.components[k].skewness(j) = rng.uniform(-1.0, 1.0);
            }
        }
    }
    return m;
}

double FitTrace::final_loglik() const {
    return entries.empty() ? -kInf : entries.back().loglik;
}

double FitTrace::final_delta() const {
    return entries.empty() ? kInf : entries.back().max_delta_resp;
}

std::string FitTrace::to_table() const {
    std::string out = "iteration\tloglik\tmax_delta_resp\n";
    char buf[96];
    for (const Entry& e : entries) {
        std::snprintf(buf, sizeof(buf), "%d\t%.10g\t%.10g\n", e.iteration,
                      e.loglik, e.max_delta_resp);
        out += buf;
    }
    return out;
}

std::pair<MixtureModel, FitTrace> fit(const Eigen::MatrixXd& data,
                                      const FitConfig& cfg,
                                      std::optional<MixtureModel> init,
                                      ModelScorer scorer) {
    cfg.validate();
    const std::size_t n = static_cast<std::size_t>(data.rows());
    const int d = static_cast<int>(data.cols());
    if (!data.allFinite()) throw input_error("data contains non-finite values");
    if (static_cast<std::ptrdiff_t>(n) <
        static_cast<std::ptrdiff_t>(cfg.K) * (d + 1)) {
        throw input_error("need at least K*(d+1) rows to fit the mixture");
    }
    if (init) {
        init->validate();
        if (init->num_components() != cfg.K || init->dim() != d) {
            throw input_error("initial model does not match K and data dimension");
        }
    }

    const int restarts = init ? 1 : cfg.restarts;
    std::optional<MixtureModel> best_model;
    FitTrace best_trace;
    double best_score = kInf;

    for (int r = 0; r < restarts; ++r) {
        MixtureModel model =
            init ? *init
                 : kmeans_init(data, cfg.K, cfg.seed + static_cast<std::uint64_t>(r),
                               cfg.skew_updates() ? Variant::skew : Variant::gaussian,
                               cfg.ridge);
        model.variant = cfg.variant;

        FitTrace trace;
        trace.restart_index = r;
        Eigen::MatrixXd prev_resp, prev_u, prev_u2;
        for (int it = 0;; ++it) {
            EStepQuantities q = e_step(data, model);
            double delta = kInf;
            double summary_delta = kInf;
            if (it > 0) {
                delta = (q.resp - prev_resp).cwiseAbs().maxCoeff();
                // With one component the responsibilities are constant, so
                // convergence also watches the latent-moment summaries (they
                // are zero for the gaussian variant, where the
                // responsibility rule alone decides).
                summary_delta = std::max(
                    delta,
                    std::max((q.resp_u - prev_u).cwiseAbs().maxCoeff(),
                             (q.resp_u2 - prev_u2).cwiseAbs().maxCoeff()));
            }
            trace.entries.push_back({it, q.loglik, delta});
            trace.degenerate_count = q.degenerate_count;
            if (it > 0 && summary_delta <= cfg.stop_tol) {
                trace.converged = true;
                break;
            }
            if (it >= cfg.max_iter) {
                break;
            }
            model = m_step(data, q, model, cfg.ridge, cfg.skew_updates());
            prev_resp = std::move(q.resp);
            prev_u = std::move(q.resp_u);
            prev_u2 = std::move(q.resp_u2);
        }

        const double score = scorer ? scorer(model) : -trace.final_loglik();
        if (score < best_score) {
            best_score = score;
            best_model = std::move(model);
            best_trace = std::move(trace);
        }
    }
    return {std::move(*best_model), std::move(best_trace)};
}

}  // namespace sgmix
