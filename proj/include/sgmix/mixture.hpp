#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sgmix/skew_normal.hpp"

namespace sgmix {

enum class Variant { skew, gaussian };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// K-component mixture of skew-normal distributions. For the gaussian
/// variant every component keeps skewness pinned at zero.
struct MixtureModel {
    Variant variant = Variant::skew;
    std::vector<double> weights;
    std::vector<SkewNormalParams> components;

    int num_components() const { return static_cast<int>(components.size()); }
    int dim() const { return components.empty() ? 0 : components[0].dim(); }

    /// Weights non-negative and summing to 1 within 1e-12, shared
    /// dimension, valid components.
    void validate() const;
};

/// Per-voxel posterior quantities from one E-step.
///
/// resp(i,k)    = P(component k | voxel i)                     (gamma)
/// resp_u(i,k)  = resp * E[U | voxel i, component k]           (vartheta)
/// resp_u2(i,k) = resp * E[U^2 | voxel i, component k]         (psi)
///
/// where U is the latent half-normal scalar of the hierarchical form.
struct EStepQuantities {
    Eigen::MatrixXd resp;
    Eigen::MatrixXd resp_u;
    Eigen::MatrixXd resp_u2;
    double loglik = 0.0;              ///< observed-data log-likelihood
    std::size_t degenerate_count = 0; ///< voxels rescued from all-zero density
};

struct FitConfig {
    int K = 1;
    Variant variant = Variant::skew;
    int max_iter = 2000;
    double stop_tol = 5e-5;   ///< on max_{ik} |resp change|
    int restarts = 1;
    std::uint64_t seed = 0;
    double ridge = 1e-6;      ///< relative covariance regularizer
    bool lock_skewness = false;  ///< keep skewness at zero inside the skew loop

    void validate() const;
    bool skew_updates() const {
        return variant == Variant::skew && !lock_skewness;
    }
};

struct FitTrace {
    struct Entry {
        int iteration;
        double loglik;
        double max_delta_resp;  ///< max |resp - previous resp|; inf at iteration 0
    };
    std::vector<Entry> entries;
    bool converged = false;
    int restart_index = 0;
    std::size_t degenerate_count = 0;

    double final_loglik() const;
    double final_delta() const;
    /// Plain-text table: iteration, loglik, max|delta resp|.
    std::string to_table() const;
};

/// Lower-is-better model score used to pick among restarts (e.g. held-out
/// prediction MSE). The default is the negative observed log-likelihood.
using ModelScorer = std::function<double(const MixtureModel&)>;

/// k-means++ seeding plus at most 50 Lloyd iterations; cluster means,
/// fractions and within-cluster covariances (ridge-regularized) seed the
/// model. Skewness starts uniform in [-1, 1]^d for the skew variant, zero
/// otherwise. An empty cluster is re-seeded once at the farthest point.
MixtureModel kmeans_init(const Eigen::MatrixXd& data, int K, std::uint64_t seed,
                         Variant variant = Variant::skew, double ridge = 1e-6);

/// One E-step; parallel over voxels with thread-count-independent results.
EStepQuantities e_step(const Eigen::MatrixXd& data, const MixtureModel& m);

/// One M-step. Updates run weight -> location -> xi -> omega; the location
/// update uses the current model's xi, the xi update the new location.
/// Throws collapse_error when a component's effective weight drops below
/// 10 voxels (K > 1). update_skewness=false pins xi at zero (used when the
/// skew variant runs with skewness locked).
MixtureModel m_step(const Eigen::MatrixXd& data, const EStepQuantities& q,
                    const MixtureModel& current, double ridge = 1e-6,
                    bool update_skewness = true);

/// Full EM fit with restarts. `init` overrides the k-means initialization
/// (restarts are skipped in that case). Non-convergence is reported via
/// the trace flag, not an error.
std::pair<MixtureModel, FitTrace> fit(const Eigen::MatrixXd& data,
                                      const FitConfig& cfg,
                                      std::optional<MixtureModel> init = {},
                                      ModelScorer scorer = {});

/// Observed-data log-likelihood, accumulated in log space.
double loglik(const Eigen::MatrixXd& data, const MixtureModel& m);

}  // namespace sgmix
