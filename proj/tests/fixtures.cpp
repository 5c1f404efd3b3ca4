#include "fixtures.hpp"

#include "sgmix/random.hpp"
#include "sgmix/skew_normal.hpp"

namespace fixtures {

using namespace sgmix;

Eigen::MatrixXd sample_mixture(const MixtureModel& m, std::size_t n,
                               std::uint64_t seed, std::vector<int>* labels_out) {
    RandomStream rng(seed);
    const int K = m.num_components();
    std::vector<int> labels(n);
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = rng.categorical(m.weights);
        ++counts[labels[i]];
    }
    std::vector<Eigen::MatrixXd> blocks(K);
    for (int k = 0; k < K; ++k) {
        if (counts[k] > 0) {
            blocks[k] = sn_sample(m.components[k], counts[k], seed + 1000 + k);
        }
    }
    Eigen::MatrixXd data(n, m.dim());
    std::vector<std::size_t> cursor(K, 0);
    for (std::size_t i = 0; i < n; ++i) {
        data.row(i) = blocks[labels[i]].row(cursor[labels[i]]++);
    }
    if (labels_out) *labels_out = labels;
    return data;
}

namespace {

// Lower-triangular construction fixing the CT/MR correlations exactly.
Eigen::MatrixXd correlated_dispersion(double ct_sd, const Eigen::Vector4d& mr_sd,
                                      const Eigen::Vector4d& rho) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(5, 5);
    l(0, 0) = ct_sd;
    for (int j = 0; j < 4; ++j) {
        l(j + 1, 0) = rho(j) * mr_sd(j);
        l(j + 1, j + 1) = std::sqrt(1.0 - rho(j) * rho(j)) * mr_sd(j);
    }
    return l * l.transpose();
}

SkewNormalParams subclass(double ct_mean, const Eigen::Vector4d& mr_mean,
                          const Eigen::VectorXd& skew) {
    SkewNormalParams p;
    p.location.resize(5);
    p.location(0) = ct_mean;
    p.location.tail(4) = mr_mean;
    p.dispersion = correlated_dispersion(
        90.0, Eigen::Vector4d(60.0, 60.0, 60.0, 50.0),
        Eigen::Vector4d(0.6, 0.5, 0.4, 0.3));
    p.skewness = skew;
    return p;
}

}  // namespace

MixtureModel two_regime_truth() {
    MixtureModel m;
    m.variant = Variant::skew;
    m.weights = {0.35, 0.30, 0.20, 0.15};
    Eigen::VectorXd s1(5), s2(5), s3(5), s4(5);
    s1 << 0.8, 0.3, -0.4, 0.5, 0.2;
    s2 << -0.5, 0.6, 0.2, -0.3, 0.4;
    s3 << 1.0, -0.2, 0.5, 0.3, -0.4;
    s4 << 0.6, 0.4, -0.3, 0.2, 0.5;
    m.components = {
        // Non-bone subclasses: CT well below the 150 HU split.
        subclass(-350.0, Eigen::Vector4d(700.0, 1500.0, 900.0, 400.0), s1),
        subclass(20.0, Eigen::Vector4d(1300.0, 600.0, 1100.0, 450.0), s2),
        // Bone subclasses: CT above the split, MR channel 1 reversed
        // between them (high MR -> moderate CT, low MR -> high CT).
        subclass(420.0, Eigen::Vector4d(2100.0, 1700.0, 500.0, 1550.0), s3),
        subclass(1250.0, Eigen::Vector4d(800.0, 2300.0, 1800.0, 1500.0), s4),
    };
    return m;
}

std::vector<VoxelTable> two_regime_cohort(int heads, std::size_t rows_per_head,
                                          std::uint64_t base_seed) {
    const MixtureModel truth = two_regime_truth();
    std::vector<VoxelTable> out;
    out.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        SynthSpec spec;
        spec.truth = truth;
        spec.n = rows_per_head;
        spec.seed = base_seed + static_cast<std::uint64_t>(h);
        VoxelTable t = synth_generate(spec).table;
        t.patient_id = "head" + std::to_string(h + 1);
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace fixtures
