#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "fixtures.hpp"
#include "sgmix/linalg.hpp"
#include "sgmix/parallel.hpp"
#include "sgmix/predictor.hpp"
#include "sgmix/random.hpp"
#include "sgmix/reference.hpp"

using namespace sgmix;
using fixtures::sample_mixture;

namespace {

MixtureModel prediction_fixture() {
    MixtureModel m;
    m.variant = Variant::skew;
    m.weights = {0.45, 0.55};
    SkewNormalParams a;
    a.location = Eigen::Vector2d(-1.0, -2.0);
    a.dispersion = (Eigen::Matrix2d() << 1.2, 0.5, 0.5, 0.9).finished();
    a.skewness = Eigen::Vector2d(1.0, -0.6);
    SkewNormalParams b;
    b.location = Eigen::Vector2d(2.0, 2.5);
    b.dispersion = (Eigen::Matrix2d() << 0.8, -0.3, -0.3, 1.4).finished();
    b.skewness = Eigen::Vector2d(-0.5, 1.2);
    m.components = {a, b};
    return m;
}

}  // namespace

TEST_CASE("predict_point with one component is the conditional mean") {
    MixtureModel m;
    m.variant = Variant::skew;
    m.weights = {1.0};
    SkewNormalParams p;
    p.location = Eigen::Vector2d(0.5, -0.5);
    p.dispersion = (Eigen::Matrix2d() << 1.0, 0.4, 0.4, 1.1).finished();
    p.skewness = Eigen::Vector2d(1.5, 0.5);
    m.components = {p};
    for (double y2 : {-2.0, 0.0, 3.0}) {
        const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, y2);
        CHECK(predict_point(v, m) ==
              doctest::Approx(conditional_mean(v, p)).epsilon(1e-13));
    }
}

TEST_CASE("predict_point with identical components matches either one") {
    MixtureModel m;
    m.variant = Variant::skew;
    m.weights = {0.5, 0.5};
    SkewNormalParams p;
    p.location = Eigen::Vector2d(1.0, 0.0);
    p.dispersion = (Eigen::Matrix2d() << 1.0, 0.3, 0.3, 1.0).finished();
    p.skewness = Eigen::Vector2d(0.8, -0.8);
    m.components = {p, p};
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.7);
    CHECK(predict_point(v, m) ==
          doctest::Approx(conditional_mean(v, p)).epsilon(1e-13));
}

TEST_CASE("predict_point matches the joint-sampling conditional mean") {
    const MixtureModel m = prediction_fixture();
    const std::size_t n = 10000000;
    const Eigen::MatrixXd draws = sample_mixture(m, n, 271828);

    for (double target : {-2.5, -1.0, 0.0, 1.5, 2.5}) {
        double sum = 0.0, sum2 = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(draws(i, 1) - target) <= 0.01) {
                sum += draws(i, 0);
                sum2 += draws(i, 0) * draws(i, 0);
                ++count;
            }
        }
        REQUIRE(count > 1000);
        const double mc_mean = sum / static_cast<double>(count);
        const double mc_var =
            sum2 / static_cast<double>(count) - mc_mean * mc_mean;
        const double mc_se = std::sqrt(mc_var / static_cast<double>(count));
        const double got =
            predict_point(Eigen::VectorXd::Constant(1, target), m);
        CHECK(std::abs(got - mc_mean) < 3.0 * mc_se);
    }
}

TEST_CASE("gaussian predict_point is the mixture-of-regressions formula") {
    RandomStream rng(14);
    MixtureModel m;
    m.variant = Variant::gaussian;
    m.weights = {0.3, 0.25, 0.45};
    for (int k = 0; k < 3; ++k) {
        Eigen::MatrixXd b = Eigen::MatrixXd::Identity(3, 3);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) b(r, c) += 0.3 * rng.uniform(-1.0, 1.0);
        }
        SkewNormalParams p;
        p.dispersion = b * b.transpose() + 0.3 * Eigen::MatrixXd::Identity(3, 3);
        p.location = Eigen::Vector3d(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                                     rng.uniform(-3.0, 3.0));
        p.skewness = Eigen::Vector3d::Zero();
        m.components.push_back(p);
    }

    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd y2(2);
        y2 << rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0);
        double num = 0.0, den = 0.0;
        for (int k = 0; k < 3; ++k) {
            const SkewNormalParams& p = m.components[k];
            const Eigen::Vector2d mu2 = p.location.tail(2);
            const Eigen::Matrix2d s22 = p.dispersion.block(1, 1, 2, 2);
            const Eigen::RowVector2d s12 = p.dispersion.block(0, 1, 1, 2);
            const Eigen::Vector2d z = y2 - mu2;
            const double det = s22.determinant();
            const double quad = z.dot(s22.inverse() * z);
            const double marg =
                std::exp(-0.5 * quad) / (2.0 * 3.14159265358979323846) /
                std::sqrt(det);
            const double w = m.weights[k] * marg;
            const double cmean =
                p.location(0) + (s12 * s22.inverse() * z).value();
            num += w * cmean;
            den += w;
        }
        CHECK(predict_point(y2, m) == doctest::Approx(num / den).epsilon(1e-10));
    }
}

TEST_CASE("renormalized weights leave predictions unchanged") {
    MixtureModel m = prediction_fixture();
    MixtureModel scaled = m;
    const double c = 3.7;
    double total = 0.0;
    for (double& w : scaled.weights) {
        w *= c;
        total += w;
    }
    for (double& w : scaled.weights) w /= total;
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(1, 0.9);
    CHECK(predict_point(v, m) == doctest::Approx(predict_point(v, scaled)).epsilon(1e-14));
}

TEST_CASE("predict_volume agrees with predict_point and is order-stable") {
    const MixtureModel m = prediction_fixture();
    Eigen::MatrixXd mr(5, 1);
    mr << -2.0, -0.5, 0.0, 1.0, 2.7;
    const Eigen::VectorXd out = predict_volume(mr, m);
    for (int i = 0; i < 5; ++i) {
        CHECK(out(i) == predict_point(mr.row(i).transpose(), m));
    }

    // Permuting rows permutes outputs identically.
    Eigen::MatrixXd perm(5, 1);
    perm << 2.7, -2.0, 0.0, -0.5, 1.0;
    const Eigen::VectorXd out_perm = predict_volume(perm, m);
    CHECK(out_perm(0) == out(4));
    CHECK(out_perm(1) == out(0));
    CHECK(out_perm(3) == out(1));

    // Thread counts do not change results.
    RandomStream rng(5);
    Eigen::MatrixXd big(10000, 1);
    for (int i = 0; i < big.rows(); ++i) big(i, 0) = rng.uniform(-4.0, 4.0);
    set_threads(1);
    const Eigen::VectorXd one = predict_volume(big, m);
    set_threads(8);
    const Eigen::VectorXd eight = predict_volume(big, m);
    set_threads(0);
    CHECK((one - eight).cwiseAbs().maxCoeff() <= 1e-10);

    // And the serial reference produces the same values.
    const Eigen::VectorXd ref = reference::predict_volume(big.topRows(100), m);
    CHECK((one.head(100) - ref).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("partition spec validation") {
    PartitionSpec ok;
    ok.validate();

    PartitionSpec bad = ok;
    bad.predict_threshold = 250.0;  // outside the overlap hull
    CHECK_THROWS_AS(bad.validate(), input_error);

    PartitionSpec disjoint = ok;
    disjoint.train_bone.lo = 300.0;  // no overlap with (-1024, 200)
    CHECK_THROWS_AS(disjoint.validate(), input_error);

    PartitionSpec touching = ok;
    touching.train_nonbone.hi = 150.0;
    touching.train_bone.lo = 150.0;
    touching.predict_threshold = 150.0;  // zero-width overlap still valid
    touching.validate();
}

TEST_CASE("train_partitioned sizes match interval counting") {
    const auto cohort = fixtures::two_regime_cohort(1, 4000, 40);
    const VoxelTable& t = cohort[0];
    PartitionSpec spec;
    spec.predict_threshold = 150.0;

    std::size_t c_nb = 0, c_b = 0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        if (spec.train_nonbone.contains(t.ct(i))) ++c_nb;
        if (spec.train_bone.contains(t.ct(i))) ++c_b;
    }
    CHECK(extract_partition(t, spec.train_nonbone).rows() == c_nb);
    CHECK(extract_partition(t, spec.train_bone).rows() == c_b);

    // A zero-width overlap splits every voxel exactly once.
    PartitionSpec disjoint;
    disjoint.train_nonbone.hi = 150.0;
    disjoint.train_bone.lo = 150.0;
    disjoint.train_bone.lo_closed = false;
    disjoint.predict_threshold = 150.0;
    const std::size_t lower = extract_partition(t, disjoint.train_nonbone).rows();
    const std::size_t upper = extract_partition(t, disjoint.train_bone).rows();
    std::size_t at_150 = 0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        if (t.ct(i) == 150.0) ++at_150;
    }
    CHECK(lower + upper + at_150 == t.rows());
}

TEST_CASE("train_partitioned reports an empty bone partition") {
    VoxelTable t;
    t.ct = Eigen::VectorXd::Constant(200, -500.0);
    for (int i = 0; i < 200; ++i) t.ct(i) += i;  // all below 100 HU
    t.mask = Eigen::VectorXi::Ones(200);
    t.mr = Eigen::MatrixXd::Constant(200, 4, 100.0);
    PartitionSpec spec;
    FitConfig cfg;
    cfg.K = 1;
    cfg.variant = Variant::gaussian;
    try {
        (void)train_partitioned(t, spec, cfg, cfg);
        FAIL("expected input_error");
    } catch (const input_error& e) {
        CHECK(std::string(e.what()).find("bone") != std::string::npos);
    }
}

TEST_CASE("degenerate pipeline equals plain volume prediction") {
    const MixtureModel m = prediction_fixture();
    PartitionedModel pm;
    pm.full = m;
    pm.nonbone = m;
    pm.bone = m;
    pm.spec = PartitionSpec{};
    RandomStream rng(8);
    Eigen::MatrixXd mr(500, 1);
    for (int i = 0; i < 500; ++i) mr(i, 0) = rng.uniform(-4.0, 4.0);
    const Eigen::VectorXd a = predict_partitioned(mr, pm);
    const Eigen::VectorXd b = predict_volume(mr, m);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a stage-1 prediction at the threshold routes to non-bone") {
    // Constant-prediction models: independent channels make E[ct|mr] = eta1.
    auto constant_model = [](double level) {
        MixtureModel m;
        m.variant = Variant::gaussian;
        m.weights = {1.0};
        SkewNormalParams p;
        p.location = Eigen::Vector2d(level, 0.0);
        p.dispersion = Eigen::Vector2d(50.0, 1.0).asDiagonal();
        p.skewness = Eigen::Vector2d::Zero();
        m.components = {p};
        return m;
    };
    PartitionedModel pm;
    pm.full = constant_model(100.0);  // stage 1 predicts exactly 100 HU
    pm.nonbone = constant_model(-777.0);
    pm.bone = constant_model(777.0);
    pm.spec = PartitionSpec{};  // threshold 100

    const Eigen::MatrixXd mr = Eigen::MatrixXd::Constant(3, 1, 0.5);
    const Eigen::VectorXd out = predict_partitioned(mr, pm);
    for (int i = 0; i < 3; ++i) {
        CHECK(out(i) == -777.0);
    }
}

TEST_CASE("raising the threshold never reroutes non-bone to bone") {
    const auto cohort = fixtures::two_regime_cohort(1, 3000, 60);
    PartitionSpec spec;
    spec.predict_threshold = 120.0;
    FitConfig cfg_full;
    cfg_full.K = 2;
    cfg_full.variant = Variant::gaussian;
    cfg_full.seed = 2;
    FitConfig cfg_part = cfg_full;
    const PartitionedModel pm =
        train_partitioned(cohort[0], spec, cfg_full, cfg_part);

    const Eigen::VectorXd stage1 = predict_volume(cohort[0].mr, pm.full);
    for (double lower : {120.0}) {
        for (double higher : {150.0, 199.0}) {
            for (int i = 0; i < stage1.size(); ++i) {
                const bool nb_low = stage1(i) <= lower;
                const bool nb_high = stage1(i) <= higher;
                if (nb_low) CHECK(nb_high);
            }
        }
    }
}

TEST_CASE("pipeline beats the single full model on bone-regime voxels") {
    const auto cohort = fixtures::two_regime_cohort(2, 6000, 90);
    const VoxelTable train = concat_tables({cohort[0]});
    const VoxelTable& test = cohort[1];

    PartitionSpec spec;
    spec.predict_threshold = 150.0;
    FitConfig cfg_full;
    cfg_full.K = 2;
    cfg_full.variant = Variant::skew;
    cfg_full.seed = 4;
    cfg_full.max_iter = 300;
    FitConfig cfg_part = cfg_full;

    const PartitionedModel pm = train_partitioned(train, spec, cfg_full, cfg_part);
    const Eigen::VectorXd pipeline = predict_partitioned(test.mr, pm);
    const Eigen::VectorXd single = predict_volume(test.mr, pm.full);

    double mae_pipeline = 0.0, mae_single = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        if (test.ct(i) > 150.0) {
            mae_pipeline += std::abs(pipeline(i) - test.ct(i));
            mae_single += std::abs(single(i) - test.ct(i));
            ++count;
        }
    }
    REQUIRE(count > 500);
    CHECK(mae_pipeline / count <= mae_single / count);
}

TEST_CASE("mse_selector scores lower for the better model") {
    const MixtureModel truth = prediction_fixture();
    const Eigen::MatrixXd data = sample_mixture(truth, 5000, 33);
    MixtureModel off = truth;
    off.components[0].location(0) += 2.0;
    off.components[1].location(0) -= 2.0;
    const ModelScorer scorer = mse_selector(data);
    CHECK(scorer(truth) < scorer(off));
}
