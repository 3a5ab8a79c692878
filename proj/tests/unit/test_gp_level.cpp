#include "helpers.hpp"
#include "resgp/error.hpp"
#include "resgp/gp_level.hpp"

#include <doctest.h>

#include <cmath>

using namespace resgp;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * 3.14159265358979323846);

ResidualDataset random_dataset(std::mt19937_64& rng, Eigen::Index n, Eigen::Index l, Eigen::Index d) {
    return {testing::uniform_rows(rng, n, l), testing::normal_matrix(rng, n, d)};
}

}  // namespace

TEST_CASE("NLL examples") {
    ResidualDataset one{Eigen::MatrixXd::Constant(1, 1, 0.3), Eigen::MatrixXd::Zero(1, 1)};
    KernelHyperparams p(1.0, Eigen::VectorXd::Ones(1));
    CHECK(neg_log_likelihood(p, one, 0.0) == doctest::Approx(0.918939).epsilon(1e-6));
    one.residuals(0, 0) = 1.0;
    CHECK(neg_log_likelihood(p, one, 0.0) == doctest::Approx(1.418939).epsilon(1e-6));

    std::mt19937_64 rng(5);
    ResidualDataset z = random_dataset(rng, 6, 2, 3);
    z.residuals.setZero();
    KernelHyperparams q = testing::random_params(rng, 2);
    const Eigen::MatrixXd k = testing::se_gram(q.amplitude, q.weights, z.inputs, kDefaultJitter * q.amplitude);
    const double expected = 1.5 * std::log(k.determinant()) + 18.0 * kHalfLog2Pi;
    CHECK(neg_log_likelihood(q, z) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("NLL matches an explicit-inverse oracle and separates over columns") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        ResidualDataset ds = random_dataset(rng, 8, 3, 4);
        KernelHyperparams p = testing::random_params(rng, 3, 0.05);
        const double jit = kDefaultJitter * p.amplitude;
        const double ours = neg_log_likelihood(p, ds);
        CHECK(ours == doctest::Approx(testing::brute_nll(p.amplitude, p.weights, ds.inputs, ds.residuals, p.noise + jit))
                          .epsilon(1e-8));
        double sum = 0.0;
        for (Eigen::Index c = 0; c < 4; ++c) sum += neg_log_likelihood(p, {ds.inputs, ds.residuals.col(c)});
        CHECK(ours == doctest::Approx(sum).epsilon(1e-8));
    }
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(7);
    ResidualDataset ds = random_dataset(rng, 5, 2, 3);
    for (bool with_noise : {false, true}) {
        KernelHyperparams p = testing::random_params(rng, 2, with_noise ? 0.1 : 0.0);
        Eigen::VectorXd g = nll_gradient(p, ds, with_noise);
        Eigen::VectorXd x = p.to_log(with_noise);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double h = 1e-5;
            Eigen::VectorXd xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (neg_log_likelihood(KernelHyperparams::from_log(xp, 2, with_noise), ds) -
                               neg_log_likelihood(KernelHyperparams::from_log(xm, 2, with_noise), ds)) /
                              (2 * h);
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
        }
    }
}

TEST_CASE("duplicating output columns doubles the gradient") {
    std::mt19937_64 rng(8);
    ResidualDataset ds = random_dataset(rng, 6, 2, 2);
    ResidualDataset dup{ds.inputs, Eigen::MatrixXd(6, 4)};
    dup.residuals << ds.residuals, ds.residuals;
    KernelHyperparams p = testing::random_params(rng, 2);
    Eigen::VectorXd g1 = nll_gradient(p, ds, false), g2 = nll_gradient(p, dup, false);
    CHECK((g2 - 2.0 * g1).norm() < 1e-8 * (1.0 + g1.norm()));
}

TEST_CASE("fit_level reaches a stationary point no worse than its starts") {
    std::mt19937_64 rng(9);
    ResidualDataset ds{testing::uniform_rows(rng, 15, 2), Eigen::MatrixXd(15, 1)};
    for (Eigen::Index i = 0; i < 15; ++i) ds.residuals(i, 0) = std::sin(6 * ds.inputs(i, 0)) + std::cos(5 * ds.inputs(i, 1));
    OptimizerConfig opt;
    opt.seed = 4;
    TrainedLevel lv = fit_level(ds, opt);

    Eigen::RowVectorXd means = ds.residuals.colwise().mean();
    ResidualDataset centred{ds.inputs, ds.residuals.rowwise() - means};
    CHECK(lv.fit_nll() == doctest::Approx(neg_log_likelihood(lv.params(), centred)).epsilon(1e-10));
    CHECK(lv.fit_nll() <= neg_log_likelihood(KernelHyperparams(1.0, Eigen::Vector2d(1, 1)), centred) + 1e-9);
    Eigen::VectorXd g = nll_gradient(lv.params(), centred, false);
    Eigen::VectorXd logp = lv.params().to_log(false);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (logp[i] > -10 + 1e-6 && logp[i] < 10 - 1e-6) CHECK(std::abs(g[i]) < 1e-3);
    }

    OptimizerConfig warm = opt;
    warm.restarts = 1;
    warm.warm_start = lv.params();
    TrainedLevel again = fit_level(ds, warm);
    CHECK(std::abs(again.fit_nll() - lv.fit_nll()) < 1e-6);
}

TEST_CASE("cached factor reconstructs the Gram matrix and solves for alpha") {
    std::mt19937_64 rng(10);
    ResidualDataset ds = random_dataset(rng, 12, 2, 2);
    TrainedLevel lv = TrainedLevel::build(testing::random_params(rng, 2), ds, Eigen::RowVectorXd::Zero(2), 1e-8);
    const LevelFactor& f = lv.factor();
    Eigen::MatrixXd k = gram(lv.params(), ds.inputs, f.jitter);
    CHECK((f.chol * f.chol.transpose() - k).norm() <= 1e-6 * k.norm());
    CHECK((k * f.alpha - ds.residuals).norm() <= 1e-6 * ds.residuals.norm());
}

TEST_CASE("GP sampled with a known length scale is recovered") {
    std::mt19937_64 rng(11);
    const double true_w = 8.0;  // log weight ~ 2.08
    Eigen::MatrixXd x = testing::uniform_rows(rng, 40, 1);
    Eigen::MatrixXd k = testing::se_gram(1.0, Eigen::VectorXd::Constant(1, true_w), x, kDefaultJitter);
    Eigen::MatrixXd y = Eigen::LLT<Eigen::MatrixXd>(k).matrixL() * testing::normal_matrix(rng, 40, 1);
    OptimizerConfig opt;
    opt.center = false;
    TrainedLevel lv = fit_level({x, y}, opt);
    CHECK(std::abs(std::log(lv.params().weights[0]) - std::log(true_w)) < 0.5);
}

TEST_CASE("all-zero residuals drive the amplitude to its lower bound") {
    std::mt19937_64 rng(12);
    ResidualDataset ds{testing::uniform_rows(rng, 6, 2), Eigen::MatrixXd::Zero(6, 1)};
    TrainedLevel lv = fit_level(ds, OptimizerConfig{});
    CHECK(std::log(lv.params().amplitude) < -9.9);
    CHECK(std::isfinite(lv.fit_nll()));
}

TEST_CASE("level_predict examples and invariants") {
    std::mt19937_64 rng(13);
    ResidualDataset ds = random_dataset(rng, 10, 2, 2);
    KernelHyperparams p(2.0, Eigen::Vector2d(3.0, 5.0));
    TrainedLevel lv = TrainedLevel::build(p, ds, Eigen::RowVectorXd::Zero(2), 1e-8);

    for (Eigen::Index n = 0; n < ds.size(); ++n) {
        LevelPrediction pr = level_predict(lv, ds.inputs.row(n).transpose());
        const Eigen::VectorXd r = ds.residuals.row(n).transpose();
        CHECK((pr.mean - r).norm() <= 1e-5 * (1.0 + r.norm()));
        CHECK(pr.var <= 10 * 1e-8 * p.amplitude);
    }
    LevelPrediction far = level_predict(lv, Eigen::Vector2d(50.0, -50.0));
    CHECK(far.mean.norm() < 1e-10);
    CHECK(far.var == doctest::Approx(2.0).epsilon(1e-10));

    for (int i = 0; i < 100; ++i) {
        LevelPrediction q = level_predict(lv, testing::uniform_rows(rng, 1, 2, -0.5, 1.5).row(0).transpose());
        CHECK(q.var >= 0.0);
        CHECK(q.var <= p.amplitude + p.noise);
    }
}

TEST_CASE("level_predict agrees with explicit 2x2 algebra") {
    KernelHyperparams p(1.3, Eigen::VectorXd::Constant(1, 2.0));
    Eigen::MatrixXd x(2, 1), r(2, 1);
    x << 0.2, 0.7;
    r << 1.0, -0.5;
    TrainedLevel lv = TrainedLevel::build(p, {x, r}, Eigen::RowVectorXd::Zero(1), 0.0);
    const double a = 1.3, b = 1.3 * std::exp(-2.0 * 0.25);
    const double det = a * a - b * b;
    const double q = 0.4;
    const double k0 = 1.3 * std::exp(-2.0 * 0.04), k1 = 1.3 * std::exp(-2.0 * 0.09);
    // inverse of [[a, b], [b, a]] is [[a, -b], [-b, a]] / det
    const double w0 = (a * k0 - b * k1) / det, w1 = (-b * k0 + a * k1) / det;
    LevelPrediction pr = level_predict(lv, Eigen::VectorXd::Constant(1, q));
    CHECK(pr.mean[0] == doctest::Approx(w0 * 1.0 + w1 * -0.5).epsilon(1e-12));
    CHECK(pr.var == doctest::Approx(1.3 - (w0 * k0 + w1 * k1)).epsilon(1e-10));
}

TEST_CASE("adding a training point never increases the variance") {
    std::mt19937_64 rng(14);
    KernelHyperparams p(1.0, Eigen::Vector2d(4.0, 4.0));
    ResidualDataset small = random_dataset(rng, 8, 2, 1);
    ResidualDataset big{Eigen::MatrixXd(9, 2), Eigen::MatrixXd(9, 1)};
    big.inputs << small.inputs, testing::uniform_rows(rng, 1, 2);
    big.residuals << small.residuals, Eigen::MatrixXd::Zero(1, 1);
    TrainedLevel a = TrainedLevel::build(p, small, Eigen::RowVectorXd::Zero(1), 1e-8);
    TrainedLevel b = TrainedLevel::build(p, big, Eigen::RowVectorXd::Zero(1), 1e-8);
    for (int i = 0; i < 100; ++i) {
        Eigen::VectorXd q = testing::uniform_rows(rng, 1, 2).row(0).transpose();
        CHECK(level_predict(b, q).var <= level_predict(a, q).var + 1e-10);
    }
}

TEST_CASE("noisy prediction reductions") {
    ResidualDataset ds{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Constant(1, 1, 2.0)};
    KernelHyperparams p(1.5, Eigen::VectorXd::Ones(1), 1.5);
    TrainedLevel lv = TrainedLevel::build(p, ds, Eigen::RowVectorXd::Zero(1), 0.0);
    LevelPrediction pr = level_predict_noisy(lv, ds.inputs.row(0).transpose());
    CHECK(pr.mean[0] == doctest::Approx(1.0));
    CHECK(pr.var == doctest::Approx(0.75));

    std::mt19937_64 rng(15);
    ResidualDataset r = random_dataset(rng, 5, 1, 1);
    TrainedLevel quiet = TrainedLevel::build(KernelHyperparams(1.0, Eigen::VectorXd::Ones(1)), r,
                                             Eigen::RowVectorXd::Zero(1), 1e-8);
    Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 0.37);
    CHECK(std::abs(level_predict_noisy(quiet, q).mean[0] - level_predict(quiet, q).mean[0]) < 1e-12);
}

TEST_CASE("jitter escalates on duplicated inputs and conditioning failures throw") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Constant(3, 1, 0.5);
    Eigen::MatrixXd k = gram(KernelHyperparams(1.0, Eigen::VectorXd::Ones(1)), x, 0.0);
    LevelFactor f = factorize(k, 1.0, 0.0, Eigen::MatrixXd::Ones(3, 1));
    CHECK(f.jitter > 0.0);
    CHECK(f.jitter <= kMaxJitter);

    Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(factorize(bad, 1.0, 1e-8, Eigen::MatrixXd::Ones(2, 1)), ConditioningError);
}

TEST_CASE("residual dataset validation") {
    ResidualDataset empty{Eigen::MatrixXd(0, 2), Eigen::MatrixXd(0, 1)};
    CHECK_THROWS_AS(empty.validate(), DataError);
    ResidualDataset ragged{Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(2, 1)};
    CHECK_THROWS_AS(ragged.validate(), DimensionError);
    ResidualDataset nan{Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Constant(1, 1, std::nan(""))};
    CHECK_THROWS_AS(nan.validate(), DataError);
}
