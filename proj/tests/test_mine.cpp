#include "empowerd/mine.hpp"

#include "empowerd/env.hpp"
#include "empowerd/mi_bench.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace empowerd;

namespace {

// T(x) = x for 1-dimensional rows; handy for exact arithmetic cases.
DvEstimator identity_estimator() {
    DenseNet net = DenseNet::zeros({1, 1});
    net.weights[0](0, 0) = 1.0;
    return DvEstimator(std::move(net));
}

Mat rows_of(std::initializer_list<double> values) {
    Mat rows(static_cast<int>(values.size()), 1);
    int i = 0;
    for (double v : values) rows(i++, 0) = v;
    return rows;
}

}  // namespace

TEST_CASE("zero-initialized statistics network scores zero deterministically") {
    Rng rng(1);
    StatisticsNetwork stats(8, 3, DenseNet::zeros({19, 4, 1}));
    const Vec enc = Vec::Ones(8);
    REQUIRE(stats.value(enc, 1, enc) == 0.0);
    REQUIRE(stats.value(enc, 1, enc) == stats.value(enc, 1, enc));
}

TEST_CASE("a constant statistic gives a bound of exactly zero") {
    DvEstimator constant(DenseNet::zeros({3, 1}));
    constant.net().biases[0][0] = 2.5;
    const Mat joint = Mat::Random(7, 3), marginal = Mat::Random(13, 3);
    const DvEstimate est = constant.bound(joint, marginal);
    REQUIRE(est.bound_nats == 0.0);
    REQUIRE(est.joint_term == 2.5);
}

TEST_CASE("two-point arithmetic case") {
    DvEstimator t = identity_estimator();
    const DvEstimate est = t.bound(rows_of({1.0, 1.0}), rows_of({0.0, 0.0}));
    REQUIRE(est.joint_term == 1.0);
    REQUIRE(est.log_marginal_term == 0.0);
    REQUIRE(est.bound_nats == 1.0);
}

TEST_CASE("the estimate identity holds exactly") {
    Rng rng(3);
    DvEstimator t(4, rng);
    const Mat joint = Mat::Random(9, 4), marginal = Mat::Random(17, 4);
    const DvEstimate est = t.bound(joint, marginal);
    REQUIRE(est.bound_nats == est.joint_term - est.log_marginal_term);
}

TEST_CASE("the bound cancels a constant shift of the statistic") {
    Rng rng(5);
    DvEstimator t(6, rng);
    const Mat joint = Mat::Random(11, 6), marginal = Mat::Random(19, 6);
    const double base = t.bound(joint, marginal).bound_nats;
    for (double shift : {5.0, -3.0, 250.0}) {
        DvEstimator shifted = t;
        shifted.net().biases.back()[0] += shift;
        REQUIRE(shifted.bound(joint, marginal).bound_nats ==
                Catch::Approx(base).margin(1e-9));
    }
}

TEST_CASE("log-mean-exp survives statistics up to magnitude 700") {
    DvEstimator t = identity_estimator();
    for (double scale : {700.0, -700.0}) {
        const DvEstimate est = t.bound(rows_of({scale}), rows_of({scale, scale - 1.0}));
        REQUIRE(std::isfinite(est.bound_nats));
        REQUIRE(std::isfinite(est.log_marginal_term));
    }
    REQUIRE(log_mean_exp(rows_of({700.0, 700.0}).col(0)) == Catch::Approx(700.0).margin(1e-12));
}

TEST_CASE("empty batches are rejected") {
    Rng rng(7);
    DvEstimator t(2, rng);
    const Mat empty(0, 2), some = Mat::Random(3, 2);
    REQUIRE_THROWS_AS(t.bound(empty, some), InvalidInputError);
    REQUIRE_THROWS_AS(t.bound(some, empty), InvalidInputError);
    REQUIRE_THROWS_AS(t.update(empty, some), InvalidInputError);
}

TEST_CASE("a zero network on identical batches is a stationary point") {
    DvEstimator t(DenseNet::zeros({5, 8, 1}));
    const DenseNet before = t.net();
    // Identical power-of-two batches: the +-1/n seed sums cancel exactly.
    const Mat batch = Mat::Random(8, 5);
    const DvEstimate est = t.update(batch, batch);
    REQUIRE(est.bound_nats == 0.0);
    for (size_t k = 0; k < before.weights.size(); ++k) {
        REQUIRE(t.net().weights[k] == before.weights[k]);
        REQUIRE(t.net().biases[k] == before.biases[k]);
    }
}

TEST_CASE("the moving-average denominator tracks the batch mean of e^T") {
    DvEstimator t = identity_estimator();
    REQUIRE(t.ema_denominator() == 1.0);
    t.update(rows_of({0.0}), rows_of({2.0}));
    REQUIRE(t.ema_denominator() ==
            Catch::Approx(0.99 * 1.0 + 0.01 * std::exp(2.0)).margin(1e-12));
}

TEST_CASE("updates climb the bound on a separable toy problem") {
    // Joint mass at +1, marginal mass at -1; T can grow the gap indefinitely,
    // so a few hundred ascent steps must increase the bound.
    Rng rng(9);
    DvEstimator t(1, rng, 1e-3, 16);
    const Mat joint = rows_of({1.0, 1.0, 1.0});
    const Mat marginal = rows_of({-1.0, -1.0, -1.0});
    const double initial = t.bound(joint, marginal).bound_nats;
    for (int i = 0; i < 500; ++i) t.update(joint, marginal);
    REQUIRE(t.bound(joint, marginal).bound_nats > initial + 0.5);
}

TEST_CASE("trained discriminator separates joint from marginal samples") {
    const MiBenchResult r = run_mi_benchmark(0.9, 1500, 128, /*seed=*/4, /*hidden=*/64);
    GaussianPairSource source(0.9, 99);
    Rng rng(11);
    DvEstimator t(2, rng, 1e-3, 64);
    // Retrain locally to inspect scores (the benchmark returns only bounds).
    GaussianPairSource train_src(0.9, 4);
    for (int step = 0; step < 1500; ++step) {
        const Mat joint = train_src.sample(128);
        const Mat mx = train_src.sample(128), my = train_src.sample(128);
        Mat marginal(128, 2);
        marginal.col(0) = mx.col(0);
        marginal.col(1) = my.col(1);
        t.update(joint, marginal);
    }
    const Mat joint = source.sample(4096);
    const Mat mx = source.sample(4096), my = source.sample(4096);
    Mat marginal(4096, 2);
    marginal.col(0) = mx.col(0);
    marginal.col(1) = my.col(1);
    REQUIRE(t.statistics(joint).mean() > t.statistics(marginal).mean() + 0.1);
    REQUIRE(r.estimate_nats > 0.2);  // well on the way toward 0.83 nats
}

TEST_CASE("short independence run stays near zero") {
    const MiBenchResult r = run_mi_benchmark(0.0, 2000, 64, /*seed=*/6, /*hidden=*/64);
    REQUIRE(r.analytic_nats == 0.0);
    REQUIRE(std::abs(r.estimate_nats) < 0.05);
}

TEST_CASE("intrinsic reward is zero for beta zero and for a zero statistic") {
    Rng rng(13);
    ForwardModel model(8, 4, rng, 1e-2, 8);
    StatisticsNetwork zero_stats(8, 4, DenseNet::zeros({20, 4, 1}));
    const Vec enc = Vec::Ones(8), probs = Vec::Constant(4, 0.25);

    Rng draw(1);
    REQUIRE(intrinsic_reward(zero_stats, model, enc, 0, enc, probs, 0.1, 16, draw) == 0.0);

    Rng rng2(15);
    StatisticsNetwork stats(8, 4, rng2);
    Rng draw2(1);
    REQUIRE(intrinsic_reward(stats, model, enc, 0, enc, probs, 0.0, 16, draw2) == 0.0);
}

TEST_CASE("intrinsic reward is nonnegative for arbitrary networks") {
    Rng rng(17);
    ForwardModel model(8, 4, rng, 1e-2, 16);
    StatisticsNetwork stats(8, 4, rng, 1e-3, 16);
    std::normal_distribution<double> normal(0.0, 1.0);
    Rng draw(3);
    for (int trial = 0; trial < 200; ++trial) {
        Vec enc_s(8), enc_next(8);
        for (int j = 0; j < 8; ++j) {
            enc_s[j] = 3.0 * normal(rng);
            enc_next[j] = 3.0 * normal(rng);
        }
        const double r = intrinsic_reward(stats, model, enc_s, trial % 4, enc_next,
                                          Vec::Constant(4, 0.25), 0.1, 16, draw);
        REQUIRE(r >= 0.0);
    }
}

TEST_CASE("single-transition estimate equals the explicit K-sample computation") {
    Rng rng(19);
    ForwardModel model(6, 3, rng, 1e-2, 8);
    StatisticsNetwork stats(6, 3, rng, 1e-3, 8);
    const Vec enc_s = Vec::Ones(6), enc_next = Vec::Constant(6, -0.5);
    const Vec probs = Vec::Constant(3, 1.0 / 3.0);

    Rng draw_a(23);
    const double fast =
        dv_single_transition(stats, model, enc_s, 1, enc_next, probs, 32, draw_a);

    // Reference path: literally evaluate T on each of the K sampled marginal
    // triples (real successor for the transition's own action, model
    // prediction otherwise) and take log-mean-exp.
    Rng draw_b(23);
    Vec t_values(32);
    for (int k = 0; k < 32; ++k) {
        const int action = sample_categorical(probs, draw_b);
        const Vec successor = action == 1 ? enc_next : model.predict_next(enc_s, action);
        t_values[k] = stats.value(enc_s, action, successor);
    }
    const double reference = stats.value(enc_s, 1, enc_next) - log_mean_exp(t_values);
    REQUIRE(fast == Catch::Approx(reference).margin(1e-9));
}
