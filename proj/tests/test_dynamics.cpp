#include "empowerd/dynamics.hpp"

#include "empowerd/encoder.hpp"
#include "empowerd/env.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace empowerd;

namespace {

// All 100 deterministic (enc_s, a, enc_s') triples of the open 5x5 grid.
std::vector<DynamicsSample> grid_transition_set(const RandomEncoder& encoder) {
    GridRooms env(builtin_layout("open5x5"));
    const GridTabular tab = env.to_tabular();
    std::vector<DynamicsSample> samples;
    for (int s = 0; s < tab.mdp.state_count; ++s) {
        const Vec enc_s = encoder.encode(
            env.make_observation(tab.state_row[s], tab.state_col[s], tab.state_has_key[s]));
        for (int a = 0; a < 4; ++a) {
            int next = 0;
            Vec row = tab.mdp.transition[s].row(a).transpose();
            row.maxCoeff(&next);
            samples.push_back({enc_s, a,
                               encoder.encode(env.make_observation(
                                   tab.state_row[next], tab.state_col[next],
                                   tab.state_has_key[next]))});
        }
    }
    return samples;
}

double batch_loss(const ForwardModel& model, const std::vector<DynamicsSample>& batch) {
    double loss = 0.0;
    for (const auto& s : batch)
        loss += (model.predict_next(s.enc_state, s.action) - s.enc_next).squaredNorm();
    return loss / batch.size();
}

}  // namespace

TEST_CASE("zero-initialized model predicts the zero vector") {
    ForwardModel model(DenseNet::zeros({68, 16, 64}), 64, 4);
    REQUIRE(model.predict_next(Vec::Ones(64), 2).isZero(0.0));

    Rng rng(1);
    const Vec uniform = Vec::Constant(4, 0.25);
    REQUIRE(model.sample_marginal_next(Vec::Ones(64), uniform, rng).isZero(0.0));
}

TEST_CASE("a single transition can be overfit to tight tolerance") {
    Rng rng(21);
    ForwardModel model(64, 4, rng, 1e-2, 64);
    RandomEncoder encoder(26, 5);
    Vec obs = Vec::Zero(26), next_obs = Vec::Zero(26);
    obs[3] = 1.0;
    next_obs[4] = 1.0;
    const DynamicsSample sample{encoder.encode(obs), 1, encoder.encode(next_obs)};

    double l2 = 1e9;
    for (int i = 0; i < 3000 && l2 >= 1e-2; ++i) {
        model.update({sample});
        l2 = (model.predict_next(sample.enc_state, sample.action) - sample.enc_next).norm();
    }
    REQUIRE(l2 < 1e-2);
}

TEST_CASE("perfect predictions give zero loss and leave parameters fixed") {
    Rng rng(31);
    ForwardModel model(8, 3, rng, 1e-2, 16);
    std::vector<DynamicsSample> batch;
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat inputs(5, 8 + 3);
    for (int i = 0; i < 5; ++i) {
        Vec enc(8);
        for (int j = 0; j < 8; ++j) enc[j] = normal(rng);
        batch.push_back({enc, i % 3, Vec::Zero(8)});
        inputs.row(i) = model.input_row(enc, i % 3);
    }
    // Targets from the same batched forward pass the update will run, so the
    // residual is exactly zero.
    const Mat targets = forward_batch(model.net(), inputs);
    for (int i = 0; i < 5; ++i) batch[i].enc_next = targets.row(i).transpose();

    const DenseNet before = model.net();
    REQUIRE(model.update(batch) == 0.0);
    for (size_t k = 0; k < before.weights.size(); ++k)
        REQUIRE(model.net().weights[k] == before.weights[k]);
}

TEST_CASE("unit residual on one element gives loss exactly 1") {
    ForwardModel model(DenseNet::zeros({68, 64}), 64, 4);
    model.net().biases[0][0] = 1.0;  // prediction [1, 0, ..., 0]
    const double loss = model.update({DynamicsSample{Vec::Zero(64), 0, Vec::Zero(64)}});
    REQUIRE(loss == 1.0);
}

TEST_CASE("training on the 5x5 grid cuts the loss by 10x") {
    Rng rng(41);
    RandomEncoder encoder(26, 3);
    ForwardModel model(64, 4, rng, 1e-2, 128);
    const std::vector<DynamicsSample> samples = grid_transition_set(encoder);

    const double initial = batch_loss(model, samples);
    std::uniform_int_distribution<size_t> pick(0, samples.size() - 1);
    for (int step = 0; step < 2000; ++step) {
        std::vector<DynamicsSample> batch;
        for (int i = 0; i < 64; ++i) batch.push_back(samples[pick(rng)]);
        model.update(batch);
    }
    const double final_loss = batch_loss(model, samples);
    INFO("loss " << initial << " -> " << final_loss);
    REQUIRE(final_loss < 0.1 * initial);

    // Different actions from the same trained state give different
    // predictions (their true successors differ).
    GridRooms env(builtin_layout("open5x5"));
    const Vec center = encoder.encode(env.make_observation(2, 2, false));
    REQUIRE((model.predict_next(center, kUp) - model.predict_next(center, kDown)).norm() > 0.3);
}

TEST_CASE("update rejects empty batches and non-finite targets") {
    Rng rng(51);
    ForwardModel model(8, 2, rng, 1e-2, 8);
    REQUIRE_THROWS_AS(model.update({}), InvalidInputError);
    Vec bad = Vec::Constant(8, std::numeric_limits<double>::infinity());
    REQUIRE_THROWS_AS(model.update({DynamicsSample{Vec::Zero(8), 0, bad}}),
                      NumericFaultError);
}

TEST_CASE("a point-mass sampler reduces to predict_next") {
    Rng rng(61), draw(1);
    ForwardModel model(16, 3, rng, 1e-2, 16);
    Vec probs = Vec::Zero(3);
    probs[2] = 1.0;
    const Vec enc = Vec::Ones(16);
    REQUIRE(model.sample_marginal_next(enc, probs, draw) == model.predict_next(enc, 2));
}

TEST_CASE("invalid action distributions are rejected") {
    Rng rng(71), draw(1);
    ForwardModel model(8, 2, rng, 1e-2, 8);
    Vec short_sum(2), negative(2);
    short_sum << 0.4, 0.4;
    negative << 1.5, -0.5;
    REQUIRE_THROWS_AS(model.sample_marginal_next(Vec::Zero(8), short_sum, draw),
                      InvalidInputError);
    REQUIRE_THROWS_AS(model.sample_marginal_next(Vec::Zero(8), negative, draw),
                      InvalidInputError);
}

TEST_CASE("uniform action draws hit each branch half the time") {
    // A linear model whose first output coordinate identifies the action.
    ForwardModel model(DenseNet::zeros({66, 64}), 64, 2);
    model.net().weights[0](0, 64) = 1.0;
    model.net().weights[0](0, 65) = 2.0;
    Rng rng(81);
    const Vec uniform = Vec::Constant(2, 0.5);
    const Vec enc = Vec::Zero(64);
    int first = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i)
        if (model.sample_marginal_next(enc, uniform, rng)[0] == 1.0) ++first;
    REQUIRE(std::abs(first / static_cast<double>(n) - 0.5) < 0.01);
}

TEST_CASE("marginal draws are reproducible under a fixed seed") {
    Rng rng_net(91);
    ForwardModel model(8, 4, rng_net, 1e-2, 8);
    const Vec probs = Vec::Constant(4, 0.25);
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i)
        REQUIRE(model.sample_marginal_next(Vec::Ones(8), probs, a) ==
                model.sample_marginal_next(Vec::Ones(8), probs, b));
}

TEST_CASE("a tiny learning rate never increases the loss on the update batch") {
    Rng rng(101);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        ForwardModel model(12, 3, rng, 1e-4, 32);
        std::vector<DynamicsSample> batch;
        for (int i = 0; i < 16; ++i) {
            Vec enc(12), target(12);
            for (int j = 0; j < 12; ++j) {
                enc[j] = normal(rng);
                target[j] = normal(rng);
            }
            batch.push_back({enc, i % 3, target});
        }
        const double before = model.update(batch);
        REQUIRE(batch_loss(model, batch) <= before + 1e-12);
    }
}
