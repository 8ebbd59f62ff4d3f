#pragma once

#include "empowerd/common.hpp"
#include "empowerd/nn.hpp"

#include <vector>

namespace empowerd {

// One (encoded state, action, encoded next state) training element for the
// forward model.
struct DynamicsSample {
    Vec enc_state;
    int action = 0;
    Vec enc_next;
};

// Forward dynamics model f: predicts the next state's feature encoding from
// the current encoding and a one-hot action. Deterministic point prediction;
// the marginal over next encodings is realized by randomizing the action.
class ForwardModel {
public:
    ForwardModel(int feature_dim, int action_count, Rng& rng, double learning_rate = 1e-2,
                 int hidden = 128)
        : feature_dim_(feature_dim),
          action_count_(action_count),
          net_(DenseNet::xavier({feature_dim + action_count, hidden, hidden, feature_dim}, rng)),
          opt_(net_, learning_rate) {}

    ForwardModel(DenseNet net, int feature_dim, int action_count, double learning_rate = 1e-2)
        : feature_dim_(feature_dim), action_count_(action_count), net_(std::move(net)),
          opt_(net_, learning_rate) {
        if (net_.input_size() != feature_dim + action_count ||
            net_.output_size() != feature_dim)
            throw InvalidInputError("ForwardModel: net shape does not match dimensions");
    }

    int feature_dim() const { return feature_dim_; }
    int action_count() const { return action_count_; }
    const DenseNet& net() const { return net_; }
    DenseNet& net() { return net_; }

    Vec input_row(const Vec& enc_state, int action) const {
        if (enc_state.size() != feature_dim_)
            throw InvalidInputError("ForwardModel: encoding length mismatch");
        if (action < 0 || action >= action_count_)
            throw InvalidInputError("ForwardModel: action out of range");
        Vec row = Vec::Zero(feature_dim_ + action_count_);
        row.head(feature_dim_) = enc_state;
        row[feature_dim_ + action] = 1.0;
        return row;
    }

    Vec predict_next(const Vec& enc_state, int action) const {
        return forward(net_, input_row(enc_state, action));
    }

    // Predictions for every action from one state, rows indexed by action.
    Mat predict_all_actions(const Vec& enc_state) const {
        Mat inputs(action_count_, feature_dim_ + action_count_);
        for (int a = 0; a < action_count_; ++a) inputs.row(a) = input_row(enc_state, a);
        return forward_batch(net_, inputs);
    }

    // Draws an action from `action_probs` and returns the model's prediction
    // for it. Consumes exactly one rng draw.
    Vec sample_marginal_next(const Vec& enc_state, const Vec& action_probs, Rng& rng) const {
        if (action_probs.size() != action_count_)
            throw InvalidInputError("sample_marginal_next: distribution size mismatch");
        check_distribution(action_probs, "sample_marginal_next");
        const int action = sample_categorical(action_probs, rng);
        return predict_next(enc_state, action);
    }

    // One Adam step on the mean (over the batch) squared L2 prediction error.
    // Returns the pre-update loss.
    double update(const std::vector<DynamicsSample>& batch) {
        if (batch.empty()) throw InvalidInputError("dynamics update: empty batch");
        const int n = static_cast<int>(batch.size());
        Mat inputs(n, feature_dim_ + action_count_);
        Mat targets(n, feature_dim_);
        for (int i = 0; i < n; ++i) {
            inputs.row(i) = input_row(batch[i].enc_state, batch[i].action);
            if (batch[i].enc_next.size() != feature_dim_)
                throw InvalidInputError("dynamics update: target length mismatch");
            targets.row(i) = batch[i].enc_next;
        }
        const Mat preds = forward_batch(net_, inputs);
        const Mat residual = preds - targets;
        const double loss = residual.rowwise().squaredNorm().mean();
        if (!std::isfinite(loss))
            throw NumericFaultError("dynamics update: non-finite loss, step aborted");
        const Mat seeds = (2.0 / n) * residual;
        auto [grads, unused] = backward_batch(net_, inputs, seeds);
        adam_step(net_, opt_, grads);
        return loss;
    }

    AdamState& optimizer() { return opt_; }
    const AdamState& optimizer() const { return opt_; }

private:
    int feature_dim_;
    int action_count_;
    DenseNet net_;
    AdamState opt_;
};

}  // namespace empowerd
