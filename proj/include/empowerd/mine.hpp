#pragma once

#include "empowerd/common.hpp"
#include "empowerd/dynamics.hpp"
#include "empowerd/nn.hpp"

#include <algorithm>
#include <vector>

namespace empowerd {

// One Donsker-Varadhan evaluation. bound_nats = joint_term - log_marginal_term
// holds exactly by construction.
struct DvEstimate {
    double bound_nats = 0.0;
    double joint_term = 0.0;
    double log_marginal_term = 0.0;
};

// log((1/n) sum exp(v_i)) with max-subtraction, safe for |v| up to ~700.
inline double log_mean_exp(const Vec& values) {
    if (values.size() == 0) throw InvalidInputError("log_mean_exp: empty input");
    const double vmax = values.maxCoeff();
    const double sum = (values.array() - vmax).exp().sum();
    return vmax + std::log(sum / static_cast<double>(values.size()));
}

// Weighted variant: log(sum w_i exp(v_i)) with sum w_i = 1.
inline double log_weighted_mean_exp(const Vec& values, const Vec& weights) {
    const double vmax = values.maxCoeff();
    const double sum = (weights.array() * (values.array() - vmax).exp()).sum();
    return vmax + std::log(sum);
}

// Statistics network T plus its optimizer and the moving-average denominator
// used for bias-corrected DV gradients. The network scores rows built by the
// caller (for the agent: enc_s | one-hot action | enc_s'), output size 1.
class DvEstimator {
public:
    DvEstimator(int input_dim, Rng& rng, double learning_rate = 1e-3, int hidden = 128,
                bool ema_correction = true, double ema_rate = 0.01)
        : net_(DenseNet::xavier({input_dim, hidden, hidden, 1}, rng)),
          opt_(net_, learning_rate),
          ema_correction_(ema_correction),
          ema_rate_(ema_rate) {
        if (!(ema_rate > 0.0 && ema_rate < 1.0))
            throw InvalidInputError("DvEstimator: ema_rate must be in (0,1)");
    }

    DvEstimator(DenseNet net, double learning_rate = 1e-3, bool ema_correction = true,
                double ema_rate = 0.01)
        : net_(std::move(net)), opt_(net_, learning_rate), ema_correction_(ema_correction),
          ema_rate_(ema_rate) {
        if (net_.output_size() != 1)
            throw InvalidInputError("DvEstimator: statistics network must output a scalar");
    }

    int input_dim() const { return net_.input_size(); }
    const DenseNet& net() const { return net_; }
    DenseNet& net() { return net_; }
    AdamState& optimizer() { return opt_; }
    double ema_denominator() const { return ema_denominator_; }

    double statistic(const Vec& input) const { return forward(net_, input)[0]; }

    Vec statistics(const Mat& input_rows) const { return forward_batch(net_, input_rows); }

    // DV lower bound on the mutual information: mean_joint(T) minus
    // log-mean-exp of T over the marginal batch.
    DvEstimate bound(const Mat& joint_rows, const Mat& marginal_rows) const {
        if (joint_rows.rows() == 0 || marginal_rows.rows() == 0)
            throw InvalidInputError("dv_bound: empty batch");
        const Vec t_joint = statistics(joint_rows);
        const Vec t_marginal = statistics(marginal_rows);
        DvEstimate est;
        est.joint_term = t_joint.mean();
        est.log_marginal_term = log_mean_exp(t_marginal);
        est.bound_nats = est.joint_term - est.log_marginal_term;
        return est;
    }

    // One Adam ascent step on the bound; returns the pre-update estimate.
    // With ema correction the marginal-term gradient is scaled by
    // (batch mean of e^T) / ema_denominator, i.e. the small-batch denominator
    // in the log-term gradient is replaced by the moving average.
    DvEstimate update(const Mat& joint_rows, const Mat& marginal_rows) {
        if (joint_rows.rows() == 0 || marginal_rows.rows() == 0)
            throw InvalidInputError("dv_update: empty batch");
        const int m = static_cast<int>(joint_rows.rows());
        const int k = static_cast<int>(marginal_rows.rows());

        const Vec t_joint = statistics(joint_rows);
        const Vec t_marginal = statistics(marginal_rows);
        DvEstimate est;
        est.joint_term = t_joint.mean();
        est.log_marginal_term = log_mean_exp(t_marginal);
        est.bound_nats = est.joint_term - est.log_marginal_term;
        if (!std::isfinite(est.bound_nats))
            throw NumericFaultError("dv_update: non-finite bound, step aborted");

        const Vec exp_t = t_marginal.array().exp();
        const double batch_mean_exp = exp_t.mean();
        const double denom = ema_correction_ ? ema_denominator_ : batch_mean_exp;

        // Seeds for minimizing -bound: joint rows get -1/m, marginal rows get
        // +e^{T_j} / (k * denom).
        Mat inputs(m + k, net_.input_size());
        inputs.topRows(m) = joint_rows;
        inputs.bottomRows(k) = marginal_rows;
        Mat seeds(m + k, 1);
        seeds.topRows(m).setConstant(-1.0 / m);
        seeds.bottomRows(k) = exp_t / (static_cast<double>(k) * denom);

        auto [grads, unused] = backward_batch(net_, inputs, seeds);
        adam_step(net_, opt_, grads);

        if (ema_correction_ && std::isfinite(batch_mean_exp))
            ema_denominator_ = (1.0 - ema_rate_) * ema_denominator_ + ema_rate_ * batch_mean_exp;
        return est;
    }

private:
    DenseNet net_;
    AdamState opt_;
    bool ema_correction_;
    double ema_rate_;
    double ema_denominator_ = 1.0;
};

// T over (enc_s, one-hot action, enc_s') triples; the agent-facing statistics
// network with the row layout baked in.
class StatisticsNetwork {
public:
    StatisticsNetwork(int feature_dim, int action_count, Rng& rng, double learning_rate = 1e-3,
                      int hidden = 128, bool ema_correction = true, double ema_rate = 0.01)
        : feature_dim_(feature_dim),
          action_count_(action_count),
          estimator_(2 * feature_dim + action_count, rng, learning_rate, hidden, ema_correction,
                     ema_rate) {}

    StatisticsNetwork(int feature_dim, int action_count, DenseNet net,
                      double learning_rate = 1e-3)
        : feature_dim_(feature_dim), action_count_(action_count),
          estimator_(std::move(net), learning_rate) {
        if (estimator_.input_dim() != 2 * feature_dim + action_count)
            throw InvalidInputError("StatisticsNetwork: net input does not match triple layout");
    }

    int feature_dim() const { return feature_dim_; }
    int action_count() const { return action_count_; }
    DvEstimator& estimator() { return estimator_; }
    const DvEstimator& estimator() const { return estimator_; }

    Vec triple_row(const Vec& enc_state, int action, const Vec& enc_next) const {
        if (enc_state.size() != feature_dim_ || enc_next.size() != feature_dim_)
            throw InvalidInputError("StatisticsNetwork: encoding length mismatch");
        if (action < 0 || action >= action_count_)
            throw InvalidInputError("StatisticsNetwork: action out of range");
        Vec row = Vec::Zero(2 * feature_dim_ + action_count_);
        row.head(feature_dim_) = enc_state;
        row[feature_dim_ + action] = 1.0;
        row.tail(feature_dim_) = enc_next;
        return row;
    }

    double value(const Vec& enc_state, int action, const Vec& enc_next) const {
        return estimator_.statistic(triple_row(enc_state, action, enc_next));
    }

    DvEstimate bound(const Mat& joint_rows, const Mat& marginal_rows) const {
        return estimator_.bound(joint_rows, marginal_rows);
    }

    DvEstimate update(const Mat& joint_rows, const Mat& marginal_rows) {
        return estimator_.update(joint_rows, marginal_rows);
    }

private:
    int feature_dim_;
    int action_count_;
    DvEstimator estimator_;
};

// Single-transition DV estimate: the real (s, a, s') triple is the one joint
// sample; the marginal term aggregates K samples with the action resampled
// from `action_probs`. The successor for a resampled action comes from the
// forward model, except when it coincides with the transition's own action:
// there the real e(s') is an exact sample of p(s'|s,a), and keeping it in the
// marginal gives the two batches common support, which bounds the estimate by
// ln(1/pi(a|s)) instead of letting T drive it to infinity on model artifacts.
// Draws K actions from the rng; T is evaluated once per distinct drawn action
// and the log-mean-exp is weighted by the draw counts.
inline double dv_single_transition(const StatisticsNetwork& stats, const ForwardModel& model,
                                   const Vec& enc_state, int action, const Vec& enc_next,
                                   const Vec& action_probs, int marginal_samples, Rng& rng) {
    if (marginal_samples <= 0)
        throw InvalidInputError("dv_single_transition: need at least one marginal sample");
    check_distribution(action_probs, "dv_single_transition");

    std::vector<int> counts(stats.action_count(), 0);
    for (int i = 0; i < marginal_samples; ++i) counts[sample_categorical(action_probs, rng)]++;

    int distinct = 0;
    for (int c : counts) distinct += c > 0 ? 1 : 0;

    const Mat predictions = model.predict_all_actions(enc_state);
    Mat rows(1 + distinct, 2 * stats.feature_dim() + stats.action_count());
    rows.row(0) = stats.triple_row(enc_state, action, enc_next);
    Vec weights(distinct);
    int r = 0;
    for (int a = 0; a < stats.action_count(); ++a) {
        if (counts[a] == 0) continue;
        const Vec successor =
            a == action ? enc_next : Vec(predictions.row(a).transpose());
        rows.row(1 + r) = stats.triple_row(enc_state, a, successor);
        weights[r] = static_cast<double>(counts[a]) / marginal_samples;
        ++r;
    }
    const Vec t_values = stats.estimator().statistics(rows);
    const double joint_term = t_values[0];
    const double log_marginal = log_weighted_mean_exp(t_values.tail(distinct), weights);
    return joint_term - log_marginal;
}

// Intrinsic reward for one transition: beta times the clamped DV estimate.
// The floor keeps estimator noise from punishing the agent (the true mutual
// information is nonnegative); the ceiling is the channel-capacity bound
// ln(action_count), which no true 1-step estimate can exceed.
inline double intrinsic_reward(const StatisticsNetwork& stats, const ForwardModel& model,
                               const Vec& enc_state, int action, const Vec& enc_next,
                               const Vec& action_probs, double beta, int marginal_samples,
                               Rng& rng) {
    if (beta < 0.0) throw InvalidInputError("intrinsic_reward: beta must be nonnegative");
    const double estimate = dv_single_transition(stats, model, enc_state, action, enc_next,
                                                 action_probs, marginal_samples, rng);
    if (!std::isfinite(estimate))
        throw NumericFaultError("intrinsic_reward: non-finite estimate");
    const double cap = std::log(static_cast<double>(stats.action_count()));
    return beta * std::clamp(estimate, 0.0, cap);
}

}  // namespace empowerd
