#pragma once

#include "empowerd/common.hpp"
#include "empowerd/nn.hpp"

#include <vector>

namespace empowerd {

// One environment step as stored in replay. intrinsic_reward starts at 0 and
// is refreshed by the reward generator when the transition is sampled.
struct Transition {
    Vec obs;
    int action = 0;
    Vec next_obs;
    double extrinsic_reward = 0.0;
    bool terminal = false;
    double intrinsic_reward = 0.0;
};

inline double clip_extrinsic(double r) { return std::min(1.0, std::max(-1.0, r)); }

// Fixed-capacity ring of transitions with FIFO eviction.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity = 1000000) : capacity_(capacity) {
        if (capacity_ == 0) throw InvalidInputError("ReplayBuffer: capacity must be positive");
    }

    size_t capacity() const { return capacity_; }
    size_t size() const { return storage_.size(); }

    void push(Transition t) {
        if (storage_.size() < capacity_) {
            storage_.push_back(std::move(t));
        } else {
            storage_[cursor_] = std::move(t);
        }
        cursor_ = (cursor_ + 1) % capacity_;
    }

    const Transition& at(size_t i) const { return storage_[i]; }
    Transition& at(size_t i) { return storage_[i]; }

    // Uniform sample with replacement; returns indices so callers can write
    // refreshed intrinsic rewards back.
    std::vector<size_t> sample_indices(size_t batch_size, Rng& rng) const {
        if (batch_size > storage_.size())
            throw InvalidStateError("ReplayBuffer: sampling " + std::to_string(batch_size) +
                                    " from " + std::to_string(storage_.size()) + " transitions");
        std::uniform_int_distribution<size_t> pick(0, storage_.size() - 1);
        std::vector<size_t> indices(batch_size);
        for (auto& idx : indices) idx = pick(rng);
        return indices;
    }

private:
    size_t capacity_;
    std::vector<Transition> storage_;
    size_t cursor_ = 0;
};

// Double-DQN agent: online/target networks, epsilon-greedy behavior, TD
// updates with a clamped error seed.
class DqnAgent {
public:
    DqnAgent(int obs_dim, int action_count, Rng& rng, double learning_rate = 1e-4,
             double gamma = 0.99, int sync_period = 2000, int hidden = 128)
        : obs_dim_(obs_dim),
          action_count_(action_count),
          gamma_(gamma),
          sync_period_(sync_period),
          online_(DenseNet::xavier({obs_dim, hidden, hidden, action_count}, rng)),
          target_(online_),
          opt_(online_, learning_rate) {
        if (gamma < 0.0 || gamma > 1.0) throw InvalidInputError("DqnAgent: gamma out of [0,1]");
    }

    // Wraps an existing Q-network (checkpoints, scripted policies in tests).
    DqnAgent(DenseNet online, double learning_rate = 1e-4, double gamma = 0.99,
             int sync_period = 2000)
        : obs_dim_(online.input_size()),
          action_count_(online.output_size()),
          gamma_(gamma),
          sync_period_(sync_period),
          online_(std::move(online)),
          target_(online_),
          opt_(online_, learning_rate) {
        if (gamma < 0.0 || gamma > 1.0) throw InvalidInputError("DqnAgent: gamma out of [0,1]");
    }

    int obs_dim() const { return obs_dim_; }
    int action_count() const { return action_count_; }
    double gamma() const { return gamma_; }
    int sync_period() const { return sync_period_; }
    int steps_since_sync() const { return steps_since_sync_; }
    double epsilon() const { return epsilon_; }
    void set_epsilon(double eps) {
        if (eps < 0.0 || eps > 1.0) throw InvalidInputError("DqnAgent: epsilon out of [0,1]");
        epsilon_ = eps;
    }

    DenseNet& online_net() { return online_; }
    const DenseNet& online_net() const { return online_; }
    DenseNet& target_net() { return target_; }
    const DenseNet& target_net() const { return target_; }
    AdamState& optimizer() { return opt_; }

    Vec q_values(const Vec& obs) const { return forward(online_, obs); }

    // Argmax with ties broken toward the lowest action id.
    static int greedy_action(const Vec& q) {
        int best = 0;
        for (int a = 1; a < q.size(); ++a)
            if (q[a] > q[best]) best = a;
        return best;
    }

    int select_action(const Vec& obs, Rng& rng) const {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        if (unit(rng) < epsilon_) {
            std::uniform_int_distribution<int> pick(0, action_count_ - 1);
            return pick(rng);
        }
        return greedy_action(q_values(obs));
    }

    // Epsilon-greedy action distribution at `obs`; used as the source when
    // marginalizing actions in the reward generator.
    Vec policy_distribution(const Vec& obs) const {
        Vec probs = Vec::Constant(action_count_, epsilon_ / action_count_);
        probs[greedy_action(q_values(obs))] += 1.0 - epsilon_;
        return probs;
    }

    // Bellman target with double-Q action selection: the online net picks the
    // bootstrap action, the target net evaluates it.
    double double_q_target(const Transition& t) const {
        const double reward = clip_extrinsic(t.extrinsic_reward) + t.intrinsic_reward;
        if (t.terminal) return reward;
        const int best = greedy_action(forward(online_, t.next_obs));
        return reward + gamma_ * forward(target_, t.next_obs)[best];
    }

    // One Adam step on the batch TD objective. The per-element error seed at
    // the selected Q-value is clamped to [-1, 1] before backpropagation.
    // Returns the mean squared (unclamped) TD error.
    double td_update(const std::vector<const Transition*>& batch) {
        if (batch.empty()) throw InvalidInputError("td_update: empty batch");
        const int n = static_cast<int>(batch.size());

        Mat obs_rows(n, obs_dim_);
        Mat next_rows(n, obs_dim_);
        for (int i = 0; i < n; ++i) {
            obs_rows.row(i) = batch[i]->obs;
            next_rows.row(i) = batch[i]->next_obs;
        }
        const Mat q_online_next = forward_batch(online_, next_rows);
        const Mat q_target_next = forward_batch(target_, next_rows);
        const Mat q_current = forward_batch(online_, obs_rows);

        Mat seeds = Mat::Zero(n, action_count_);
        double loss = 0.0;
        for (int i = 0; i < n; ++i) {
            const Transition& t = *batch[i];
            double y = clip_extrinsic(t.extrinsic_reward) + t.intrinsic_reward;
            if (!t.terminal) {
                const int best = greedy_action(q_online_next.row(i).transpose());
                y += gamma_ * q_target_next(i, best);
            }
            const double err = q_current(i, t.action) - y;
            loss += err * err;
            seeds(i, t.action) = std::clamp(err, -1.0, 1.0) / n;
        }
        loss /= n;
        if (!std::isfinite(loss)) throw NumericFaultError("td_update: non-finite TD loss");

        auto [grads, unused] = backward_batch(online_, obs_rows, seeds);
        adam_step(online_, opt_, grads);
        steps_since_sync_ += 1;
        return loss;
    }

    void sync_target() {
        target_ = online_;
        steps_since_sync_ = 0;
    }

private:
    int obs_dim_;
    int action_count_;
    double gamma_;
    int sync_period_;
    double epsilon_ = 1.0;
    int steps_since_sync_ = 0;
    DenseNet online_;
    DenseNet target_;
    AdamState opt_;
};

}  // namespace empowerd
