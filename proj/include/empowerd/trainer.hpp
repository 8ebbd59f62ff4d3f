#pragma once

#include "empowerd/agent.hpp"
#include "empowerd/config.hpp"
#include "empowerd/dynamics.hpp"
#include "empowerd/encoder.hpp"
#include "empowerd/env.hpp"
#include "empowerd/mine.hpp"
#include "empowerd/oracle.hpp"
#include "empowerd/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace empowerd {

struct MetricsRow {
    long step = 0;
    long episode = 0;
    double episodic_extrinsic_return = 0.0;
    double mean_intrinsic_reward = 0.0;
    double dv_bound_nats = 0.0;
    double dynamics_loss = 0.0;
    double td_loss = 0.0;
    double epsilon = 0.0;
};

struct RunSummary {
    long steps = 0;
    long episodes = 0;
    long updates = 0;       // update cycles performed (td updates)
    long target_syncs = 0;
    size_t buffer_size = 0;
    double final_epsilon = 0.0;
    std::vector<double> episode_returns;  // extrinsic return per completed episode
    std::string metrics_path;
    std::string checkpoint_dir;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline void write_metrics_header(std::ofstream& out) {
    out << "step,episode,episodic_extrinsic_return,mean_intrinsic_reward,dv_bound_nats,"
           "dynamics_loss,td_loss,epsilon\n";
}

inline void write_metrics_row(std::ofstream& out, const MetricsRow& row) {
    out << row.step << ',' << row.episode << ',' << format_double(row.episodic_extrinsic_return)
        << ',' << format_double(row.mean_intrinsic_reward) << ','
        << format_double(row.dv_bound_nats) << ',' << format_double(row.dynamics_loss) << ','
        << format_double(row.td_loss) << ',' << format_double(row.epsilon) << '\n';
}

}  // namespace detail

// Everything a run needs at inference time, rebuilt by load_checkpoint.
struct Checkpoint {
    RunConfig config;
    DenseNet q_online;
    DenseNet q_target;
    DenseNet dynamics_net;
    DenseNet statistics_net;
    DenseNet encoder_net;  // single linear layer holding the projection
    uint64_t encoder_seed = 0;
    long steps = 0;
    long episodes = 0;
    long updates = 0;
    double final_epsilon = 0.0;
};

inline void save_checkpoint(const std::string& dir, const RunConfig& config,
                            const DqnAgent& agent, const ForwardModel& model,
                            const StatisticsNetwork& stats, const RandomEncoder& encoder,
                            uint64_t encoder_seed, const RunSummary& summary) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_net(agent.online_net(), dir + "/q_online.net");
    save_net(agent.target_net(), dir + "/q_target.net");
    save_net(model.net(), dir + "/dynamics.net");
    save_net(stats.estimator().net(), dir + "/statistics.net");
    save_net(encoder.as_net(), dir + "/encoder.net");

    nlohmann::json side;
    side["format"] = 1;
    side["env"] = config.env;
    side["total_steps"] = config.total_steps;
    side["warmup_steps"] = config.warmup_steps;
    side["batch_size"] = config.batch_size;
    side["inner_loop_m"] = config.inner_loop_m;
    side["lr_dynamics"] = config.lr_dynamics;
    side["lr_statistics"] = config.lr_statistics;
    side["lr_policy"] = config.lr_policy;
    side["gamma"] = config.gamma;
    side["beta"] = config.beta;
    side["sync_period"] = config.sync_period;
    side["buffer_capacity"] = config.buffer_capacity;
    side["eps_start"] = config.eps_start;
    side["eps_final"] = config.eps_final;
    side["eps_decay_frac"] = config.eps_decay_frac;
    side["encoder_dim"] = config.encoder_dim;
    side["marginal_samples_k"] = config.marginal_samples_k;
    side["seed"] = config.seed;
    side["intrinsic_mode"] = config.intrinsic_mode;
    side["marginal_mode"] = config.marginal_mode;
    side["ema_correction"] = config.ema_correction;
    side["ema_rate"] = config.ema_rate;
    side["slip"] = config.slip;
    side["max_steps"] = config.max_steps;
    side["metrics_every"] = config.metrics_every;
    side["hidden_width"] = config.hidden_width;
    side["encoder_seed"] = encoder_seed;
    side["steps"] = summary.steps;
    side["episodes"] = summary.episodes;
    side["updates"] = summary.updates;
    side["final_epsilon"] = summary.final_epsilon;
    std::ofstream out(dir + "/checkpoint.json");
    out << side.dump(2) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& dir) {
    std::ifstream in(dir + "/checkpoint.json");
    if (!in) throw InvalidInputError("load_checkpoint: cannot open " + dir + "/checkpoint.json");
    nlohmann::json side;
    try {
        in >> side;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError(std::string("load_checkpoint: bad sidecar: ") + e.what());
    }
    Checkpoint ck;
    try {
        RunConfig& c = ck.config;
        c.env = side.at("env").get<std::string>();
        c.total_steps = side.at("total_steps").get<long>();
        c.warmup_steps = side.at("warmup_steps").get<long>();
        c.batch_size = side.at("batch_size").get<int>();
        c.inner_loop_m = side.at("inner_loop_m").get<int>();
        c.lr_dynamics = side.at("lr_dynamics").get<double>();
        c.lr_statistics = side.at("lr_statistics").get<double>();
        c.lr_policy = side.at("lr_policy").get<double>();
        c.gamma = side.at("gamma").get<double>();
        c.beta = side.at("beta").get<double>();
        c.sync_period = side.at("sync_period").get<int>();
        c.buffer_capacity = side.at("buffer_capacity").get<long>();
        c.eps_start = side.at("eps_start").get<double>();
        c.eps_final = side.at("eps_final").get<double>();
        c.eps_decay_frac = side.at("eps_decay_frac").get<double>();
        c.encoder_dim = side.at("encoder_dim").get<int>();
        c.marginal_samples_k = side.at("marginal_samples_k").get<int>();
        c.seed = side.at("seed").get<uint64_t>();
        c.intrinsic_mode = side.at("intrinsic_mode").get<std::string>();
        c.marginal_mode = side.at("marginal_mode").get<std::string>();
        c.ema_correction = side.at("ema_correction").get<bool>();
        c.ema_rate = side.at("ema_rate").get<double>();
        c.slip = side.at("slip").get<double>();
        c.max_steps = side.at("max_steps").get<int>();
        c.metrics_every = side.at("metrics_every").get<int>();
        c.hidden_width = side.at("hidden_width").get<int>();
        ck.encoder_seed = side.at("encoder_seed").get<uint64_t>();
        ck.steps = side.at("steps").get<long>();
        ck.episodes = side.at("episodes").get<long>();
        ck.updates = side.at("updates").get<long>();
        ck.final_epsilon = side.at("final_epsilon").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError(std::string("load_checkpoint: missing field: ") + e.what());
    }
    ck.q_online = load_net(dir + "/q_online.net");
    ck.q_target = load_net(dir + "/q_target.net");
    ck.dynamics_net = load_net(dir + "/dynamics.net");
    ck.statistics_net = load_net(dir + "/statistics.net");
    ck.encoder_net = load_net(dir + "/encoder.net");
    return ck;
}

// Joint training loop: act epsilon-greedily and store the transition; once
// past warmup, each cycle samples a batch, updates the dynamics model, takes
// a DV ascent step on the statistics network, refreshes the sampled
// transitions' intrinsic rewards from the current T and f, applies the TD
// update, and syncs the target network every sync_period updates.
class Trainer {
public:
    static RunConfig validated(RunConfig c) {
        c.validate();
        return c;
    }

    Trainer(RunConfig config, std::string output_dir)
        : config_(validated(std::move(config))),
          output_dir_(std::move(output_dir)),
          rng_(config_.seed),
          env_(make_env(config_.env, config_.max_steps, config_.slip)),
          encoder_seed_(config_.seed + 0x9E3779B9u),
          encoder_(env_.obs_dim(), encoder_seed_, config_.encoder_dim),
          model_(config_.encoder_dim, env_.action_count(), rng_, config_.lr_dynamics,
                 config_.hidden_width),
          stats_(config_.encoder_dim, env_.action_count(), rng_, config_.lr_statistics,
                 config_.hidden_width, config_.ema_correction, config_.ema_rate),
          agent_(env_.obs_dim(), env_.action_count(), rng_, config_.lr_policy, config_.gamma,
                 config_.sync_period, config_.hidden_width),
          buffer_(static_cast<size_t>(config_.buffer_capacity)) {}

    RunSummary run() {
        namespace fs = std::filesystem;
        fs::create_directories(output_dir_);
        const std::string metrics_path = output_dir_ + "/metrics.csv";
        std::ofstream metrics(metrics_path);
        if (!metrics) throw InvalidInputError("train: cannot write " + metrics_path);
        detail::write_metrics_header(metrics);

        RunSummary summary;
        Vec obs = env_.reset();
        double episode_return = 0.0;
        double last_episode_return = 0.0;

        try {
            for (long step = 1; step <= config_.total_steps; ++step) {
                agent_.set_epsilon(config_.epsilon_at(step));
                const int action = agent_.select_action(obs, rng_);
                StepResult sr = env_.step(action, rng_);
                episode_return += sr.extrinsic_reward;

                Transition t;
                t.obs = obs;
                t.action = action;
                t.next_obs = sr.observation;
                t.extrinsic_reward = sr.extrinsic_reward;
                t.terminal = sr.terminal;
                buffer_.push(std::move(t));

                if (sr.terminal) {
                    summary.episodes += 1;
                    summary.episode_returns.push_back(episode_return);
                    last_episode_return = episode_return;
                    episode_return = 0.0;
                    obs = env_.reset();
                } else {
                    obs = sr.observation;
                }

                if (step >= config_.warmup_steps) {
                    for (int m = 0; m < config_.inner_loop_m; ++m) {
                        update_cycle(summary);
                    }
                }

                if (step % config_.metrics_every == 0) {
                    MetricsRow row;
                    row.step = step;
                    row.episode = summary.episodes;
                    row.episodic_extrinsic_return = last_episode_return;
                    row.mean_intrinsic_reward = last_mean_intrinsic_;
                    row.dv_bound_nats = last_dv_bound_;
                    row.dynamics_loss = last_dynamics_loss_;
                    row.td_loss = last_td_loss_;
                    row.epsilon = agent_.epsilon();
                    detail::write_metrics_row(metrics, row);
                }
            }
        } catch (const NumericFaultError&) {
            // Leave a diagnostic checkpoint behind before propagating.
            summary.steps = config_.total_steps;
            summary.buffer_size = buffer_.size();
            summary.final_epsilon = agent_.epsilon();
            save_checkpoint(output_dir_ + "/fault", config_, agent_, model_, stats_, encoder_,
                            encoder_seed_, summary);
            throw;
        }

        summary.steps = config_.total_steps;
        summary.buffer_size = buffer_.size();
        summary.final_epsilon = agent_.epsilon();
        summary.metrics_path = metrics_path;
        summary.checkpoint_dir = output_dir_ + "/checkpoint";
        save_checkpoint(summary.checkpoint_dir, config_, agent_, model_, stats_, encoder_,
                        encoder_seed_, summary);
        return summary;
    }

    const DqnAgent& agent() const { return agent_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    long update_count() const { return update_count_; }
    long sync_count() const { return sync_count_; }
    const std::vector<long>& sync_update_indices() const { return sync_update_indices_; }

private:
    void update_cycle(RunSummary& summary) {
        const int n = config_.batch_size;
        const std::vector<size_t> indices = buffer_.sample_indices(n, rng_);

        Mat obs_rows(n, env_.obs_dim());
        Mat next_rows(n, env_.obs_dim());
        for (int i = 0; i < n; ++i) {
            obs_rows.row(i) = buffer_.at(indices[i]).obs;
            next_rows.row(i) = buffer_.at(indices[i]).next_obs;
        }

        // The extrinsic-only ablation is a plain DQN: no reward generator,
        // so neither the dynamics model nor the statistics network trains.
        if (config_.intrinsic_mode == "empowerment") {
            reward_generator_cycle(indices, obs_rows, next_rows);
        } else {
            last_mean_intrinsic_ = 0.0;
        }

        std::vector<const Transition*> td_batch(n);
        for (int i = 0; i < n; ++i) td_batch[i] = &buffer_.at(indices[i]);
        last_td_loss_ = agent_.td_update(td_batch);
        update_count_ += 1;
        summary.updates += 1;

        if (agent_.steps_since_sync() >= config_.sync_period) {
            agent_.sync_target();
            sync_count_ += 1;
            summary.target_syncs += 1;
            sync_update_indices_.push_back(update_count_);
        }
    }

    void reward_generator_cycle(const std::vector<size_t>& indices, const Mat& obs_rows,
                                const Mat& next_rows) {
        const int n = static_cast<int>(indices.size());
        const Mat enc_s = encoder_.encode_batch(obs_rows);
        const Mat enc_next = encoder_.encode_batch(next_rows);

        // Dynamics step on the squared feature prediction error.
        std::vector<DynamicsSample> dyn_batch(n);
        for (int i = 0; i < n; ++i) {
            dyn_batch[i].enc_state = enc_s.row(i).transpose();
            dyn_batch[i].action = buffer_.at(indices[i]).action;
            dyn_batch[i].enc_next = enc_next.row(i).transpose();
        }
        last_dynamics_loss_ = model_.update(dyn_batch);

        // DV ascent step. Joint rows are the replayed triples; marginal rows
        // resample the action from the current behavior policy and take the
        // successor encoding from the forward model (or shuffle actions
        // in-batch in the model-free mode).
        const int d = 2 * config_.encoder_dim + env_.action_count();
        Mat joint_rows(n, d);
        Mat marginal_rows(n, d);
        const Mat q_batch = forward_batch(agent_.online_net(), obs_rows);
        std::vector<Vec> policy_probs(n);
        for (int i = 0; i < n; ++i) {
            const Transition& t = buffer_.at(indices[i]);
            joint_rows.row(i) =
                stats_.triple_row(enc_s.row(i).transpose(), t.action, enc_next.row(i).transpose());
            Vec probs = Vec::Constant(env_.action_count(), agent_.epsilon() / env_.action_count());
            probs[DqnAgent::greedy_action(q_batch.row(i).transpose())] += 1.0 - agent_.epsilon();
            policy_probs[i] = std::move(probs);
        }
        if (config_.marginal_mode == "model") {
            // Resampled action != replayed action: successor from the model.
            // Matching action: the real e(s') is an exact marginal sample and
            // keeps the joint and marginal batches on common support.
            Mat model_inputs(n, config_.encoder_dim + env_.action_count());
            std::vector<int> resampled(n);
            for (int i = 0; i < n; ++i) {
                resampled[i] = sample_categorical(policy_probs[i], rng_);
                model_inputs.row(i) = model_.input_row(enc_s.row(i).transpose(), resampled[i]);
            }
            const Mat predicted = forward_batch(model_.net(), model_inputs);
            for (int i = 0; i < n; ++i) {
                const bool own_action = resampled[i] == buffer_.at(indices[i]).action;
                marginal_rows.row(i) = stats_.triple_row(
                    enc_s.row(i).transpose(), resampled[i],
                    own_action ? Vec(enc_next.row(i).transpose())
                               : Vec(predicted.row(i).transpose()));
            }
        } else {
            std::uniform_int_distribution<int> pick(0, n - 1);
            for (int i = 0; i < n; ++i) {
                const int j = pick(rng_);
                marginal_rows.row(i) =
                    stats_.triple_row(enc_s.row(i).transpose(), buffer_.at(indices[j]).action,
                                      enc_next.row(i).transpose());
            }
        }
        const DvEstimate est = stats_.update(joint_rows, marginal_rows);
        last_dv_bound_ = est.bound_nats;

        // Refresh the sampled transitions' intrinsic rewards from the current
        // T and f before the Bellman update.
        refresh_intrinsic(indices, enc_s, enc_next, policy_probs);
    }

    // Batched equivalent of the per-transition single-sample DV reward: for
    // each sampled transition, draw K actions from the behavior policy,
    // evaluate T on the model's prediction for each distinct drawn action,
    // and floor the resulting estimate at zero.
    void refresh_intrinsic(const std::vector<size_t>& indices, const Mat& enc_s,
                           const Mat& enc_next, const std::vector<Vec>& policy_probs) {
        const int n = static_cast<int>(indices.size());
        const int a_count = env_.action_count();
        const int d = 2 * config_.encoder_dim + a_count;

        // Draw all marginal actions first (rng order matches the
        // per-transition reference path: K draws per transition, in order).
        std::vector<std::vector<int>> counts(n, std::vector<int>(a_count, 0));
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < config_.marginal_samples_k; ++k)
                counts[i][sample_categorical(policy_probs[i], rng_)]++;

        // Model predictions for every (transition, action) pair.
        Mat model_inputs(n * a_count, config_.encoder_dim + a_count);
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < a_count; ++a)
                model_inputs.row(i * a_count + a) =
                    model_.input_row(enc_s.row(i).transpose(), a);
        const Mat predictions = forward_batch(model_.net(), model_inputs);

        // Statistics for the joint triple and all marginal candidates; the
        // candidate matching the replayed action uses the real successor
        // encoding (see dv_single_transition).
        Mat t_inputs(n * (1 + a_count), d);
        for (int i = 0; i < n; ++i) {
            const Transition& t = buffer_.at(indices[i]);
            t_inputs.row(i * (1 + a_count)) = stats_.triple_row(
                enc_s.row(i).transpose(), t.action, enc_next.row(i).transpose());
            for (int a = 0; a < a_count; ++a) {
                const Vec successor = a == t.action
                                          ? Vec(enc_next.row(i).transpose())
                                          : Vec(predictions.row(i * a_count + a).transpose());
                t_inputs.row(i * (1 + a_count) + 1 + a) =
                    stats_.triple_row(enc_s.row(i).transpose(), a, successor);
            }
        }
        const Vec t_values = stats_.estimator().statistics(t_inputs);

        const double cap = std::log(static_cast<double>(a_count));
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double joint_term = t_values[i * (1 + a_count)];
            int distinct = 0;
            for (int a = 0; a < a_count; ++a) distinct += counts[i][a] > 0 ? 1 : 0;
            Vec values(distinct), weights(distinct);
            int r = 0;
            for (int a = 0; a < a_count; ++a) {
                if (counts[i][a] == 0) continue;
                values[r] = t_values[i * (1 + a_count) + 1 + a];
                weights[r] =
                    static_cast<double>(counts[i][a]) / config_.marginal_samples_k;
                ++r;
            }
            const double estimate = joint_term - log_weighted_mean_exp(values, weights);
            if (!std::isfinite(estimate))
                throw NumericFaultError("intrinsic reward refresh: non-finite estimate");
            const double reward = config_.beta * std::clamp(estimate, 0.0, cap);
            buffer_.at(indices[i]).intrinsic_reward = reward;
            total += reward;
        }
        last_mean_intrinsic_ = total / n;
    }

    RunConfig config_;
    std::string output_dir_;
    Rng rng_;
    GridRooms env_;
    uint64_t encoder_seed_;
    RandomEncoder encoder_;
    ForwardModel model_;
    StatisticsNetwork stats_;
    DqnAgent agent_;
    ReplayBuffer buffer_;
    long update_count_ = 0;
    long sync_count_ = 0;
    std::vector<long> sync_update_indices_;
    double last_dynamics_loss_ = 0.0;
    double last_dv_bound_ = 0.0;
    double last_td_loss_ = 0.0;
    double last_mean_intrinsic_ = 0.0;
};

inline RunSummary train(const RunConfig& config, const std::string& output_dir) {
    Trainer trainer(config, output_dir);
    return trainer.run();
}

struct EvalResult {
    double success_rate = 0.0;
    double mean_return = 0.0;
};

// Greedy (epsilon = 0) rollouts; success means the goal was reached.
inline EvalResult evaluate(const DenseNet& q_net, GridRooms& env, int episodes, Rng& rng) {
    if (episodes <= 0) throw InvalidInputError("evaluate: episodes must be positive");
    if (q_net.output_size() != env.action_count())
        throw InvalidInputError("evaluate: checkpoint action count " +
                                std::to_string(q_net.output_size()) + " != environment's " +
                                std::to_string(env.action_count()));
    if (q_net.input_size() != env.obs_dim())
        throw InvalidInputError("evaluate: observation size mismatch");
    EvalResult result;
    for (int e = 0; e < episodes; ++e) {
        Vec obs = env.reset();
        double ep_return = 0.0;
        bool done = false;
        while (!done) {
            const int action = DqnAgent::greedy_action(forward(q_net, obs));
            StepResult sr = env.step(action, rng);
            ep_return += sr.extrinsic_reward;
            done = sr.terminal;
            obs = sr.observation;
        }
        result.mean_return += ep_return;
        if (ep_return > 0.0) result.success_rate += 1.0;
    }
    result.mean_return /= episodes;
    result.success_rate /= episodes;
    return result;
}

inline EvalResult evaluate_checkpoint(const std::string& checkpoint_dir, int episodes,
                                      uint64_t rng_seed = 0,
                                      const std::string& env_override = "") {
    const Checkpoint ck = load_checkpoint(checkpoint_dir);
    GridRooms env = make_env(env_override.empty() ? ck.config.env : env_override,
                             ck.config.max_steps, ck.config.slip);
    Rng rng(rng_seed);
    return evaluate(ck.q_online, env, episodes, rng);
}

struct ScanRow {
    int state_id = 0;
    int row = 0;
    int col = 0;
    bool has_key = false;
    double oracle_nats = 0.0;
    double estimate_nats = 0.0;
};

struct ScanResult {
    std::vector<ScanRow> rows;
    double spearman_rank_correlation = 0.0;
};

// Compares the exact per-state empowerment against the trained estimator.
// For each non-terminal tabular state the estimate is the mean of
// `joint_draws` single-transition DV estimates: the action is drawn from the
// source distribution, the real successor from the tabular dynamics, and each
// estimate aggregates K model-predicted marginal samples. The source is
// uniform by default ("uniform"), or the checkpoint's final epsilon-greedy
// policy ("policy").
inline ScanResult empowerment_scan(const Checkpoint& ck, GridRooms& env,
                                   const std::string& source = "uniform", int joint_draws = 32,
                                   uint64_t rng_seed = 0) {
    if (ck.q_online.output_size() != env.action_count())
        throw InvalidInputError("scan: checkpoint action count mismatch");
    if (source != "uniform" && source != "policy")
        throw InvalidInputError("scan: source must be 'uniform' or 'policy'");

    const GridTabular tab = env.to_tabular();
    const std::vector<double> oracle = empowerment_map(tab.mdp);

    RandomEncoder encoder(env.obs_dim(), ck.encoder_seed, ck.config.encoder_dim);
    ForwardModel model(ck.dynamics_net, ck.config.encoder_dim, env.action_count());
    StatisticsNetwork stats(ck.config.encoder_dim, env.action_count(), ck.statistics_net);
    Rng rng(rng_seed);

    const int a_count = env.action_count();
    ScanResult result;
    std::vector<double> oracle_col, estimate_col;
    for (int s = 0; s < tab.mdp.state_count; ++s) {
        if (tab.mdp.terminal[s]) continue;
        const Vec obs = env.make_observation(tab.state_row[s], tab.state_col[s],
                                             tab.state_has_key[s]);
        const Vec enc = encoder.encode(obs);

        Vec source_probs;
        if (source == "uniform") {
            source_probs = Vec::Constant(a_count, 1.0 / a_count);
        } else {
            source_probs = Vec::Constant(a_count, ck.final_epsilon / a_count);
            source_probs[DqnAgent::greedy_action(forward(ck.q_online, obs))] +=
                1.0 - ck.final_epsilon;
        }

        double sum = 0.0;
        for (int j = 0; j < joint_draws; ++j) {
            const int action = sample_categorical(source_probs, rng);
            Vec next_probs = tab.mdp.transition[s].row(action).transpose();
            const int next_state = sample_categorical(next_probs, rng);
            const Vec next_obs = env.make_observation(
                tab.state_row[next_state], tab.state_col[next_state],
                tab.state_has_key[next_state]);
            sum += dv_single_transition(stats, model, enc, action, encoder.encode(next_obs),
                                        source_probs, ck.config.marginal_samples_k, rng);
        }

        ScanRow row;
        row.state_id = s;
        row.row = tab.state_row[s];
        row.col = tab.state_col[s];
        row.has_key = tab.state_has_key[s];
        row.oracle_nats = oracle[s];
        row.estimate_nats = sum / joint_draws;
        result.rows.push_back(row);
        oracle_col.push_back(row.oracle_nats);
        estimate_col.push_back(row.estimate_nats);
    }
    try {
        result.spearman_rank_correlation = spearman(oracle_col, estimate_col);
    } catch (const InvalidInputError&) {
        // Constant column (untrained nets): the correlation is undefined.
        result.spearman_rank_correlation = std::numeric_limits<double>::quiet_NaN();
    }
    return result;
}

inline void write_scan_csv(const ScanResult& scan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInputError("scan: cannot write " + path);
    out << "state_id,row,col,has_key,oracle_nats,estimate_nats\n";
    for (const auto& r : scan.rows)
        out << r.state_id << ',' << r.row << ',' << r.col << ',' << (r.has_key ? 1 : 0) << ','
            << detail::format_double(r.oracle_nats) << ','
            << detail::format_double(r.estimate_nats) << '\n';
}

}  // namespace empowerd
