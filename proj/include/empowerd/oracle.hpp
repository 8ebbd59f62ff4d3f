#pragma once

#include "empowerd/common.hpp"

#include <json.hpp>

#include <fstream>
#include <vector>

namespace empowerd {

// Explicit finite MDP: transition[s][a] is a probability row over next states.
// Terminal states self-loop with probability 1.
struct TabularMdp {
    int state_count = 0;
    int action_count = 0;
    std::vector<Mat> transition;  // transition[s]: action_count x state_count
    std::vector<bool> terminal;

    void validate() const {
        if (state_count <= 0 || action_count <= 0)
            throw InvalidInputError("TabularMdp: empty state or action space");
        if (static_cast<int>(transition.size()) != state_count ||
            static_cast<int>(terminal.size()) != state_count)
            throw InvalidInputError("TabularMdp: table sizes do not match state_count");
        for (int s = 0; s < state_count; ++s) {
            if (transition[s].rows() != action_count || transition[s].cols() != state_count)
                throw InvalidInputError("TabularMdp: bad transition shape at state " +
                                        std::to_string(s));
            for (int a = 0; a < action_count; ++a) {
                double sum = 0.0;
                for (int t = 0; t < state_count; ++t) {
                    const double p = transition[s](a, t);
                    if (!(p >= 0.0))
                        throw InvalidInputError("TabularMdp: negative probability");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-12)
                    throw InvalidInputError("TabularMdp: row does not sum to 1 at state " +
                                            std::to_string(s));
            }
            if (terminal[s]) {
                for (int a = 0; a < action_count; ++a)
                    if (std::abs(transition[s](a, s) - 1.0) > 1e-12)
                        throw InvalidInputError("TabularMdp: terminal state " + std::to_string(s) +
                                                " must self-loop");
            }
        }
    }

    // {"states": N, "actions": A, "transitions": [[[p,...],...],...],
    //  "terminal": [bool,...]}
    static TabularMdp from_json(const nlohmann::json& doc) {
        TabularMdp mdp;
        try {
            mdp.state_count = doc.at("states").get<int>();
            mdp.action_count = doc.at("actions").get<int>();
            const auto& trans = doc.at("transitions");
            for (const auto& per_state : trans) {
                Mat rows(mdp.action_count, mdp.state_count);
                int a = 0;
                for (const auto& per_action : per_state) {
                    int t = 0;
                    for (const auto& p : per_action) rows(a, t++) = p.get<double>();
                    ++a;
                }
                mdp.transition.push_back(std::move(rows));
            }
            for (const auto& b : doc.at("terminal")) mdp.terminal.push_back(b.get<bool>());
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInputError(std::string("TabularMdp: malformed JSON: ") + e.what());
        }
        mdp.validate();
        return mdp;
    }

    static TabularMdp from_json_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InvalidInputError("TabularMdp: cannot open " + path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInputError(std::string("TabularMdp: JSON parse error: ") + e.what());
        }
        return from_json(doc);
    }
};

struct CapacityResult {
    double capacity_nats = 0.0;
    Vec optimal_source;
    int iterations = 0;
};

// Blahut-Arimoto alternating maximization for the capacity of a discrete
// memoryless channel. `channel` rows are input symbols, columns outputs,
// each row a probability distribution. Iterates until the capacity increment
// per iteration drops below `tol` or `max_iters` is reached (the latter is
// reported via iterations == max_iters). Capacity in nats.
inline CapacityResult blahut_arimoto(const Mat& channel, double tol = 1e-9,
                                     int max_iters = 10000) {
    const int n_in = static_cast<int>(channel.rows());
    const int n_out = static_cast<int>(channel.cols());
    if (n_in <= 0 || n_out <= 0) throw InvalidInputError("blahut_arimoto: empty channel");
    if (!(tol > 0.0)) throw InvalidInputError("blahut_arimoto: tol must be positive");
    for (int x = 0; x < n_in; ++x) {
        double sum = 0.0;
        for (int y = 0; y < n_out; ++y) {
            if (!(channel(x, y) >= 0.0))
                throw InvalidInputError("blahut_arimoto: negative channel entry");
            sum += channel(x, y);
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw InvalidInputError("blahut_arimoto: channel row " + std::to_string(x) +
                                    " sums to " + std::to_string(sum));
    }

    Vec source = Vec::Constant(n_in, 1.0 / n_in);
    double info = 0.0;
    int iter = 0;
    for (; iter < max_iters; ++iter) {
        // Output marginal under the current source.
        Vec out = channel.transpose() * source;
        // D[x] = KL(W(.|x) || out); the current mutual information is
        // sum_x source[x] * D[x] and max_x D[x] upper-bounds the capacity.
        Vec divergence(n_in);
        for (int x = 0; x < n_in; ++x) {
            double d = 0.0;
            for (int y = 0; y < n_out; ++y) {
                const double w = channel(x, y);
                if (w > 0.0) d += w * std::log(w / out[y]);
            }
            divergence[x] = d;
        }
        const double new_info = source.dot(divergence);
        // Multiplicative source update: source[x] *= exp(D[x]), renormalized.
        // Subtract the max exponent before exponentiating.
        const double d_max = divergence.maxCoeff();
        Vec updated = source.array() * (divergence.array() - d_max).exp();
        updated /= updated.sum();

        if (iter > 0 && new_info - info < tol) {
            info = new_info;
            ++iter;
            break;
        }
        info = new_info;
        source = updated;
    }

    CapacityResult result;
    result.capacity_nats = std::max(0.0, info);
    result.optimal_source = source;
    result.iterations = iter;
    return result;
}

// Exact 1-step empowerment of `state`: the capacity of the action x next-state
// channel cut from the transition tensor.
inline double exact_empowerment(const TabularMdp& mdp, int state, double tol = 1e-9) {
    if (state < 0 || state >= mdp.state_count)
        throw InvalidInputError("exact_empowerment: state out of range");
    if (mdp.terminal[state]) return 0.0;
    return blahut_arimoto(mdp.transition[state], tol).capacity_nats;
}

inline std::vector<double> empowerment_map(const TabularMdp& mdp, double tol = 1e-9) {
    std::vector<double> values(mdp.state_count);
    for (int s = 0; s < mdp.state_count; ++s) values[s] = exact_empowerment(mdp, s, tol);
    return values;
}

}  // namespace empowerd
