#pragma once

#include "empowerd/common.hpp"
#include "empowerd/oracle.hpp"

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace empowerd {

// Grid actions, fixed order. Tie-breaking and tabular enumeration rely on it.
enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kGridActionCount = 4;

struct StepResult {
    Vec observation;
    double extrinsic_reward = 0.0;
    bool terminal = false;
};

// Tabular export of a GridRooms instance: the MDP plus the bookkeeping needed
// to map state ids back to cells and observations.
struct GridTabular {
    TabularMdp mdp;
    std::vector<int> state_row;
    std::vector<int> state_col;
    std::vector<bool> state_has_key;
};

// Deterministic sparse-reward gridworld. Layout characters: '#' wall,
// '.' floor, 'K' key, 'D' door, 'G' goal, 'S' start. Moving into a wall, off
// the grid, or into a locked door leaves the position unchanged. Stepping
// onto the key picks it up; the door is traversable only with the key; the
// goal pays reward 1 and ends the episode. Episodes also end at max_steps.
class GridRooms {
public:
    explicit GridRooms(const std::vector<std::string>& layout, int max_steps = 500,
                       double slip = 0.0)
        : layout_(layout), max_steps_(max_steps), slip_(slip) {
        if (layout_.empty() || layout_[0].empty())
            throw InvalidConfigError("GridRooms: empty layout");
        rows_ = static_cast<int>(layout_.size());
        cols_ = static_cast<int>(layout_[0].size());
        int keys = 0;
        for (int r = 0; r < rows_; ++r) {
            if (static_cast<int>(layout_[r].size()) != cols_)
                throw InvalidConfigError("GridRooms: ragged layout rows");
            for (int c = 0; c < cols_; ++c) {
                const char ch = layout_[r][c];
                switch (ch) {
                    case '#': case '.': case 'D': case 'G': break;
                    case 'K': ++keys; break;
                    case 'S':
                        if (start_) throw InvalidConfigError("GridRooms: multiple start cells");
                        start_ = {r, c};
                        break;
                    default:
                        throw InvalidConfigError(std::string("GridRooms: unknown cell '") + ch +
                                                 "'");
                }
            }
        }
        if (!start_) throw InvalidConfigError("GridRooms: layout has no start cell 'S'");
        if (keys > 1) throw InvalidConfigError("GridRooms: at most one key supported");
        if (max_steps_ <= 0) throw InvalidConfigError("GridRooms: max_steps must be positive");
        if (slip_ < 0.0 || slip_ >= 1.0)
            throw InvalidConfigError("GridRooms: slip must be in [0, 1)");
        reset();
    }

    static GridRooms from_file(const std::string& path, int max_steps = 500, double slip = 0.0) {
        std::ifstream in(path);
        if (!in) throw InvalidConfigError("GridRooms: cannot open layout " + path);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) lines.push_back(line);
        }
        return GridRooms(lines, max_steps, slip);
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int cell_count() const { return rows_ * cols_; }
    int obs_dim() const { return cell_count() + 1; }
    int action_count() const { return kGridActionCount; }
    int max_steps() const { return max_steps_; }
    bool has_key() const { return has_key_; }
    int agent_row() const { return row_; }
    int agent_col() const { return col_; }
    bool done() const { return done_; }

    Vec reset() {
        row_ = start_->first;
        col_ = start_->second;
        has_key_ = false;
        step_count_ = 0;
        done_ = false;
        return observation();
    }

    // One environment step. The rng is consumed only when slip > 0.
    StepResult step(int action, Rng& rng) {
        if (done_) throw InvalidStateError("GridRooms: step on a finished episode");
        if (action < 0 || action >= kGridActionCount)
            throw InvalidInputError("GridRooms: action out of range");
        if (slip_ > 0.0) {
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            if (unit(rng) < slip_) {
                std::uniform_int_distribution<int> pick(0, kGridActionCount - 1);
                action = pick(rng);
            }
        }
        const auto [nr, nc, picked_key] = resolve_move(row_, col_, action, has_key_);
        row_ = nr;
        col_ = nc;
        if (picked_key) has_key_ = true;

        StepResult result;
        if (kind_at(row_, col_) == 'G') {
            result.extrinsic_reward = 1.0;
            done_ = true;
        }
        step_count_ += 1;
        if (step_count_ >= max_steps_) done_ = true;
        result.terminal = done_;
        result.observation = observation();
        return result;
    }

    Vec observation() const { return make_observation(row_, col_, has_key_); }

    Vec make_observation(int r, int c, bool key) const {
        Vec obs = Vec::Zero(obs_dim());
        obs[r * cols_ + c] = 1.0;
        obs[cell_count()] = key ? 1.0 : 0.0;
        return obs;
    }

    // Enumerates (cell, has_key) product states over non-wall cells and builds
    // the exact transition tensor matching step() semantics. Goal states are
    // terminal self-loops. The step-count truncation has no tabular analog.
    GridTabular to_tabular() const {
        GridTabular tab;
        std::vector<int> cell_rank(cell_count(), -1);
        std::vector<std::pair<int, int>> cells;
        for (int r = 0; r < rows_; ++r)
            for (int c = 0; c < cols_; ++c)
                if (layout_[r][c] != '#') {
                    cell_rank[r * cols_ + c] = static_cast<int>(cells.size());
                    cells.emplace_back(r, c);
                }
        const bool key_in_layout = layout_has_key();
        const int n_cells = static_cast<int>(cells.size());
        const int n_states = key_in_layout ? 2 * n_cells : n_cells;

        tab.mdp.state_count = n_states;
        tab.mdp.action_count = kGridActionCount;
        tab.mdp.terminal.assign(n_states, false);
        for (int s = 0; s < n_states; ++s) {
            const bool key = s >= n_cells;
            const auto [r, c] = cells[s % n_cells];
            tab.state_row.push_back(r);
            tab.state_col.push_back(c);
            tab.state_has_key.push_back(key);
            tab.mdp.terminal[s] = kind_at(r, c) == 'G';
        }

        auto state_id = [&](int r, int c, bool key) {
            return cell_rank[r * cols_ + c] + (key && key_in_layout ? n_cells : 0);
        };
        for (int s = 0; s < n_states; ++s) {
            Mat rows_mat = Mat::Zero(kGridActionCount, n_states);
            if (tab.mdp.terminal[s]) {
                for (int a = 0; a < kGridActionCount; ++a) rows_mat(a, s) = 1.0;
            } else {
                const bool key = tab.state_has_key[s];
                // Deterministic move per action, then mix in the slip mass.
                std::vector<int> det_next(kGridActionCount);
                for (int a = 0; a < kGridActionCount; ++a) {
                    const auto [nr, nc, picked] =
                        resolve_move(tab.state_row[s], tab.state_col[s], a, key);
                    det_next[a] = state_id(nr, nc, key || picked);
                }
                for (int a = 0; a < kGridActionCount; ++a) {
                    rows_mat(a, det_next[a]) += 1.0 - slip_;
                    for (int b = 0; b < kGridActionCount; ++b)
                        rows_mat(a, det_next[b]) += slip_ / kGridActionCount;
                }
            }
            tab.mdp.transition.push_back(std::move(rows_mat));
        }
        tab.mdp.validate();
        return tab;
    }

    bool layout_has_key() const {
        for (const auto& row : layout_)
            if (row.find('K') != std::string::npos) return true;
        return false;
    }

    char kind_at(int r, int c) const {
        const char ch = layout_[r][c];
        // The key cell behaves as floor once the key has been taken.
        if (ch == 'K' && has_key_) return '.';
        return ch == 'S' ? '.' : ch;
    }

private:
    // Returns (next_row, next_col, picked_key) for a deterministic move with
    // the given key bit; bumping into walls, the grid edge, or a locked door
    // stays in place.
    std::tuple<int, int, bool> resolve_move(int r, int c, int action, bool key) const {
        static constexpr int dr[kGridActionCount] = {-1, 1, 0, 0};
        static constexpr int dc[kGridActionCount] = {0, 0, -1, 1};
        const int nr = r + dr[action];
        const int nc = c + dc[action];
        if (nr < 0 || nr >= rows_ || nc < 0 || nc >= cols_) return {r, c, false};
        const char raw = layout_[nr][nc];
        if (raw == '#') return {r, c, false};
        if (raw == 'D' && !key) return {r, c, false};
        if (raw == 'K' && !key) return {nr, nc, true};
        return {nr, nc, false};
    }

    std::vector<std::string> layout_;
    int max_steps_;
    double slip_;
    int rows_ = 0;
    int cols_ = 0;
    std::optional<std::pair<int, int>> start_;
    int row_ = 0;
    int col_ = 0;
    bool has_key_ = false;
    int step_count_ = 0;
    bool done_ = false;
};

// Canonical layouts. "open5x5" is a wall-less 5x5 grid (moves off the edge
// bump and stay). "keydoor" is two 5x7 rooms joined by a door in the dividing
// wall; the key sits in the far corner of room one, the goal in room two, so
// the agent must detour away from the goal before it can ever reach it.
inline std::vector<std::string> builtin_layout(const std::string& name) {
    if (name == "open5x5")
        return {
            ".....",
            ".....",
            "..S..",
            ".....",
            ".....",
        };
    if (name == "keydoor")
        return {
            "#################",
            "#.......#.......#",
            "#.......#.......#",
            "#......S#......G#",
            "#.......D.......#",
            "#K......#.......#",
            "#################",
        };
    throw InvalidConfigError("unknown builtin layout '" + name + "'");
}

// Env specs are either a builtin layout name or a path to a layout file.
inline GridRooms make_env(const std::string& spec, int max_steps = 500, double slip = 0.0) {
    if (spec == "open5x5" || spec == "keydoor")
        return GridRooms(builtin_layout(spec), max_steps, slip);
    return GridRooms::from_file(spec, max_steps, slip);
}

// Correlated bivariate standard normal pairs for estimator benchmarks.
// True mutual information is -0.5 * ln(1 - rho^2) nats.
class GaussianPairSource {
public:
    GaussianPairSource(double rho, uint64_t seed) : rho_(rho), rng_(seed) {
        if (!(std::abs(rho) < 1.0))
            throw InvalidInputError("GaussianPairSource: |rho| must be < 1");
    }

    // n rows of (x, y).
    Mat sample(int n) {
        if (n <= 0) throw InvalidInputError("GaussianPairSource: n must be positive");
        std::normal_distribution<double> normal(0.0, 1.0);
        const double ortho = std::sqrt(1.0 - rho_ * rho_);
        Mat pairs(n, 2);
        for (int i = 0; i < n; ++i) {
            const double z1 = normal(rng_);
            const double z2 = normal(rng_);
            pairs(i, 0) = z1;
            pairs(i, 1) = rho_ * z1 + ortho * z2;
        }
        return pairs;
    }

    double rho() const { return rho_; }
    double true_mi_nats() const { return -0.5 * std::log(1.0 - rho_ * rho_); }

private:
    double rho_;
    Rng rng_;
};

}  // namespace empowerd
