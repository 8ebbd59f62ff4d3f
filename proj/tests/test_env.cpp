#include "empowerd/env.hpp"
#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

using namespace empowerd;

namespace {
Rng& dummy_rng() {
    static Rng rng(0);
    return rng;
}
}  // namespace

TEST_CASE("reset is deterministic and the key bit starts cleared") {
    GridRooms env(builtin_layout("keydoor"));
    const Vec a = env.reset();
    const Vec b = env.reset();
    REQUIRE(a == b);
    REQUIRE(a.size() == env.cell_count() + 1);
    REQUIRE(a[env.cell_count()] == 0.0);
    REQUIRE(a.sum() == 1.0);  // exactly one position bit, key bit 0
}

TEST_CASE("layout without a start cell is rejected") {
    REQUIRE_THROWS_AS(GridRooms({"..", ".."}), InvalidConfigError);
    REQUIRE_THROWS_AS(GridRooms({"S.", ".?"}), InvalidConfigError);
    REQUIRE_THROWS_AS(GridRooms({"S.", "KK"}), InvalidConfigError);
}

TEST_CASE("bumping the outer wall stays in place with zero reward") {
    GridRooms env({"S.", ".."});
    const StepResult r = env.step(kUp, dummy_rng());
    REQUIRE(r.extrinsic_reward == 0.0);
    REQUIRE_FALSE(r.terminal);
    REQUIRE(env.agent_row() == 0);
    REQUIRE(env.agent_col() == 0);
}

TEST_CASE("stepping onto the goal pays 1 and terminates") {
    GridRooms env({"SG"});
    const StepResult r = env.step(kRight, dummy_rng());
    REQUIRE(r.extrinsic_reward == 1.0);
    REQUIRE(r.terminal);
    REQUIRE_THROWS_AS(env.step(kLeft, dummy_rng()), InvalidStateError);
}

TEST_CASE("the door blocks without the key and opens with it") {
    GridRooms env({"SKDG"});
    // Without the key the door at column 2 blocks: go right twice from start.
    env.reset();
    StepResult r = env.step(kRight, dummy_rng());  // picks up key at col 1
    REQUIRE(env.has_key());
    r = env.step(kRight, dummy_rng());  // through the door
    REQUIRE(env.agent_col() == 2);
    r = env.step(kRight, dummy_rng());
    REQUIRE(r.extrinsic_reward == 1.0);
    REQUIRE(r.terminal);
}

TEST_CASE("door stays shut when approached keyless") {
    GridRooms env({"SD.", "K.."});
    env.reset();
    const StepResult r = env.step(kRight, dummy_rng());
    REQUIRE(env.agent_col() == 0);  // bounced off the locked door
    REQUIRE(r.extrinsic_reward == 0.0);
}

TEST_CASE("episodes truncate at max_steps") {
    GridRooms env({"S."}, /*max_steps=*/3);
    env.reset();
    REQUIRE_FALSE(env.step(kRight, dummy_rng()).terminal);
    REQUIRE_FALSE(env.step(kLeft, dummy_rng()).terminal);
    REQUIRE(env.step(kLeft, dummy_rng()).terminal);
}

TEST_CASE("max episode return is exactly one") {
    GridRooms env(builtin_layout("keydoor"), 200);
    Rng rng(5);
    std::uniform_int_distribution<int> pick(0, 3);
    for (int episode = 0; episode < 30; ++episode) {
        env.reset();
        double total = 0.0;
        bool done = false;
        while (!done) {
            const StepResult r = env.step(pick(rng), rng);
            total += r.extrinsic_reward;
            done = r.terminal;
        }
        REQUIRE((total == 0.0 || total == 1.0));
    }
}

TEST_CASE("open 5x5 tabular export has 25 point-mass states") {
    GridRooms env(builtin_layout("open5x5"));
    const GridTabular tab = env.to_tabular();
    REQUIRE(tab.mdp.state_count == 25);
    REQUIRE(tab.mdp.action_count == 4);
    for (int s = 0; s < 25; ++s) {
        REQUIRE_FALSE(tab.mdp.terminal[s]);
        for (int a = 0; a < 4; ++a) REQUIRE(tab.mdp.transition[s].row(a).maxCoeff() == 1.0);
    }
}

TEST_CASE("tabular simulation matches live stepping over random trajectories") {
    GridRooms env(builtin_layout("keydoor"), /*max_steps=*/100000);
    const GridTabular tab = env.to_tabular();

    auto state_of = [&](int row, int col, bool key) {
        for (int s = 0; s < tab.mdp.state_count; ++s)
            if (tab.state_row[s] == row && tab.state_col[s] == col &&
                tab.state_has_key[s] == key)
                return s;
        FAIL("state not found in tabular export");
        return -1;
    };

    Rng rng(77);
    std::uniform_int_distribution<int> pick(0, 3);
    long total_steps = 0;
    for (int traj = 0; traj < 200; ++traj) {
        env.reset();
        int s = state_of(env.agent_row(), env.agent_col(), env.has_key());
        for (int t = 0; t < 50; ++t) {
            const int action = pick(rng);
            const StepResult r = env.step(action, rng);
            Vec row = tab.mdp.transition[s].row(action).transpose();
            REQUIRE(row.maxCoeff() == 1.0);  // deterministic env
            int next = 0;
            row.maxCoeff(&next);
            REQUIRE(tab.state_row[next] == env.agent_row());
            REQUIRE(tab.state_col[next] == env.agent_col());
            REQUIRE(tab.state_has_key[next] == env.has_key());
            REQUIRE(tab.mdp.terminal[next] == r.terminal);
            s = next;
            ++total_steps;
            if (r.terminal) break;
        }
    }
    REQUIRE(total_steps >= 9000);  // 200 trajectories x 50 steps, minus early goals
}

TEST_CASE("key pickup connects the keyless and keyed components") {
    GridRooms env({"SK"});
    const GridTabular tab = env.to_tabular();
    REQUIRE(tab.mdp.state_count == 4);  // 2 cells x 2 key bits
    int s_start = -1;
    for (int s = 0; s < 4; ++s)
        if (tab.state_col[s] == 0 && !tab.state_has_key[s]) s_start = s;
    REQUIRE(s_start >= 0);
    Vec row = tab.mdp.transition[s_start].row(kRight).transpose();
    int next = 0;
    row.maxCoeff(&next);
    REQUIRE(tab.state_has_key[next]);
    REQUIRE(tab.state_col[next] == 1);
}

TEST_CASE("slip mixes the action channel") {
    GridRooms env(builtin_layout("open5x5"), 500, /*slip=*/0.2);
    const GridTabular tab = env.to_tabular();
    // An interior state now has 1 - slip + slip/4 mass on the intended move.
    for (int s = 0; s < tab.mdp.state_count; ++s) {
        if (tab.state_row[s] == 2 && tab.state_col[s] == 2) {
            REQUIRE(tab.mdp.transition[s](0, s) == Catch::Approx(0.0).margin(1e-12));
            REQUIRE(tab.mdp.transition[s].row(0).maxCoeff() ==
                    Catch::Approx(0.8 + 0.05).margin(1e-12));
        }
    }
}

TEST_CASE("gaussian pair source matches its analytic moments") {
    GaussianPairSource source(0.5, 123);
    REQUIRE(source.true_mi_nats() == Catch::Approx(0.143841).margin(1e-6));

    const int n = 1000000;
    const Mat pairs = GaussianPairSource(0.5, 123).sample(n);
    const Vec x = pairs.col(0), y = pairs.col(1);
    const double mx = x.mean(), my = y.mean();
    const double cov = ((x.array() - mx) * (y.array() - my)).mean();
    const double sx = std::sqrt(((x.array() - mx) * (x.array() - mx)).mean());
    const double sy = std::sqrt(((y.array() - my) * (y.array() - my)).mean());
    REQUIRE(cov / (sx * sy) == Catch::Approx(0.5).margin(0.005));
}

TEST_CASE("rho zero means independent pairs") {
    GaussianPairSource source(0.0, 9);
    REQUIRE(source.true_mi_nats() == 0.0);
    const Mat pairs = source.sample(200000);
    const Vec x = pairs.col(0), y = pairs.col(1);
    const double cov = ((x.array() - x.mean()) * (y.array() - y.mean())).mean();
    REQUIRE(std::abs(cov) < 0.01);
    REQUIRE_THROWS_AS(GaussianPairSource(1.0, 1), InvalidInputError);
}

TEST_CASE("layouts load from ASCII files") {
    const auto path = std::filesystem::temp_directory_path() / "empowerd_layout.txt";
    {
        std::ofstream out(path);
        out << "#####\n#S.K#\n#.#D#\n#..G#\n#####\n";
    }
    GridRooms env = GridRooms::from_file(path.string());
    REQUIRE(env.rows() == 5);
    REQUIRE(env.cols() == 5);
    REQUIRE(env.agent_row() == 1);
    REQUIRE(env.agent_col() == 1);
    REQUIRE(env.obs_dim() == 26);
    std::filesystem::remove(path);
}

TEST_CASE("env rejects bad parameters") {
    REQUIRE_THROWS_AS(GridRooms(builtin_layout("open5x5"), 0), InvalidConfigError);
    REQUIRE_THROWS_AS(GridRooms(builtin_layout("open5x5"), 10, 1.0), InvalidConfigError);
    REQUIRE_THROWS_AS(make_env("no_such_layout_file.txt"), InvalidConfigError);
    GridRooms env(builtin_layout("open5x5"));
    REQUIRE_THROWS_AS(env.step(4, dummy_rng()), InvalidInputError);
}
