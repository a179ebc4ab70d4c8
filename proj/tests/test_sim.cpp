#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "cstr_fixture.hpp"
#include "helpers.hpp"
#include "it2mpc/sim.hpp"

using namespace it2mpc;
using namespace it2mpc::sim;

namespace {

fuzzy::It2Plant stable_scalar_plant() {
    fuzzy::It2Plant p;
    p.state_dim = 1;
    p.input_dim = 1;
    p.premise = [](const Vec& x) { return x[0]; };
    fuzzy::FuzzyRule r;
    r.A = Matrix{{0.6}};
    r.Ad = Matrix{{0.0}};
    r.B = Matrix{{1.0}};
    r.Bd = Matrix{{0.0}};
    p.rules = {r};
    p.memberships = {fuzzy::gaussian_it2(0.0, 1.0, 0.8, 0.9, 0)};
    p.validate();
    return p;
}

synth::SynthesisSolution zero_gain_solution(int n, int w) {
    synth::SynthesisSolution s;
    s.zeta = 1.0;
    s.Y.push_back(SymMatrix::identity(n));
    s.M = Matrix::identity(n);
    s.H.push_back(Matrix::zero(w, n));
    s.Z = SymMatrix::identity(w);
    s.gains.push_back(Matrix::zero(w, n));
    s.P.push_back(SymMatrix::identity(n));
    s.u_max = Vec(static_cast<std::size_t>(w), 10.0);
    return s;
}

}  // namespace

TEST_CASE("vertex step matches the hand-computed update", "[sim]") {
    // Rule-1 dynamics alone at x = x_d = [1, 0], u = u_d = 0.
    fuzzy::It2Plant p = testutil::cstr_plant();
    p.rules = {p.rules[0]};
    p.memberships = {p.memberships[0]};

    synth::HistoryWindow hist = synth::HistoryWindow::from_initial({1.0, 0.0}, 3, 3, 1);
    Vec next = step_dynamics(p, hist, {0.0}, 1, 1);
    CHECK(next[0] == Catch::Approx(0.7935).margin(1e-12));
    CHECK(next[1] == Catch::Approx(-0.2299).margin(1e-12));
}

TEST_CASE("zero delay matrices make the delay irrelevant", "[sim]") {
    fuzzy::It2Plant p = stable_scalar_plant();
    synth::HistoryWindow hist({{2.0}, {1.5}, {0.7}}, {{0.3}, {0.1}});
    for (int dx : {0, 1, 2}) {
        Vec next = step_dynamics(p, hist, {0.2}, dx, std::min(dx, 2));
        CHECK(next[0] == Catch::Approx(0.6 * 0.7 + 0.2).margin(1e-15));
    }
}

TEST_CASE("single rule with zero gain reduces to open-loop with delay", "[sim]") {
    fuzzy::It2Plant p = stable_scalar_plant();
    p.rules[0].Ad = Matrix{{0.1}};
    synth::HistoryWindow hist({{2.0}, {1.5}, {0.7}}, {{0.0}, {0.0}});
    auto sol = zero_gain_solution(1, 1);
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    Vec next = step(p, sol, ctrl, hist, 2, 1);
    CHECK(next[0] == Catch::Approx(0.6 * 0.7 + 0.1 * 2.0).margin(1e-15));
}

TEST_CASE("history ring agrees with a full-trajectory oracle", "[sim][property]") {
    fuzzy::It2Plant p = stable_scalar_plant();
    p.rules[0].Ad = Matrix{{0.25}};
    p.rules[0].Bd = Matrix{{0.05}};
    const int d = 3, h = 5;
    synth::HistoryWindow hist = synth::HistoryWindow::from_initial({1.0}, h, h, 1);
    std::vector<double> xs = {1.0};
    std::vector<double> us;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (int k = 0; k < 30; ++k) {
        const double u = dist(rng);
        Vec next = step_dynamics(p, hist, {u}, d, d);
        // Oracle: index the full stored trajectory directly.
        const double xd = k - d >= 0 ? xs[static_cast<std::size_t>(k - d)] : 1.0;
        const double ud = k - d >= 0 ? us[static_cast<std::size_t>(k - d)] : 0.0;
        const double expect = 0.6 * xs.back() + 1.0 * u + 0.25 * xd + 0.05 * ud;
        REQUIRE(next[0] == Catch::Approx(expect).margin(1e-13));
        us.push_back(u);
        xs.push_back(next[0]);
        hist.advance(next, {u});
    }
}

TEST_CASE("none delay equals folding the delay matrices into A and B", "[sim][property]") {
    fuzzy::It2Plant p = testutil::cstr_plant();
    fuzzy::It2Plant folded = p;
    for (auto& r : folded.rules) {
        r.A += r.Ad;
        r.B += r.Bd;
        r.Ad = Matrix::zero(2, 2);
        r.Bd = Matrix::zero(2, 1);
    }
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    synth::HistoryWindow ha = synth::HistoryWindow::from_initial({0.5, -0.5}, 4, 4, 1);
    synth::HistoryWindow hb = ha;
    for (int k = 0; k < 25; ++k) {
        Vec u = {dist(rng)};
        Vec na = step_dynamics(p, ha, u, 0, 0);
        Vec nb = step_dynamics(folded, hb, u, 1 + static_cast<int>(rng() % 4), 1);
        REQUIRE(std::abs(na[0] - nb[0]) < 1e-12);
        REQUIRE(std::abs(na[1] - nb[1]) < 1e-12);
        ha.advance(na, u);
        hb.advance(na, u);
    }
}

TEST_CASE("uncontrolled run holds the equilibrium at zero", "[sim]") {
    fuzzy::It2Plant p = testutil::cstr_plant();
    SimConfig cfg;
    cfg.steps = 20;
    cfg.x0 = {0.0, 0.0};
    cfg.ts = 0.2;
    Trajectory t = uncontrolled_run(p, cfg, 10, 10);
    REQUIRE(t.size() == 20);
    for (const auto& x : t.x)
        CHECK(norm2(x) == 0.0);
}

TEST_CASE("stable single-rule plant converges open loop", "[sim]") {
    fuzzy::It2Plant p = stable_scalar_plant();
    SimConfig cfg;
    cfg.steps = 60;
    cfg.x0 = {1.0};
    cfg.ts = 0.1;
    Trajectory t = uncontrolled_run(p, cfg, 3, 3);
    REQUIRE(t.size() == 60);
    CHECK(std::abs(t.final_state[0]) < 1e-10);
}

TEST_CASE("controlled run produces a full, bounded, feasible trajectory", "[sim][cstr]") {
    fuzzy::It2Plant p = testutil::cstr_plant();
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    synth::SynthConfig scfg = testutil::cstr_synth_config();
    SimConfig cfg;
    cfg.steps = 25;
    cfg.x0 = {0.5, -0.5};
    cfg.ts = 0.2;
    cfg.state_delay = DelayProcess::uniform(10, 42);
    cfg.input_delay = DelayProcess::uniform(10, 43);
    RunResult rr = run(p, ctrl, scfg, cfg);

    REQUIRE(rr.traj.size() == 25);
    REQUIRE(rr.solutions.size() == 25);
    CHECK(rr.infeasible_steps == 0);
    for (int k = 0; k < 25; ++k) {
        CHECK(rr.traj.dx[static_cast<std::size_t>(k)] >= 1);
        CHECK(rr.traj.dx[static_cast<std::size_t>(k)] <= 10);
        CHECK(rr.traj.du[static_cast<std::size_t>(k)] >= 1);
        CHECK(rr.traj.du[static_cast<std::size_t>(k)] <= 10);
        CHECK(std::abs(rr.traj.u[static_cast<std::size_t>(k)][0]) <= 6.0 + 1e-9);
    }
    // steps=1 edge: one row, x(0) = x0.
    SimConfig one = cfg;
    one.steps = 1;
    RunResult r1 = run(p, ctrl, scfg, one);
    REQUIRE(r1.traj.size() == 1);
    CHECK(r1.traj.x[0][0] == 0.5);
    CHECK(r1.traj.x[0][1] == -0.5);
}

TEST_CASE("identical seeds reproduce the trajectory bitwise", "[sim][cstr]") {
    fuzzy::It2Plant p = testutil::cstr_plant();
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    synth::SynthConfig scfg = testutil::cstr_synth_config();
    SimConfig cfg;
    cfg.steps = 12;
    cfg.x0 = {0.5, -0.5};
    cfg.ts = 0.2;
    cfg.state_delay = DelayProcess::uniform(10, 7);
    cfg.input_delay = DelayProcess::uniform(10, 8);

    RunResult a = run(p, ctrl, scfg, cfg);
    RunResult b = run(p, ctrl, scfg, cfg);
    for (int k = 0; k < 12; ++k) {
        REQUIRE(a.traj.x[static_cast<std::size_t>(k)] == b.traj.x[static_cast<std::size_t>(k)]);
        REQUIRE(a.traj.u[static_cast<std::size_t>(k)] == b.traj.u[static_cast<std::size_t>(k)]);
        REQUIRE(a.traj.dx[static_cast<std::size_t>(k)] == b.traj.dx[static_cast<std::size_t>(k)]);
        REQUIRE(a.traj.du[static_cast<std::size_t>(k)] == b.traj.du[static_cast<std::size_t>(k)]);
    }
}

TEST_CASE("worst-case sweep expands into constant-delay configs", "[sim]") {
    SimConfig cfg;
    cfg.steps = 5;
    cfg.x0 = {0.1};
    cfg.ts = 0.1;
    cfg.state_delay = DelayProcess::worst_case(3);
    cfg.input_delay = DelayProcess::none();
    auto expanded = expand_worst_case(cfg);
    REQUIRE(expanded.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(expanded[static_cast<std::size_t>(i)].state_delay.kind == DelayProcess::Kind::constant);
        CHECK(expanded[static_cast<std::size_t>(i)].state_delay.constant_value == i + 1);
    }
    CHECK_THROWS_AS(uncontrolled_run(testutil::cstr_plant(), [&] {
                        SimConfig c;
                        c.steps = 2;
                        c.x0 = {0.1, 0.1};
                        c.state_delay = DelayProcess::worst_case(3);
                        return c;
                    }(), 10, 10),
                    StructuralError);
}

TEST_CASE("trajectory CSV has the pinned schema and round-trips bytes", "[sim]") {
    fuzzy::It2Plant p = stable_scalar_plant();
    SimConfig cfg;
    cfg.steps = 6;
    cfg.x0 = {1.0};
    cfg.ts = 0.1;
    Trajectory t = uncontrolled_run(p, cfg, 2, 2);

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "it2mpc_test_csv";
    fs::create_directories(dir);
    const std::string p1 = (dir / "a.csv").string();
    const std::string p2 = (dir / "b.csv").string();
    write_trajectory_csv(t, p1);
    write_trajectory_csv(t, p2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(s1 == s2);
    CHECK(s1.rfind("k,t,x_1,u_1,d_x,d_u,zeta,feasible\n", 0) == 0);
}
