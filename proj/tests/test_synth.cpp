#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cstr_fixture.hpp"
#include "helpers.hpp"
#include "it2mpc/synth.hpp"

using namespace it2mpc;
using namespace it2mpc::synth;

namespace {

fuzzy::It2Plant scalar_plant(double a, double b, double ad = 0.0, double bd = 0.0) {
    fuzzy::It2Plant p;
    p.state_dim = 1;
    p.input_dim = 1;
    p.premise = [](const Vec& x) { return x[0]; };
    fuzzy::FuzzyRule r;
    r.A = Matrix{{a}};
    r.Ad = Matrix{{ad}};
    r.B = Matrix{{b}};
    r.Bd = Matrix{{bd}};
    p.rules = {r};
    p.memberships = {fuzzy::gaussian_it2(0.0, 1.0, 0.8, 0.9, 0)};
    p.validate();
    return p;
}

SynthConfig scalar_config(double u_cap = 10.0, int h = 1, int j = 1) {
    return SynthConfig::make(SymMatrix::diag({1e-4}), SymMatrix::diag({1e-3}), 0.8, 0.2, h, j,
                             {u_cap});
}

}  // namespace

TEST_CASE("config rejects a broken rho split", "[synth]") {
    CHECK_THROWS_WITH(SynthConfig::make(SymMatrix::identity(2), SymMatrix::identity(1), 0.8, 0.3, 10,
                                        10, {6.0}),
                      Catch::Matchers::ContainsSubstring("rho + rho_d"));
}

TEST_CASE("scalar problem has the expected constraint census", "[synth]") {
    fuzzy::It2Plant p = scalar_plant(0.5, 1.0);
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    SynthConfig cfg = scalar_config(10.0, 3, 2);
    HistoryWindow hist = HistoryWindow::from_initial({0.4}, 3, 2, 1);
    lmi::LmiProblem prob = build_theorem1_lmis(p, ctrl, cfg, hist);

    int eq22 = 0, eq23 = 0, eq35 = 0;
    for (const auto& c : prob.constraints()) {
        if (c.label().rfind("eq22", 0) == 0) {
            ++eq22;
            CHECK(c.dim() == 5);
        } else if (c.label().rfind("eq23", 0) == 0) {
            ++eq23;
        } else if (c.label().rfind("eq35", 0) == 0) {
            ++eq35;
        }
    }
    CHECK(eq22 == 1);
    CHECK(eq23 == 1);
    CHECK(eq35 == 4);  // h + 1 samples
    CHECK(prob.scalar_bounds().size() == 1);
}

TEST_CASE("CSTR problem enumerates successor and input-bound indices", "[synth]") {
    fuzzy::It2Plant p = testutil::cstr_plant();
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    SynthConfig cfg = testutil::cstr_synth_config();
    HistoryWindow hist = HistoryWindow::from_initial({0.5, -0.5}, 10, 10, 1);
    lmi::LmiProblem prob = build_theorem1_lmis(p, ctrl, cfg, hist);

    int eq22 = 0, eq23 = 0, eq35 = 0;
    for (const auto& c : prob.constraints()) {
        if (c.label().rfind("eq22", 0) == 0)
            ++eq22;
        else if (c.label().rfind("eq23", 0) == 0)
            ++eq23;
        else if (c.label().rfind("eq35", 0) == 0)
            ++eq35;
    }
    CHECK(eq22 == 3);   // one per successor rule index
    CHECK(eq23 == 9);   // every (controller rule, set rule) pair
    CHECK(eq35 == 33);  // 11 history samples x 3 rules
}

TEST_CASE("zero history reduces containment to PSD of Y", "[synth]") {
    fuzzy::It2Plant p = scalar_plant(0.5, 1.0);
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    SynthConfig cfg = scalar_config();
    HistoryWindow hist = HistoryWindow::from_initial({0.0}, 1, 1, 1);
    lmi::LmiProblem prob = build_theorem1_lmis(p, ctrl, cfg, hist);

    lmi::Assignment a;
    a.set(prob.variable("Y1"), 2.0 * Matrix::identity(1));
    a.set(prob.variable("M"), Matrix{{1.0}});
    a.set(prob.variable("H1"), Matrix{{0.0}});
    a.set(prob.variable("Z"), Matrix{{1.0}});
    a.set(prob.variable("zeta"), 1.0);
    for (const auto& c : prob.constraints()) {
        if (c.label().rfind("eq35", 0) != 0)
            continue;
        SymMatrix v = lmi::evaluate(c, a);
        CHECK(v(0, 0) == 1.0);
        CHECK(v(0, 1) == 0.0);
        CHECK(v(1, 1) == 2.0);
    }
}

TEST_CASE("stabilizable scalar plant synthesizes a certified gain", "[synth]") {
    fuzzy::It2Plant p = scalar_plant(0.5, 1.0);
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    SynthConfig cfg = scalar_config();
    HistoryWindow hist = HistoryWindow::from_initial({0.4}, 1, 1, 1);
    StepResult res = solve_step(p, ctrl, cfg, hist);
    REQUIRE(res.status == StepStatus::feasible);
    CHECK(res.solution.zeta > 0.0);
    CHECK(res.certificate.pass);

    // Gain consistency H = K M.
    for (std::size_t l = 0; l < res.solution.gains.size(); ++l) {
        Matrix recon = res.solution.gains[l] * res.solution.M;
        CHECK(testutil::max_abs_diff(recon, res.solution.H[l]) < 1e-9);
    }
}

TEST_CASE("CSTR step-0 synthesis is feasible and certified", "[synth][cstr]") {
    fuzzy::It2Plant p = testutil::cstr_plant();
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    SynthConfig cfg = testutil::cstr_synth_config();
    HistoryWindow hist = HistoryWindow::from_initial({0.5, -0.5}, 10, 10, 1);
    StepResult res = solve_step(p, ctrl, cfg, hist);
    REQUIRE(res.status == StepStatus::feasible);
    CHECK(res.solution.zeta > 0.0);
    CHECK(res.certificate.pass);
    for (const auto& y : res.solution.Y)
        CHECK(min_eig(y) > 0.0);
    for (std::size_t l = 0; l < res.solution.gains.size(); ++l) {
        Matrix recon = res.solution.gains[l] * res.solution.M;
        CHECK(testutil::max_abs_diff(recon, res.solution.H[l]) < 1e-9);
    }

    // Initial state is contained in the terminal set.
    const double v0 = terminal_set_value(res.solution, p, {0.5, -0.5});
    CHECK(v0 <= res.solution.zeta * (1.0 + 1e-7));
}

TEST_CASE("CSTR step-0 objective agrees with the bisection oracle", "[synth][cstr][slow]") {
    fuzzy::It2Plant p = testutil::cstr_plant();
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    SynthConfig cfg = testutil::cstr_synth_config();
    HistoryWindow hist = HistoryWindow::from_initial({0.5, -0.5}, 10, 10, 1);
    lmi::LmiProblem prob = build_theorem1_lmis(p, ctrl, cfg, hist);

    lmi::SolveResult ip = lmi::solve(prob);
    REQUIRE(ip.status == lmi::SolveStatus::feasible);
    lmi::SolveResult bi = lmi::solve_bisection(prob, 0.0, std::max(1.0, 4.0 * ip.objective));
    REQUIRE(bi.status == lmi::SolveStatus::feasible);
    CHECK(std::abs(ip.objective - bi.objective) / std::max(1.0, ip.objective) < 1e-4);
}

TEST_CASE("tiny input budget is infeasible in the unstable operating region", "[synth]") {
    // Near the middle rule's center the blended plant needs active feedback;
    // a vanishing input budget makes the step problem infeasible there.
    fuzzy::It2Plant p = testutil::cstr_plant();
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    SynthConfig cfg = SynthConfig::make(SymMatrix::diag({1e-6, 1e-9}), SymMatrix::diag({0.001}), 0.8,
                                        0.2, 10, 10, {1e-9});
    HistoryWindow hist = HistoryWindow::from_initial({0.5, 2.752}, 10, 10, 1);
    StepResult res = solve_step(p, ctrl, cfg, hist);
    CHECK(res.status == StepStatus::infeasible);
}

TEST_CASE("control input is linear feedback", "[synth]") {
    fuzzy::It2Plant p = scalar_plant(0.5, 1.0);
    fuzzy::It2ControllerShape ctrl = testutil::cstr_controller(p);
    SynthConfig cfg = scalar_config();
    HistoryWindow hist = HistoryWindow::from_initial({0.4}, 1, 1, 1);
    StepResult res = solve_step(p, ctrl, cfg, hist);
    REQUIRE(res.status == StepStatus::feasible);

    Vec u0 = control_input(res.solution, ctrl, {0.0});
    CHECK(u0[0] == 0.0);

    // Single rule: u = K x exactly.
    Vec u = control_input(res.solution, ctrl, {0.3});
    CHECK(u[0] == Catch::Approx(res.solution.gains[0](0, 0) * 0.3).margin(1e-12));
}

TEST_CASE("terminal set value on the identity ellipsoid", "[synth]") {
    SynthesisSolution sol;
    sol.zeta = 2.0;
    sol.Y.push_back(SymMatrix::identity(2) * 2.0);  // Y = zeta I so P = I
    sol.M = Matrix::identity(2);
    sol.H.push_back(Matrix::zero(1, 2));
    sol.gains.push_back(Matrix::zero(1, 2));
    sol.P.push_back(invert(sol.Y[0]) * sol.zeta);
    sol.Z = SymMatrix::identity(1);
    sol.u_max = {1.0};

    fuzzy::It2Plant p = scalar_plant(0.5, 1.0);
    p.state_dim = 2;
    p.input_dim = 1;
    p.rules[0].A = Matrix::identity(2) * 0.5;
    p.rules[0].Ad = Matrix::zero(2, 2);
    p.rules[0].B = Matrix{{0.0}, {1.0}};
    p.rules[0].Bd = Matrix::zero(2, 1);
    p.premise = [](const Vec& x) { return x[0]; };

    CHECK(terminal_set_value(sol, p, {0.0, 0.0}) == 0.0);
    const double v = terminal_set_value(sol, p, {1.0, 1.0});
    CHECK(v == Catch::Approx(2.0).margin(1e-12));  // ||x||^2
}
