#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "it2mpc/sdp.hpp"

using namespace it2mpc;
using namespace it2mpc::lmi;

namespace {

// minimize zeta subject to zeta - 1 >= 0 (as a 1x1 PSD block).
LmiProblem scalar_floor_problem() {
    LmiProblem p;
    VarRef z = p.add_scalar("zeta");
    LmiConstraint c("floor", Sense::positive_semidefinite, {1});
    AffineBlock b(Matrix{{-1.0}});
    b.add_scalar_term(Matrix{{1.0}}, z);
    c.set_block(0, 0, std::move(b));
    p.add_constraint(std::move(c));
    p.set_objective(z);
    return p;
}

// minimize zeta subject to [[zeta, 1], [1, 1]] >= 0; Schur gives zeta >= 1.
LmiProblem schur_corner_problem() {
    LmiProblem p;
    VarRef z = p.add_scalar("zeta");
    LmiConstraint c("corner", Sense::positive_semidefinite, {1, 1});
    AffineBlock tl(1, 1);
    tl.add_scalar_term(Matrix{{1.0}}, z);
    c.set_block(0, 0, std::move(tl));
    c.set_block(0, 1, AffineBlock(Matrix{{1.0}}));
    c.set_block(1, 1, AffineBlock(Matrix{{1.0}}));
    p.add_constraint(std::move(c));
    p.set_objective(z);
    return p;
}

}  // namespace

TEST_CASE("solve minimizes a scalar floor", "[sdp]") {
    SolveResult r = solve(scalar_floor_problem());
    REQUIRE(r.status == SolveStatus::feasible);
    CHECK(r.objective == Catch::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("solve agrees with the Schur-complement closed form", "[sdp]") {
    SolveResult r = solve(schur_corner_problem());
    REQUIRE(r.status == SolveStatus::feasible);
    CHECK(r.objective == Catch::Approx(1.0).epsilon(1e-5));

    SolveResult b = solve_bisection(schur_corner_problem(), 0.0, 10.0);
    REQUIRE(b.status == SolveStatus::feasible);
    CHECK(b.objective == Catch::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("bisection solves the scalar floor", "[sdp]") {
    SolveResult r = solve_bisection(scalar_floor_problem(), 0.0, 10.0);
    REQUIRE(r.status == SolveStatus::feasible);
    CHECK(r.objective == Catch::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("infeasible problems get an explicit verdict", "[sdp]") {
    // zeta + 1 <= 0 together with zeta >= 0.
    LmiProblem p;
    VarRef z = p.add_scalar("zeta");
    LmiConstraint c1("negated", Sense::negative_definite, {1});
    AffineBlock b1(Matrix{{1.0}});
    b1.add_scalar_term(Matrix{{1.0}}, z);
    c1.set_block(0, 0, std::move(b1));
    p.add_constraint(std::move(c1));
    LmiConstraint c2("nonneg", Sense::positive_semidefinite, {1});
    AffineBlock b2(1, 1);
    b2.add_scalar_term(Matrix{{1.0}}, z);
    c2.set_block(0, 0, std::move(b2));
    p.add_constraint(std::move(c2));
    p.set_objective(z);

    CHECK(solve(p).status == SolveStatus::infeasible);
    CHECK(solve_bisection(p, 0.0, 10.0).status == SolveStatus::infeasible);
}

TEST_CASE("solutions certify via check_feasible", "[sdp]") {
    LmiProblem p = schur_corner_problem();
    SolveResult r = solve(p);
    REQUIRE(r.status == SolveStatus::feasible);
    FeasReport rep = check_feasible(p, r.assignment, 1e-9);
    CHECK(rep.pass);
}

TEST_CASE("solve is deterministic", "[sdp]") {
    SolveResult a = solve(schur_corner_problem());
    SolveResult b = solve(schur_corner_problem());
    REQUIRE(a.status == SolveStatus::feasible);
    CHECK(a.objective == b.objective);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("feasibility-only problems return an interior witness", "[sdp]") {
    LmiProblem p;
    VarRef y = p.add_symmetric("Y", 2);
    LmiConstraint upper("upper", Sense::negative_definite, {2});
    AffineBlock bu(2, 2);
    bu.add_constant(Matrix::identity(2) * -3.0);
    bu.add_term(Matrix::identity(2), y, Matrix::identity(2));
    upper.set_block(0, 0, std::move(bu));
    p.add_constraint(std::move(upper));
    LmiConstraint lower("lower", Sense::positive_semidefinite, {2});
    AffineBlock bl(2, 2);
    bl.add_constant(Matrix::identity(2) * -1.0);
    bl.add_term(Matrix::identity(2), y, Matrix::identity(2));
    lower.set_block(0, 0, std::move(bl));
    p.add_constraint(std::move(lower));

    SolveResult r = solve(p);
    REQUIRE(r.status == SolveStatus::feasible);
    SymMatrix yv = r.assignment.symmetric(y);
    CHECK(min_eig(yv) > 1.0 - 1e-6);
    CHECK(max_eig(yv) < 3.0 + 1e-6);
}

TEST_CASE("monotonicity: extra constraints cannot lower the optimum", "[sdp][property]") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const double a = 0.5 + 0.1 * static_cast<double>(rng() % 20);
        const double b = a + 0.1 + 0.1 * static_cast<double>(rng() % 20);
        auto make = [&](bool with_extra) {
            LmiProblem p;
            VarRef z = p.add_scalar("zeta");
            LmiConstraint c("floor-a", Sense::positive_semidefinite, {1});
            AffineBlock blk(Matrix{{-a}});
            blk.add_scalar_term(Matrix{{1.0}}, z);
            c.set_block(0, 0, std::move(blk));
            p.add_constraint(std::move(c));
            if (with_extra) {
                LmiConstraint c2("floor-b", Sense::positive_semidefinite, {1});
                AffineBlock blk2(Matrix{{-b}});
                blk2.add_scalar_term(Matrix{{1.0}}, z);
                c2.set_block(0, 0, std::move(blk2));
                p.add_constraint(std::move(c2));
            }
            p.set_objective(z);
            return p;
        };
        SolveResult base = solve(make(false));
        SolveResult tightened = solve(make(true));
        REQUIRE(base.status == SolveStatus::feasible);
        REQUIRE(tightened.status == SolveStatus::feasible);
        CHECK(tightened.objective >= base.objective - 1e-7);
        CHECK(tightened.objective == Catch::Approx(b).epsilon(1e-5));
    }
}
