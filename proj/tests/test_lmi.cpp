#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "it2mpc/lmi.hpp"

using namespace it2mpc;
using namespace it2mpc::lmi;

namespace {

// x * I2 < 0, a one-variable sanity problem.
LmiProblem scaled_identity_problem(VarRef& x_out) {
    LmiProblem p;
    VarRef x = p.add_scalar("x");
    LmiConstraint c("scaled-identity", Sense::negative_definite, {2});
    AffineBlock b(2, 2);
    b.add_scalar_term(Matrix::identity(2), x);
    c.set_block(0, 0, std::move(b));
    p.add_constraint(std::move(c));
    x_out = x;
    return p;
}

}  // namespace

TEST_CASE("evaluate on a scalar-scaled identity", "[lmi]") {
    VarRef x;
    LmiProblem p = scaled_identity_problem(x);
    Assignment a;
    a.set(x, -1.0);
    SymMatrix v = evaluate(p.constraints()[0], a);
    CHECK(testutil::max_abs_diff(v, -SymMatrix::identity(2)) < 1e-15);
}

TEST_CASE("evaluate of the containment block at the origin", "[lmi]") {
    // [[1, x^T], [x, Y]] with x = 0, Y = I evaluates to the identity.
    LmiProblem p;
    VarRef y = p.add_symmetric("Y", 2);
    LmiConstraint c("containment", Sense::positive_semidefinite, {1, 2});
    AffineBlock top(Matrix{{1.0}});
    c.set_block(0, 0, std::move(top));
    AffineBlock cross(Matrix::zero(1, 2));
    c.set_block(0, 1, std::move(cross));
    AffineBlock corner(2, 2);
    corner.add_term(Matrix::identity(2), y, Matrix::identity(2));
    c.set_block(1, 1, std::move(corner));
    p.add_constraint(std::move(c));

    Assignment a;
    a.set(y, SymMatrix::identity(2));
    SymMatrix v = evaluate(p.constraints()[0], a);
    CHECK(testutil::max_abs_diff(v, SymMatrix::identity(3)) < 1e-15);
}

TEST_CASE("check_feasible reports pass and fail with labels", "[lmi]") {
    VarRef x;
    LmiProblem p = scaled_identity_problem(x);

    Assignment good;
    good.set(x, -1.0);
    FeasReport r = check_feasible(p, good, 1e-9);
    CHECK(r.pass);
    REQUIRE(r.constraints.size() == 1);
    CHECK(r.constraints[0].max_eig == Catch::Approx(-1.0));

    Assignment bad;
    bad.set(x, 1.0);
    FeasReport rb = check_feasible(p, bad, 1e-9);
    CHECK_FALSE(rb.pass);
    CHECK(rb.worst_label == "scaled-identity");
}

TEST_CASE("assignment guards symmetric values and missing variables", "[lmi]") {
    LmiProblem p;
    VarRef y = p.add_symmetric("Y", 2);
    Assignment a;
    CHECK_THROWS_AS(a.matrix(y), StructuralError);
    CHECK_THROWS_AS(a.set(y, Matrix{{1.0, 2.0}, {0.0, 1.0}}), StructuralError);
    a.set(y, SymMatrix::identity(2));
    CHECK(a.matrix(y)(0, 0) == 1.0);
}

TEST_CASE("variable names must be unique and objective must appear", "[lmi]") {
    LmiProblem p;
    p.add_scalar("zeta");
    CHECK_THROWS_AS(p.add_scalar("zeta"), StructuralError);

    LmiProblem q;
    VarRef z = q.add_scalar("zeta");
    q.set_objective(z);
    CHECK_THROWS_AS(q.validate(), StructuralError);
}

TEST_CASE("matrix lemma bound holds on random draws", "[lmi][property]") {
    // Y - M^T - M >= -M^T Y^-1 M for symmetric positive definite Y.
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 4);
        Matrix m = testutil::random_matrix(rng, n, n, 2.0);
        SymMatrix y = testutil::random_pd(rng, n, 0.05);
        Matrix lhs = y.to_matrix() - m.transpose() - m;
        Matrix rhs = -(m.transpose() * invert(y).to_matrix() * m);
        const double margin = min_eig(SymMatrix::symmetrized(lhs - rhs));
        REQUIRE(margin >= -1e-9);
    }
}

TEST_CASE("dump lists variables, senses and bounds", "[lmi]") {
    LmiProblem p;
    VarRef z = p.add_scalar("zeta");
    VarRef y = p.add_symmetric("Y", 2);
    LmiConstraint c("c0", Sense::negative_definite, {2});
    AffineBlock b(2, 2);
    b.add_term(Matrix::identity(2), y, Matrix::identity(2));
    c.set_block(0, 0, std::move(b));
    p.add_constraint(std::move(c));
    ScalarBound bound;
    bound.label = "cap";
    bound.terms.push_back({z.id, 0, 0, 1.0});
    bound.rhs = 36.0;
    p.add_scalar_bound(bound);

    std::string text = dump(p);
    CHECK(text.find("zeta") != std::string::npos);
    CHECK(text.find("symmetric 2x2") != std::string::npos);
    CHECK(text.find("< 0") != std::string::npos);
    CHECK(text.find("cap") != std::string::npos);
}
