#include "css/simplex.hpp"

#include <doctest.h>

#include <random>

using namespace css;

TEST_CASE("small LP with known optimum") {
    // max x + y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> (1.6, 1.2)
    LpProblem lp;
    lp.A.resize(0, 2);
    lp.c = Eigen::Vector2d(-1, -1);
    lp.lo = Eigen::Vector2d::Zero();
    lp.hi = Eigen::Vector2d::Constant(kInf);
    lp.add_row(Eigen::RowVector2d(1, 2), RowType::le, 4);
    lp.add_row(Eigen::RowVector2d(3, 1), RowType::le, 6);
    LpSolution s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.x(0) == doctest::Approx(1.6));
    CHECK(s.x(1) == doctest::Approx(1.2));
    CHECK(s.objective == doctest::Approx(-2.8));
}

TEST_CASE("infeasible and unbounded LPs") {
    LpProblem lp;
    lp.A.resize(0, 1);
    lp.c = Eigen::VectorXd::Constant(1, 1.0);
    lp.lo = Eigen::VectorXd::Zero(1);
    lp.hi = Eigen::VectorXd::Constant(1, kInf);
    lp.add_row(Eigen::RowVectorXd::Constant(1, 1.0), RowType::le, -1);
    CHECK(solve_lp(lp).status == LpStatus::infeasible);

    LpProblem u;
    u.A.resize(0, 2);
    u.c = Eigen::Vector2d(-1, 0);
    u.lo = Eigen::Vector2d::Zero();
    u.hi = Eigen::Vector2d::Constant(kInf);
    u.add_row(Eigen::RowVector2d(1, -1), RowType::le, 1);
    CHECK(solve_lp(u).status == LpStatus::unbounded);
}

TEST_CASE("random feasible LPs satisfy optimality conditions") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1), pos(0.1, 1);
    for (int rep = 0; rep < 30; ++rep) {
        int n = 6, m = 3;
        Eigen::MatrixXd A(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) A(i, j) = u(rng);
        Eigen::VectorXd x0(n);
        for (int j = 0; j < n; ++j) x0(j) = pos(rng);
        Eigen::VectorXd c(n);
        for (int j = 0; j < n; ++j) c(j) = pos(rng);
        LpProblem lp = LpProblem::standard(A, A * x0, c);
        LpSolution s = solve_lp(lp);
        REQUIRE(s.status == LpStatus::optimal);
        CHECK((A * s.x - A * x0).norm() < 1e-8);
        CHECK(s.x.minCoeff() >= -1e-9);
        CHECK(s.objective <= c.dot(x0) + 1e-9);
        // dual feasibility: reduced costs c - A'duals nonnegative, zero on the support
        Eigen::VectorXd rc = c - A.transpose() * s.duals;
        CHECK(rc.minCoeff() >= -1e-7);
        CHECK(std::abs(rc.dot(s.x)) < 1e-7);
    }
}

TEST_CASE("degenerate LP terminates") {
    // many redundant constraints through the optimum
    LpProblem lp;
    lp.A.resize(0, 2);
    lp.c = Eigen::Vector2d(-1, -1);
    lp.lo = Eigen::Vector2d::Zero();
    lp.hi = Eigen::Vector2d::Constant(kInf);
    for (int k = 1; k <= 20; ++k) lp.add_row(Eigen::RowVector2d(k, 1.0 / k), RowType::le, k + 1.0 / k);
    LpSolution s = solve_lp(lp);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK(s.objective == doctest::Approx(-2.0));
}
