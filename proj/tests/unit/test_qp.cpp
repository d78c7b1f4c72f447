#include "css/qp.hpp"

#include <doctest.h>

using namespace css;

TEST_CASE("equality constrained QP") {
    // min x^2 + y^2 s.t. x + y = 1
    QpProblem qp(2);
    qp.H = Eigen::Matrix2d::Identity() * 2;
    qp.add_eq(Eigen::RowVector2d(1, 1), 1);
    QpSolution s = solve_qp(qp);
    REQUIRE(s.status == QpStatus::optimal);
    CHECK(s.x(0) == doctest::Approx(0.5));
    CHECK(s.x(1) == doctest::Approx(0.5));
    CHECK(s.objective == doctest::Approx(0.5));
}

TEST_CASE("active inequality") {
    // min (x-2)^2 + (y-2)^2 s.t. x + y <= 2, x >= 0 -> (1, 1)
    QpProblem qp(2);
    qp.H = Eigen::Matrix2d::Identity() * 2;
    qp.g = Eigen::Vector2d(-4, -4);
    qp.add_le(Eigen::RowVector2d(1, 1), 2);
    qp.add_le(Eigen::RowVector2d(-1, 0), 0);
    QpSolution s = solve_qp(qp);
    REQUIRE(s.status == QpStatus::optimal);
    CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(s.x(1) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(s.z(0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(s.lower_bound <= s.objective + 1e-12);
}

TEST_CASE("linear program through the QP solver") {
    // min -x s.t. 0 <= x <= 3
    QpProblem qp(1);
    qp.g(0) = -1;
    qp.add_le(Eigen::RowVectorXd::Constant(1, 1.0), 3);
    qp.add_le(Eigen::RowVectorXd::Constant(1, -1.0), 0);
    QpSolution s = solve_qp(qp);
    REQUIRE(s.status == QpStatus::optimal);
    CHECK(s.x(0) == doctest::Approx(3.0).epsilon(1e-7));
}
