#include "css/sdp.hpp"

#include <doctest.h>

using namespace css;

namespace {

Eigen::MatrixXd vec_row(const Eigen::MatrixXd& M) { return Eigen::Map<const Eigen::RowVectorXd>(M.data(), M.size()); }

} // namespace

TEST_CASE("trace-constrained SDP attains the smallest eigenvalue") {
    // min <C, X> s.t. tr X = 1, X psd -> lambda_min(C)
    Eigen::Matrix3d C;
    C << 2, -1, 0, -1, 2, -1, 0, -1, 2;
    SdpProblem p;
    p.block_sizes = {3};
    p.A = {vec_row(Eigen::Matrix3d::Identity())};
    p.b = Eigen::VectorXd::Constant(1, 1.0);
    p.C = {C};
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::optimal);
    double obj = (C.cwiseProduct(s.X[0])).sum();
    CHECK(obj == doctest::Approx(2 - std::sqrt(2.0)).epsilon(1e-6));
    CHECK(min_eigenvalue(s.X[0]) >= -1e-8);
}

TEST_CASE("primal infeasible SDP is detected") {
    // X11 = -1 with X psd has no solution
    SdpProblem p;
    p.block_sizes = {2};
    Eigen::Matrix2d E11 = Eigen::Matrix2d::Zero();
    E11(0, 0) = 1;
    p.A = {vec_row(E11)};
    p.b = Eigen::VectorXd::Constant(1, -1.0);
    SdpSolution s = solve_sdp(p);
    CHECK(s.status == SdpStatus::primal_infeasible);
}

TEST_CASE("two blocks with a coupling constraint") {
    // X1 + X2 = 1 (1x1 blocks), min 2 X1 + X2 -> X2 = 1
    SdpProblem p;
    p.block_sizes = {1, 1};
    p.A = {Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, 1.0)};
    p.b = Eigen::VectorXd::Constant(1, 1.0);
    p.C = {Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::MatrixXd::Constant(1, 1, 1.0)};
    SdpSolution s = solve_sdp(p);
    REQUIRE(s.status == SdpStatus::optimal);
    CHECK(s.X[0](0, 0) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(s.X[1](0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("min eigenvalue helper") {
    Eigen::Matrix2d M;
    M << 1, 2, 2, 1;
    CHECK(min_eigenvalue(M) == doctest::Approx(-1.0));
}
