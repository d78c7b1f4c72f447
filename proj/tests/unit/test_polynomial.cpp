#include "css/polynomial.hpp"

#include <doctest.h>

#include <random>

using namespace css;

TEST_CASE("polynomial arithmetic and evaluation") {
    // p = 1 + 2 x1 - x2^2, q = x1 x2 - 3
    Polynomial p = Polynomial::constant(2, 1.0) + Polynomial::variable(2, 0) * 2.0 - Polynomial::monomial({0, 2}, 1.0);
    Polynomial q = Polynomial::monomial({1, 1}, 1.0) - Polynomial::constant(2, 3.0);
    CHECK(p.degree() == 2);
    CHECK(p.coefficient({1, 0}) == 2.0);
    CHECK(p.coefficient({1, 1}) == 0.0);
    Polynomial pq = p * q;
    CHECK(pq.degree() == 4);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd x(2);
        x << u(rng), u(rng);
        CHECK(pq.evaluate(x) == doctest::Approx(p.evaluate(x) * q.evaluate(x)));
        CHECK((p + q).evaluate(x) == doctest::Approx(p.evaluate(x) + q.evaluate(x)));
    }
    Polynomial zero = p - p;
    zero.prune();
    CHECK(zero.empty());
    CHECK(pq.max_abs_coefficient() == doctest::Approx(6.0));
}

TEST_CASE("dense coefficient vectors use the graded index") {
    Polynomial p = Polynomial::monomial({0, 0, 2}, 5.0) + Polynomial::variable(3, 0);
    Eigen::VectorXd c = p.to_dense(2);
    REQUIRE(c.size() == 10);
    CHECK(c(1) == 1.0);  // x1 at index 2
    CHECK(c(9) == 5.0);  // x3^2 closes the block
    CHECK(c.sum() == 6.0);
    Polynomial back = Polynomial::from_dense(3, c);
    CHECK(back.coefficient({0, 0, 2}) == 5.0);
    CHECK(back.coefficient({1, 0, 0}) == 1.0);
}

TEST_CASE("affine substitution") {
    // p(x) = x1 x2 + x3^2 under x = x0 + M s
    Polynomial p = Polynomial::monomial({1, 1, 0}, 1.0) + Polynomial::monomial({0, 0, 2}, 1.0);
    Eigen::VectorXd x0(3);
    x0 << 0.5, -1.0, 2.0;
    Eigen::MatrixXd M(3, 2);
    M << 1, 0, 0.5, 1, -1, 2;
    Polynomial ps = p.substitute_affine(x0, M);
    CHECK(ps.nvars() == 2);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 50; ++k) {
        Eigen::VectorXd s(2);
        s << u(rng), u(rng);
        CHECK(ps.evaluate(s) == doctest::Approx(p.evaluate(x0 + M * s)));
    }
}
