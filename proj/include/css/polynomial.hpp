#pragma once

#include "css/ring.hpp"

#include <Eigen/Dense>

#include <map>

namespace css {

// Sparse real polynomial keyed by exponent vector.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(int nvars) : n_(nvars) {}

    static Polynomial constant(int nvars, double c);
    static Polynomial variable(int nvars, int i);
    static Polynomial monomial(const Exponent& alpha, double c);

    int nvars() const { return n_; }
    const std::map<Exponent, double>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    int degree() const;
    double max_abs_coefficient() const;
    double coefficient(const Exponent& alpha) const;

    void add_term(const Exponent& alpha, double c);
    Polynomial& operator+=(const Polynomial& o);
    Polynomial& operator-=(const Polynomial& o);
    Polynomial& operator*=(double s);
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

    double evaluate(const Eigen::VectorXd& x) const;

    // coefficient vector in the graded basis of degree <= deg (0-based slots)
    Eigen::VectorXd to_dense(int deg) const;
    static Polynomial from_dense(int nvars, const Eigen::VectorXd& c);

    // Substitutes x = x0 + M s, giving a polynomial in M.cols() variables.
    Polynomial substitute_affine(const Eigen::VectorXd& x0, const Eigen::MatrixXd& M) const;

    // drops coefficients with |c| <= tol
    void prune(double tol = 0.0);

private:
    int n_ = 0;
    std::map<Exponent, double> terms_;
};

} // namespace css
