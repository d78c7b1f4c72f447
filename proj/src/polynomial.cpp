#include "css/polynomial.hpp"

#include <cmath>
#include <stdexcept>

namespace css {

Polynomial Polynomial::constant(int nvars, double c) {
    Polynomial p(nvars);
    p.add_term(Exponent(nvars, 0), c);
    return p;
}

Polynomial Polynomial::variable(int nvars, int i) {
    Polynomial p(nvars);
    Exponent a(nvars, 0);
    a[i] = 1;
    p.add_term(a, 1.0);
    return p;
}

Polynomial Polynomial::monomial(const Exponent& alpha, double c) {
    Polynomial p(static_cast<int>(alpha.size()));
    p.add_term(alpha, c);
    return p;
}

int Polynomial::degree() const {
    int d = -1;
    for (const auto& [a, c] : terms_) {
        int k = 0;
        for (int v : a) k += v;
        d = std::max(d, k);
    }
    return d;
}

double Polynomial::max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& [a, c] : terms_) m = std::max(m, std::abs(c));
    return m;
}

double Polynomial::coefficient(const Exponent& alpha) const {
    auto it = terms_.find(alpha);
    return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Exponent& alpha, double c) {
    if (static_cast<int>(alpha.size()) != n_) throw std::invalid_argument("polynomial variable count mismatch");
    if (c == 0.0) return;
    auto [it, inserted] = terms_.emplace(alpha, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0.0) terms_.erase(it);
    }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
    if (n_ == 0) n_ = o.n_;
    for (const auto& [a, c] : o.terms_) add_term(a, c);
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
    if (n_ == 0) n_ = o.n_;
    for (const auto& [a, c] : o.terms_) add_term(a, -c);
    return *this;
}

Polynomial& Polynomial::operator*=(double s) {
    if (s == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& [a, c] : terms_) c *= s;
    return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.n_ != b.n_) throw std::invalid_argument("polynomial variable count mismatch");
    Polynomial out(a.n_);
    Exponent e(a.n_);
    for (const auto& [ea, ca] : a.terms_)
        for (const auto& [eb, cb] : b.terms_) {
            for (int i = 0; i < a.n_; ++i) e[i] = ea[i] + eb[i];
            out.add_term(e, ca * cb);
        }
    return out;
}

double Polynomial::evaluate(const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (const auto& [a, c] : terms_) {
        double t = c;
        for (int i = 0; i < n_; ++i)
            if (a[i]) t *= std::pow(x(i), a[i]);
        s += t;
    }
    return s;
}

Eigen::VectorXd Polynomial::to_dense(int deg) const {
    MonomialIndexer ix(n_);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s_p(n_, deg)));
    for (const auto& [a, c] : terms_) {
        Index t = ix.index_of(a);
        if (t > static_cast<Index>(v.size())) throw std::out_of_range("polynomial degree exceeds dense size");
        v(static_cast<Eigen::Index>(t - 1)) = c;
    }
    return v;
}

Polynomial Polynomial::from_dense(int nvars, const Eigen::VectorXd& c) {
    MonomialIndexer ix(nvars);
    Polynomial p(nvars);
    for (Eigen::Index t = 0; t < c.size(); ++t)
        if (c(t) != 0.0) p.add_term(ix.exponent_of(static_cast<Index>(t + 1)), c(t));
    return p;
}

Polynomial Polynomial::substitute_affine(const Eigen::VectorXd& x0, const Eigen::MatrixXd& M) const {
    const int k = static_cast<int>(M.cols());
    // powers[i][p] = (x0_i + M_i s)^p
    std::vector<std::vector<Polynomial>> powers(n_);
    for (int i = 0; i < n_; ++i) {
        Polynomial lin = constant(k, x0(i));
        for (int j = 0; j < k; ++j)
            if (M(i, j) != 0.0) lin += variable(k, j) * M(i, j);
        powers[i].push_back(constant(k, 1.0));
        powers[i].push_back(lin);
    }
    Polynomial out(k);
    for (const auto& [a, c] : terms_) {
        Polynomial term = constant(k, c);
        for (int i = 0; i < n_; ++i) {
            if (!a[i]) continue;
            while (static_cast<int>(powers[i].size()) <= a[i]) powers[i].push_back(powers[i].back() * powers[i][1]);
            term = term * powers[i][a[i]];
        }
        out += term;
    }
    return out;
}

void Polynomial::prune(double tol) {
    for (auto it = terms_.begin(); it != terms_.end();)
        if (std::abs(it->second) <= tol) it = terms_.erase(it);
        else ++it;
}

} // namespace css
