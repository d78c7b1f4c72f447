#pragma once

#include "css/model.hpp"
#include "css/polynomial.hpp"
#include "css/sdprelax.hpp"
#include "css/simplex.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace test_support {

inline std::string model_path(const std::string& name) { return std::string(CSS_MODELS_DIR) + "/" + name; }

inline css::NetworkModel toy() { return css::load_model_file(model_path("toy.json")); }
inline css::NetworkModel toy_reversed() { return css::reverse_reactions(toy(), {"all"}); }
inline css::NetworkModel glycolysis() { return css::load_model_file(model_path("glycolysis.json")); }

// n metabolites with random charges, buffers and osmotic coefficients and
// m reactions touching 2-4 metabolites each.
inline css::NetworkModel random_model(int n, int m, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> zdist(-2, 2), cdist(-2, 2), pick(0, n - 1), width(2, 4);
    std::uniform_real_distribution<double> u(0.1, 2.0), logk(-6.0, 6.0);
    css::NetworkModel model;
    for (int i = 0; i < n; ++i) model.metabolites.push_back({"M" + std::to_string(i), zdist(rng), u(rng), u(rng)});
    for (int j = 0; j < m; ++j) {
        css::Reaction r;
        r.id = "R" + std::to_string(j);
        int k = width(rng);
        std::vector<bool> used(n, false);
        while (static_cast<int>(r.stoich.size()) < k) {
            int i = pick(rng);
            if (used[i]) continue;
            int c = cdist(rng);
            if (c == 0) continue;
            used[i] = true;
            r.stoich.emplace_back(model.metabolites[i].id, c);
        }
        r.kprime = std::pow(10.0, logk(rng));
        model.reactions.push_back(r);
    }
    return model;
}

// Uniform samples of {x >= 0 : A x = b} by rejection in the coordinates of
// an orthonormal kernel basis. f is called with each accepted x; sampling
// stops early when f returns false. Returns the number of accepted samples.
template <class F>
long sample_polytope(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, long count, std::uint64_t seed, F f) {
    const int n = static_cast<int>(A.cols());
    Eigen::VectorXd x0 = A.completeOrthogonalDecomposition().solve(b);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const int r = static_cast<int>(svd.rank());
    Eigen::MatrixXd N = svd.matrixV().rightCols(n - r);
    const int k = n - r;
    if (k == 0) {
        if ((x0.array() >= 0).all()) f(x0);
        return (x0.array() >= 0).all() ? 1 : 0;
    }
    Eigen::VectorXd lo(k), hi(k);
    for (int i = 0; i < k; ++i) {
        for (int sgn : {1, -1}) {
            css::LpProblem lp;
            lp.A.resize(0, k);
            lp.c = Eigen::VectorXd::Zero(k);
            lp.c(i) = sgn;
            lp.lo = Eigen::VectorXd::Constant(k, -css::kInf);
            lp.hi = Eigen::VectorXd::Constant(k, css::kInf);
            for (int row = 0; row < n; ++row) lp.add_row(-N.row(row), css::RowType::le, x0(row));
            css::LpSolution s = css::solve_lp(lp);
            if (s.status != css::LpStatus::optimal) return 0;
            (sgn > 0 ? lo(i) : hi(i)) = s.x(i);
        }
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long accepted = 0;
    Eigen::VectorXd c(k);
    for (long tries = 0; accepted < count && tries < 1000 * count; ++tries) {
        for (int i = 0; i < k; ++i) c(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
        Eigen::VectorXd x = x0 + N * c;
        if ((x.array() < 0).any()) continue;
        ++accepted;
        if (!f(x)) break;
    }
    return accepted;
}

// Largest coefficient of sum_j g_j z'P_j z + sum_i h_i beta_i + 1, built with
// polynomial arithmetic from the system itself (not from the tensors).
inline double certificate_identity_error(const css::PolySystem& sys, const css::GeneratorSet& gens,
                                         const std::vector<Eigen::MatrixXd>& P, const Eigen::MatrixXd& B) {
    const int n = sys.n;
    css::MonomialIndexer ix(n);
    css::Polynomial total = css::Polynomial::constant(n, 1.0);
    for (size_t j = 0; j < gens.products.size() && j < P.size(); ++j) {
        css::Polynomial g = css::Polynomial::constant(n, 1.0);
        for (int k : gens.products[j]) g = g * sys.inequalities[k];
        css::Polynomial sos(n);
        for (Eigen::Index r = 0; r < P[j].rows(); ++r)
            for (Eigen::Index c = 0; c < P[j].cols(); ++c) {
                if (P[j](r, c) == 0.0) continue;
                css::Exponent a = ix.exponent_of(r + 1), b2 = ix.exponent_of(c + 1);
                for (int i = 0; i < n; ++i) a[i] += b2[i];
                sos.add_term(a, P[j](r, c));
            }
        total += g * sos;
    }
    for (Eigen::Index i = 0; i < B.rows(); ++i) {
        css::Polynomial h = css::Polynomial::constant(n, -sys.b(i));
        for (int k = 0; k < n; ++k) h += css::Polynomial::variable(n, k) * sys.A(i, k);
        css::Polynomial beta(n);
        for (Eigen::Index c = 0; c < B.cols(); ++c)
            if (B(i, c) != 0.0) beta.add_term(ix.exponent_of(c + 1), B(i, c));
        total += h * beta;
    }
    double err = 0.0;
    for (const auto& [a, v] : total.terms()) err = std::max(err, std::abs(v));
    return err;
}

} // namespace test_support
