#include "css/sdp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace css {

const char* to_string(SdpStatus s) {
    switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::primal_infeasible: return "primal_infeasible";
    case SdpStatus::inaccurate: return "inaccurate";
    case SdpStatus::max_iter: return "max_iter";
    default: return "numeric";
    }
}

double min_eigenvalue(const Eigen::MatrixXd& M) {
    if (M.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

namespace {

using Blocks = std::vector<Eigen::MatrixXd>;

Eigen::VectorXd apply_A(const SdpProblem& p, const Blocks& X) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(p.m());
    for (size_t k = 0; k < X.size(); ++k)
        r += p.A[k] * Eigen::Map<const Eigen::VectorXd>(X[k].data(), X[k].size());
    return r;
}

Blocks apply_At(const SdpProblem& p, const Eigen::VectorXd& y) {
    Blocks out(p.block_sizes.size());
    for (size_t k = 0; k < out.size(); ++k) {
        int n = p.block_sizes[k];
        Eigen::VectorXd v = p.A[k].transpose() * y;
        out[k] = Eigen::Map<Eigen::MatrixXd>(v.data(), n, n);
        out[k] = 0.5 * (out[k] + out[k].transpose()).eval();
    }
    return out;
}

double inner(const Blocks& a, const Blocks& b) {
    double s = 0.0;
    for (size_t k = 0; k < a.size(); ++k) s += (a[k].array() * b[k].array()).sum();
    return s;
}

double block_norm(const Blocks& a) { return std::sqrt(inner(a, a)); }

// largest alpha in (0, inf] keeping X + alpha dX psd
double max_step(const Blocks& X, const Blocks& dX) {
    double a = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < X.size(); ++k) {
        Eigen::LLT<Eigen::MatrixXd> llt(X[k]);
        if (llt.info() != Eigen::Success) return 0.0;
        Eigen::MatrixXd Linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(X[k].rows(), X[k].cols()));
        Eigen::MatrixXd W = Linv * dX[k] * Linv.transpose();
        double lm = min_eigenvalue(W);
        if (lm < 0) a = std::min(a, -1.0 / lm);
    }
    return a;
}

Blocks sym(Blocks b) {
    for (auto& m : b) m = 0.5 * (m + m.transpose()).eval();
    return b;
}

} // namespace

SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opt) {
    const size_t K = p.block_sizes.size();
    if (p.A.size() != K) throw std::invalid_argument("sdp: block count mismatch");
    const int m = p.m();
    int N = 0;
    for (int n : p.block_sizes) N += n;

    Blocks C(K);
    for (size_t k = 0; k < K; ++k)
        C[k] = p.C.empty() ? Eigen::MatrixXd::Identity(p.block_sizes[k], p.block_sizes[k]) : p.C[k];

    SdpSolution sol;
    const double bnorm = p.b.size() ? p.b.lpNorm<Eigen::Infinity>() : 0.0;
    const double cnorm = block_norm(C);
    Blocks X(K), S(K);
    double xi = 10.0 * std::max(1.0, bnorm);
    for (size_t k = 0; k < K; ++k) {
        X[k] = xi * Eigen::MatrixXd::Identity(p.block_sizes[k], p.block_sizes[k]);
        S[k] = Eigen::MatrixXd::Identity(p.block_sizes[k], p.block_sizes[k]);
    }
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
    double best = std::numeric_limits<double>::infinity();
    int best_it = 0;
    Blocks bestX, bestS;
    Eigen::VectorXd besty;

    for (int it = 0; it < opt.max_iter; ++it) {
        sol.iterations = it;
        Eigen::VectorXd Rp = p.b - apply_A(p, X);
        Blocks Aty = apply_At(p, y);
        Blocks Rd(K);
        for (size_t k = 0; k < K; ++k) Rd[k] = C[k] - S[k] - Aty[k];
        double mu = inner(X, S) / std::max(N, 1);
        double pobj = inner(C, X), dobj = p.b.dot(y);

        double pinf = Rp.norm() / (1.0 + bnorm);
        double dinf = block_norm(Rd) / (1.0 + cnorm);
        double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        sol.primal_residual = Rp.lpNorm<Eigen::Infinity>();
        if (pinf <= opt.tol && dinf <= opt.tol && gap <= opt.tol) {
            sol.status = SdpStatus::optimal;
            break;
        }
        double merit = std::max({pinf, dinf, gap});
        if (merit < 0.5 * best) best_it = it;
        if (merit < best) {
            best = merit;
            bestX = X;
            bestS = S;
            besty = y;
        }
        if (best <= opt.inaccurate_tol && it - best_it > 8) break; // stalled near a solution
        if (dobj > 0) {
            double lm = std::numeric_limits<double>::infinity();
            for (size_t k = 0; k < K; ++k) lm = std::min(lm, min_eigenvalue(-Aty[k]));
            if (lm / dobj > -opt.farkas_tol && dinf <= 1e-6) {
                sol.status = SdpStatus::primal_infeasible;
                break;
            }
        }

        Blocks Sinv(K);
        for (size_t k = 0; k < K; ++k) {
            Eigen::LLT<Eigen::MatrixXd> llt(S[k]);
            if (llt.info() != Eigen::Success) {
                sol.status = SdpStatus::numeric;
                sol.X = X;
                sol.S = S;
                sol.y = y;
                return sol;
            }
            Sinv[k] = llt.solve(Eigen::MatrixXd::Identity(S[k].rows(), S[k].cols()));
        }
        // Schur complement M_ij = sum_k tr(A_i X A_j S^-1)
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
        for (size_t k = 0; k < K; ++k) {
            int n = p.block_sizes[k];
            Eigen::MatrixXd W(n * n, m);
            for (int j = 0; j < m; ++j) {
                Eigen::VectorXd aj = p.A[k].row(j).transpose();
                if (aj.isZero(0.0)) {
                    W.col(j).setZero();
                    continue;
                }
                Eigen::Map<const Eigen::MatrixXd> Aj(aj.data(), n, n);
                Eigen::MatrixXd G = X[k] * Aj * Sinv[k];
                W.col(j) = Eigen::Map<const Eigen::VectorXd>(G.data(), n * n);
            }
            M.noalias() += p.A[k] * W;
        }
        M = 0.5 * (M + M.transpose()).eval();
        M.diagonal().array() += 1e-14 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        if (ldlt.info() != Eigen::Success) {
            sol.status = SdpStatus::numeric;
            break;
        }

        Blocks XRdSinv(K);
        for (size_t k = 0; k < K; ++k) XRdSinv[k] = X[k] * Rd[k] * Sinv[k];
        Eigen::VectorXd base = p.b + apply_A(p, XRdSinv);

        auto direction = [&](double sigma, const Blocks* corr, Eigen::VectorXd& dy, Blocks& dX, Blocks& dS) {
            Eigen::VectorXd rhs = base;
            Blocks T(K);
            for (size_t k = 0; k < K; ++k) {
                T[k] = sigma * mu * Sinv[k];
                if (corr) T[k] -= (*corr)[k];
            }
            rhs -= apply_A(p, T);
            dy = ldlt.solve(rhs);
            Blocks Atdy = apply_At(p, dy);
            dS.resize(K);
            dX.resize(K);
            for (size_t k = 0; k < K; ++k) {
                dS[k] = Rd[k] - Atdy[k];
                dX[k] = T[k] - X[k] - X[k] * dS[k] * Sinv[k];
            }
            dX = sym(dX);
        };

        Eigen::VectorXd dy;
        Blocks dX, dS;
        direction(0.0, nullptr, dy, dX, dS);
        double ap = std::min(1.0, max_step(X, dX));
        double ad = std::min(1.0, max_step(S, dS));
        double mu_aff = 0.0;
        for (size_t k = 0; k < K; ++k) mu_aff += ((X[k] + ap * dX[k]).array() * (S[k] + ad * dS[k]).array()).sum();
        mu_aff /= std::max(N, 1);
        double sigma = std::pow(std::max(mu_aff, 0.0) / std::max(mu, 1e-300), 3);
        sigma = std::min(1.0, std::max(sigma, 0.0));
        Blocks corr(K);
        for (size_t k = 0; k < K; ++k) corr[k] = dX[k] * dS[k] * Sinv[k];
        direction(sigma, &corr, dy, dX, dS);
        ap = std::min(1.0, 0.98 * max_step(X, dX));
        ad = std::min(1.0, 0.98 * max_step(S, dS));
        if (!(ap > 0) || !(ad > 0) || !dy.allFinite()) {
            sol.status = SdpStatus::numeric;
            break;
        }
        for (size_t k = 0; k < K; ++k) {
            X[k] += ap * dX[k];
            S[k] += ad * dS[k];
            X[k] = 0.5 * (X[k] + X[k].transpose()).eval();
            S[k] = 0.5 * (S[k] + S[k].transpose()).eval();
        }
        y += ad * dy;
        if (it + 1 == opt.max_iter) sol.status = SdpStatus::max_iter;
    }
    if (sol.status != SdpStatus::optimal && sol.status != SdpStatus::primal_infeasible && best <= opt.inaccurate_tol) {
        sol.status = SdpStatus::inaccurate;
        X = bestX;
        S = bestS;
        y = besty;
    }
    sol.X = X;
    sol.S = S;
    sol.y = y;
    return sol;
}

} // namespace css
