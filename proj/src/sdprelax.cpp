#include "css/sdprelax.hpp"
#include "css/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <functional>

namespace css {

GeneratorSet GeneratorSet::truncated(int num_ineq, int k_max) {
    GeneratorSet g;
    g.k_max = k_max;
    g.products.push_back({});
    std::vector<int> cur;
    std::function<void(int, int)> rec = [&](int start, int left) {
        if (left == 0) {
            g.products.push_back(cur);
            return;
        }
        for (int i = start; i < num_ineq; ++i) {
            cur.push_back(i);
            rec(i, left - 1);
            cur.pop_back();
        }
    };
    for (int k = 1; k <= k_max; ++k) rec(0, k);
    return g;
}

std::vector<Polynomial> PolySystem::equalities() const {
    std::vector<Polynomial> out;
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        Polynomial h = Polynomial::constant(n, -b(i));
        for (int j = 0; j < n; ++j)
            if (A(i, j) != 0.0) h += Polynomial::variable(n, j) * A(i, j);
        out.push_back(std::move(h));
    }
    return out;
}

PolySystem polynomial_system(const ConstraintSystem& cs, const ParameterPoint& theta, bool include_sign) {
    PolySystem sys;
    sys.n = cs.n();
    for (const auto& tp : thermo_polynomials(cs, theta)) {
        Exponent r(tp.reactant.begin(), tp.reactant.end()), p(tp.product.begin(), tp.product.end());
        Polynomial g(sys.n);
        g.add_term(r, tp.kpp);
        g.add_term(p, -1.0);
        g *= 1.0 / std::max(std::abs(tp.kpp), 1.0);
        sys.inequalities.push_back(std::move(g));
    }
    if (include_sign)
        for (int i = 0; i < sys.n; ++i) sys.inequalities.push_back(Polynomial::variable(sys.n, i));
    sys.A = cs.A;
    sys.b = cs.rhs(theta);
    return sys;
}

const char* to_string(CertificateStatus s) {
    switch (s) {
    case CertificateStatus::certified_infeasible: return "certified_infeasible";
    case CertificateStatus::no_certificate_at_level: return "no_certificate_at_level";
    default: return "solver_failure";
    }
}

namespace {

std::vector<Polynomial> generator_polys(const PolySystem& sys, const GeneratorSet& gens) {
    std::vector<Polynomial> out;
    for (const auto& prod : gens.products) {
        Polynomial g = Polynomial::constant(sys.n, 1.0);
        for (int i : prod) {
            if (i < 0 || i >= static_cast<int>(sys.inequalities.size()))
                throw std::out_of_range("generator references unknown inequality");
            g = g * sys.inequalities[i];
        }
        out.push_back(std::move(g));
    }
    return out;
}

Exponent add(const Exponent& a, const Exponent& b) {
    Exponent c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
    return c;
}

// Row-major flatten of an l x cols matrix.
Eigen::VectorXd flatten(const Eigen::MatrixXd& B) {
    Eigen::VectorXd v(B.size());
    for (Eigen::Index i = 0; i < B.rows(); ++i)
        for (Eigen::Index c = 0; c < B.cols(); ++c) v(i * B.cols() + c) = B(i, c);
    return v;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd B(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c) B(i, c) = v(i * cols + c);
    return B;
}

std::vector<int> independent_rows(const Eigen::MatrixXd& M) {
    std::vector<int> rows;
    if (M.rows() == 0) return rows;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M.transpose());
    qr.setThreshold(1e-11);
    for (Eigen::Index i = 0; i < qr.rank(); ++i) rows.push_back(qr.colsPermutation().indices()(i));
    std::sort(rows.begin(), rows.end());
    return rows;
}

// Solves the Gram-block feasibility system sum_k Mk vec(X_k) = rhs, X_k psd.
struct GramSolve {
    SdpStatus status = SdpStatus::numeric;
    std::vector<Eigen::MatrixXd> X;
    std::string message;
};

GramSolve solve_gram_system(const std::vector<Eigen::MatrixXd>& Mk, const std::vector<int>& sizes,
                            const Eigen::VectorXd& rhs, const SdpOptions& sopt) {
    GramSolve out;
    const Eigen::Index m = rhs.size();
    Eigen::Index total = 0;
    for (int s : sizes) total += static_cast<Eigen::Index>(s) * s;
    Eigen::MatrixXd big(m, total);
    Eigen::Index off = 0;
    for (size_t k = 0; k < Mk.size(); ++k) {
        big.middleCols(off, Mk[k].cols()) = Mk[k];
        off += Mk[k].cols();
    }
    std::vector<int> rows = independent_rows(big);
    // rows outside the span of the others must have consistent right-hand sides
    Eigen::MatrixXd sel(rows.size(), total);
    Eigen::VectorXd rsel(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        sel.row(i) = big.row(rows[i]);
        rsel(i) = rhs(rows[i]);
    }
    if (static_cast<Eigen::Index>(rows.size()) < m) {
        Eigen::VectorXd coef = sel.transpose().colPivHouseholderQr().solve(big.transpose()).transpose() * rsel;
        if ((coef - rhs).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
            out.status = SdpStatus::primal_infeasible;
            out.message = "linear system inconsistent";
            return out;
        }
    }
    SdpProblem p;
    p.block_sizes = sizes;
    p.b = rsel;
    off = 0;
    for (size_t k = 0; k < Mk.size(); ++k) {
        p.A.push_back(sel.middleCols(off, Mk[k].cols()));
        off += Mk[k].cols();
    }
    SdpSolution s = solve_sdp(p, sopt);
    out.status = s.status == SdpStatus::inaccurate ? SdpStatus::optimal : s.status;
    if (out.status != SdpStatus::optimal) {
        out.message = std::string("sdp solver: ") + to_string(s.status);
        return out;
    }
    // minimum-norm correction onto the affine constraint set
    Eigen::VectorXd x(total);
    off = 0;
    for (size_t k = 0; k < s.X.size(); ++k) {
        x.segment(off, s.X[k].size()) = Eigen::Map<const Eigen::VectorXd>(s.X[k].data(), s.X[k].size());
        off += s.X[k].size();
    }
    Eigen::MatrixXd G = sel * sel.transpose();
    Eigen::LDLT<Eigen::MatrixXd> gl(G);
    auto project_affine = [&] { x += sel.transpose() * gl.solve(rsel - sel * x); };
    // alternate with psd clipping while the correction leaves negative eigenvalues
    for (int pass = 0; pass < 200; ++pass) {
        project_affine();
        double worst = 0.0, scale = 1.0;
        off = 0;
        for (size_t k = 0; k < s.X.size(); ++k) {
            int n = sizes[k];
            Eigen::MatrixXd Xk = Eigen::Map<const Eigen::MatrixXd>(x.data() + off, n, n);
            Xk = 0.5 * (Xk + Xk.transpose()).eval();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Xk);
            worst = std::min(worst, es.eigenvalues()(0));
            scale = std::max(scale, es.eigenvalues()(n - 1));
            Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
            Xk = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
            x.segment(off, static_cast<Eigen::Index>(n) * n) = Eigen::Map<const Eigen::VectorXd>(Xk.data(), Xk.size());
            off += static_cast<Eigen::Index>(n) * n;
        }
        if (worst >= -1e-13 * scale) break;
    }
    project_affine();
    off = 0;
    for (size_t k = 0; k < s.X.size(); ++k) {
        int n = sizes[k];
        Eigen::MatrixXd Xk = Eigen::Map<const Eigen::MatrixXd>(x.data() + off, n, n);
        out.X.push_back(0.5 * (Xk + Xk.transpose()));
        off += static_cast<Eigen::Index>(n) * n;
    }
    return out;
}

} // namespace

SdpRelaxation build_relaxation(const PolySystem& sys, int d, const GeneratorSet& gens, const RelaxationOptions& opt) {
    if (d < 1) throw std::invalid_argument("relaxation level must be >= 1");
    if (sys.n < 1) throw std::invalid_argument("polynomial system needs at least one variable");
    SdpRelaxation rel;
    rel.n = sys.n;
    rel.d = d;
    rel.system = sys;
    rel.gens = gens;
    rel.gen_polys = generator_polys(sys, gens);
    rel.d_g = 0;
    for (const auto& g : rel.gen_polys) rel.d_g = std::max(rel.d_g, g.degree());
    rel.rho = 2 * d + rel.d_g;
    rel.num_rows = s_p(sys.n, rel.rho);
    if (rel.num_rows > opt.size_cap)
        throw SizeError("relaxation needs " + std::to_string(rel.num_rows) + " equality rows, cap is " +
                        std::to_string(opt.size_cap));
    rel.gram_size = s_p(sys.n, d);
    if (rel.gram_size > static_cast<Index>(opt.max_block))
        throw SizeError("gram block size " + std::to_string(rel.gram_size) + " exceeds cap " + std::to_string(opt.max_block));
    rel.b_cols = s_p(sys.n, rel.rho - 1);
    rel.l = static_cast<int>(sys.A.rows());

    MonomialIndexer ix(sys.n);
    auto table = StructureTable::get(sys.n, 2 * d);
    const Index G = rel.gram_size;
    const Index top = s_p(sys.n, 2 * d);
    std::vector<Exponent> pex(top);
    for (Index t = 1; t <= top; ++t) pex[t - 1] = ix.exponent_of(t);

    for (const auto& g : rel.gen_polys) {
        std::vector<Eigen::Triplet<double>> trip;
        for (const auto& [alpha, c] : g.terms())
            for (Index r = 1; r <= G; ++r)
                for (Index s = 1; s <= G; ++s) {
                    Index p = table->product(r, s);
                    Index t = ix.index_of(add(pex[p - 1], alpha));
                    trip.emplace_back(static_cast<int>(t - 1), static_cast<int>((r - 1) * G + (s - 1)), c);
                }
        RowSparse U(static_cast<Eigen::Index>(rel.num_rows), static_cast<Eigen::Index>(G * G));
        U.setFromTriplets(trip.begin(), trip.end());
        U.prune(0.0);
        rel.U.push_back(std::move(U));
    }

    std::vector<Eigen::Triplet<double>> vt;
    auto eqs = sys.equalities();
    for (int i = 0; i < rel.l; ++i)
        for (Index c = 1; c <= rel.b_cols; ++c) {
            Exponent ec = ix.exponent_of(c);
            for (const auto& [a, coef] : eqs[i].terms()) {
                Index t = ix.index_of(add(ec, a));
                vt.emplace_back(static_cast<int>(t - 1), static_cast<int>(i * rel.b_cols + (c - 1)), coef);
            }
        }
    rel.V = RowSparse(static_cast<Eigen::Index>(rel.num_rows), static_cast<Eigen::Index>(rel.l * rel.b_cols));
    rel.V.setFromTriplets(vt.begin(), vt.end());
    rel.V.prune(0.0);
    return rel;
}

SdpRelaxation build_relaxation(const ConstraintSystem& cs, const ParameterPoint& theta, int d, const RelaxationOptions& opt) {
    PolySystem sys = polynomial_system(cs, theta, opt.include_sign);
    return build_relaxation(sys, d, GeneratorSet::truncated(static_cast<int>(sys.inequalities.size()), opt.k_max), opt);
}

std::vector<bool> SdpRelaxation::zero_rows() const {
    std::vector<bool> z(num_rows, true);
    for (const auto& u : U)
        for (Eigen::Index t = 0; t < u.outerSize(); ++t)
            if (u.outerIndexPtr()[t + 1] > u.outerIndexPtr()[t]) z[t] = false;
    return z;
}

double SdpRelaxation::zero_row_fraction() const {
    auto z = zero_rows();
    size_t k = 0;
    for (bool b : z) k += b;
    return static_cast<double>(k) / static_cast<double>(num_rows);
}

double SdpRelaxation::zero_slice_fraction() const {
    size_t zero = 0, total = 0;
    for (const auto& u : U)
        for (Eigen::Index t = 0; t < u.outerSize(); ++t) {
            ++total;
            if (u.outerIndexPtr()[t + 1] == u.outerIndexPtr()[t]) ++zero;
        }
    return total ? static_cast<double>(zero) / static_cast<double>(total) : 0.0;
}

namespace {

RowSparse select_rows(const RowSparse& M, const std::vector<Index>& rows) {
    std::vector<Eigen::Triplet<double>> trip;
    for (size_t i = 0; i < rows.size(); ++i)
        for (RowSparse::InnerIterator it(M, static_cast<Eigen::Index>(rows[i])); it; ++it)
            trip.emplace_back(static_cast<int>(i), static_cast<int>(it.col()), it.value());
    RowSparse out(static_cast<Eigen::Index>(rows.size()), M.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

} // namespace

ReducedRelaxation sparsity_reduce(const SdpRelaxation& rel, Index max_dense) {
    ReducedRelaxation red;
    red.full = &rel;
    auto zero = rel.zero_rows();
    for (Index t = 0; t < rel.num_rows; ++t) {
        if (t > 0 && zero[t]) red.eliminated_rows.push_back(t);
        else red.retained_rows.push_back(t);
    }
    for (size_t j = 0; j < rel.U.size(); ++j)
        if (rel.U[j].nonZeros() > 0) red.retained_blocks.push_back(static_cast<int>(j));

    const Eigen::Index nb = rel.V.cols();
    RowSparse Vt = select_rows(rel.V, red.eliminated_rows);
    std::vector<char> touched(nb, 0);
    for (Eigen::Index r = 0; r < Vt.outerSize(); ++r)
        for (RowSparse::InnerIterator it(Vt, r); it; ++it) touched[it.col()] = 1;
    std::vector<Eigen::Index> J0, J1;
    for (Eigen::Index c = 0; c < nb; ++c) (touched[c] ? J1 : J0).push_back(c);
    if (static_cast<Index>(J1.size()) > max_dense)
        throw SizeError("sparsity reduction needs a dense kernel over " + std::to_string(J1.size()) + " columns");

    Eigen::MatrixXd kernel;
    if (!J1.empty()) {
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(Vt.rows(), static_cast<Eigen::Index>(J1.size()));
        std::vector<Eigen::Index> pos(nb, -1);
        for (size_t k = 0; k < J1.size(); ++k) pos[J1[k]] = static_cast<Eigen::Index>(k);
        for (Eigen::Index r = 0; r < Vt.outerSize(); ++r)
            for (RowSparse::InnerIterator it(Vt, r); it; ++it) D(r, pos[it.col()]) = it.value();
        Eigen::BDCSVD<Eigen::MatrixXd> svd(D, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        double smax = sv.size() ? sv(0) : 0.0;
        double tau = static_cast<double>(std::max(D.rows(), D.cols())) * std::numeric_limits<double>::epsilon() * smax;
        Eigen::Index rank = 0;
        for (Eigen::Index i = 0; i < sv.size(); ++i) {
            if (sv(i) > tau) ++rank;
            if (std::abs(sv(i) - tau) <= 1e-10) red.rank_warning = true;
        }
        kernel = svd.matrixV().rightCols(D.cols() - rank);
    }
    Eigen::Index kdim = static_cast<Eigen::Index>(J0.size()) + kernel.cols();
    if (static_cast<double>(nb) * static_cast<double>(kdim) > 4e7)
        throw SizeError("reduced multiplier basis too large (" + std::to_string(nb) + " x " + std::to_string(kdim) + ")");
    red.N = Eigen::MatrixXd::Zero(nb, kdim);
    for (size_t k = 0; k < J0.size(); ++k) red.N(J0[k], static_cast<Eigen::Index>(k)) = 1.0;
    for (Eigen::Index c = 0; c < kernel.cols(); ++c)
        for (size_t k = 0; k < J1.size(); ++k)
            red.N(J1[k], static_cast<Eigen::Index>(J0.size()) + c) = kernel(static_cast<Eigen::Index>(k), c);
    red.b_m = Eigen::VectorXd::Zero(nb);

    for (int j : red.retained_blocks) red.U.push_back(select_rows(rel.U[j], red.retained_rows));
    RowSparse Vr = select_rows(rel.V, red.retained_rows);
    red.VN = Vr * red.N;
    red.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(red.retained_rows.size()));
    red.rhs(0) = -1.0;
    return red;
}

ReducedRelaxation unreduced(const SdpRelaxation& rel) {
    ReducedRelaxation red;
    red.full = &rel;
    for (Index t = 0; t < rel.num_rows; ++t) red.retained_rows.push_back(t);
    for (size_t j = 0; j < rel.U.size(); ++j) red.retained_blocks.push_back(static_cast<int>(j));
    red.N = Eigen::MatrixXd::Identity(rel.V.cols(), rel.V.cols());
    red.b_m = Eigen::VectorXd::Zero(rel.V.cols());
    red.U = rel.U;
    red.VN = Eigen::MatrixXd(rel.V);
    red.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rel.num_rows));
    red.rhs(0) = -1.0;
    return red;
}

std::pair<double, double> verify_witness(const SdpRelaxation& rel, const std::vector<Eigen::MatrixXd>& P,
                                         const Eigen::MatrixXd& B) {
    if (P.size() != rel.U.size()) throw std::invalid_argument("witness block count mismatch");
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rel.num_rows));
    r(0) = 1.0;
    double lmin = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < P.size(); ++j) {
        Eigen::MatrixXd Pt = P[j].transpose(); // row-major vec of P equals column-major vec of P'
        r += rel.U[j] * Eigen::Map<const Eigen::VectorXd>(Pt.data(), Pt.size());
        lmin = std::min(lmin, min_eigenvalue(P[j]));
    }
    if (rel.V.cols() > 0) r += rel.V * flatten(B);
    if (P.empty()) lmin = 0.0;
    return {r.lpNorm<Eigen::Infinity>(), lmin};
}

namespace {

void finish(CertificateResult& res, const SdpRelaxation& rel, const RelaxationOptions& opt) {
    auto [viol, lmin] = verify_witness(rel, res.P, res.B);
    res.max_violation = viol;
    res.min_eigenvalue = lmin;
    if (viol <= opt.tol_eq && lmin >= -opt.tol_psd) {
        res.status = CertificateStatus::certified_infeasible;
    } else {
        res.status = CertificateStatus::solver_failure;
        res.message = "witness rejected: violation " + std::to_string(viol) + ", min eigenvalue " + std::to_string(lmin);
    }
}

} // namespace

CertificateResult solve_feasibility(const ReducedRelaxation& red, const RelaxationOptions& opt) {
    if (!red.full) throw std::invalid_argument("reduced relaxation detached from its source");
    const SdpRelaxation& rel = *red.full;
    CertificateResult res;
    res.level = rel.d;
    const Eigen::Index R = static_cast<Eigen::Index>(red.retained_rows.size());
    const int G = static_cast<int>(rel.gram_size);

    // project out the free multipliers
    Eigen::MatrixXd Z;
    if (red.VN.cols() > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(red.VN);
        qr.setThreshold(1e-11);
        Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(R, R);
        Z = Q.rightCols(R - qr.rank());
    } else {
        Z = Eigen::MatrixXd::Identity(R, R);
    }
    std::vector<Eigen::MatrixXd> Mk;
    std::vector<int> sizes;
    for (const auto& u : red.U) {
        Mk.push_back(Z.transpose() * Eigen::MatrixXd(u));
        sizes.push_back(G);
    }
    Eigen::VectorXd rhs = Z.transpose() * red.rhs;
    GramSolve gs = solve_gram_system(Mk, sizes, rhs, opt.sdp);
    if (gs.status == SdpStatus::primal_infeasible) {
        res.status = CertificateStatus::no_certificate_at_level;
        res.message = gs.message;
        return res;
    }
    if (gs.status != SdpStatus::optimal) {
        res.status = CertificateStatus::solver_failure;
        res.message = gs.message;
        return res;
    }
    res.P.assign(rel.U.size(), Eigen::MatrixXd::Zero(G, G));
    Eigen::VectorXd resid = red.rhs;
    for (size_t k = 0; k < red.retained_blocks.size(); ++k) {
        // U stores row-major vec(P); gram matrices are symmetric so the layouts agree
        res.P[red.retained_blocks[k]] = gs.X[k];
        resid -= red.U[k] * Eigen::Map<const Eigen::VectorXd>(gs.X[k].data(), gs.X[k].size());
    }
    Eigen::VectorXd bvec = red.b_m;
    if (red.VN.cols() > 0) {
        Eigen::VectorXd omega = red.VN.completeOrthogonalDecomposition().solve(resid);
        bvec += red.N * omega;
    }
    res.B = unflatten(bvec, rel.l, static_cast<Eigen::Index>(rel.b_cols));
    finish(res, rel, opt);
    return res;
}

namespace {

// Divides R by the affine equalities A x = b; returns beta with sum beta_k h_k = R - remainder.
std::vector<Polynomial> divide_by_affine(const Polynomial& R, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                         Polynomial& remainder) {
    const int n = static_cast<int>(A.cols());
    const int l = static_cast<int>(A.rows());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    std::vector<int> piv(l);
    for (int i = 0; i < l; ++i) piv[i] = qr.colsPermutation().indices()(i);
    Eigen::MatrixXd Ap(l, l);
    for (int i = 0; i < l; ++i) Ap.col(i) = A.col(piv[i]);
    Eigen::MatrixXd Apinv = Ap.inverse();
    Eigen::MatrixXd Ar = Apinv * A;
    Eigen::VectorXd br = Apinv * b;
    std::vector<bool> is_piv(n, false);
    for (int p : piv) is_piv[p] = true;
    // x_{p_i} = h'_i - rest_i
    std::vector<Polynomial> rest(l);
    for (int i = 0; i < l; ++i) {
        rest[i] = Polynomial::constant(n, -br(i));
        for (int j = 0; j < n; ++j)
            if (!is_piv[j] && Ar(i, j) != 0.0) rest[i] += Polynomial::variable(n, j) * Ar(i, j);
    }
    std::vector<Polynomial> q(l, Polynomial(n));
    Polynomial work = R;
    while (true) {
        std::vector<std::pair<Exponent, double>> pending;
        for (const auto& [a, c] : work.terms())
            for (int i = 0; i < l; ++i)
                if (a[piv[i]] > 0) {
                    pending.emplace_back(a, c);
                    break;
                }
        if (pending.empty()) break;
        for (const auto& [a, c] : pending) {
            work.add_term(a, -c);
            int i = 0;
            while (a[piv[i]] == 0) ++i;
            Exponent a2 = a;
            a2[piv[i]] -= 1;
            q[i].add_term(a2, c);
            work -= Polynomial::monomial(a2, c) * rest[i];
        }
    }
    remainder = work;
    std::vector<Polynomial> beta(l, Polynomial(n));
    for (int k = 0; k < l; ++k)
        for (int i = 0; i < l; ++i)
            if (Apinv(i, k) != 0.0) beta[k] += q[i] * Apinv(i, k);
    return beta;
}

} // namespace

CertificateResult certify_level(const PolySystem& sys, int d, const GeneratorSet& gens, const RelaxationOptions& opt) {
    SdpRelaxation rel = build_relaxation(sys, d, gens, opt);
    CertificateResult res;
    res.level = d;
    const int n = sys.n;
    const int l = rel.l;

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
    if (l > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rq(sys.A);
        if (rq.rank() < l) throw RankError("equality rows are linearly dependent");
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(sys.A.transpose());
        Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
        M = Q.rightCols(n - l);
        x0 = sys.A.transpose() * (sys.A * sys.A.transpose()).ldlt().solve(sys.b);
    }
    const int k = n - l;
    if (k == 0) {
        res.status = CertificateStatus::solver_failure;
        res.message = "equalities fix a single point; nothing to relax";
        return res;
    }

    MonomialIndexer ixs(k), ixx(n);
    const Index Gx = rel.gram_size, Gs = s_p(k, d);
    const Index rows = s_p(k, rel.rho);
    Eigen::MatrixXd T(Gx, Gs);
    for (Index r = 1; r <= Gx; ++r)
        T.row(r - 1) = Polynomial::monomial(ixx.exponent_of(r), 1.0).substitute_affine(x0, M).to_dense(d).transpose();

    std::vector<Exponent> sex(Gs);
    for (Index a = 1; a <= Gs; ++a) sex[a - 1] = ixs.exponent_of(a);
    std::vector<Eigen::MatrixXd> W;
    std::vector<int> sizes;
    for (const auto& g : rel.gen_polys) {
        Polynomial gt = g.substitute_affine(x0, M);
        gt.prune(1e-15 * std::max(1.0, gt.max_abs_coefficient()));
        Eigen::MatrixXd Wj = Eigen::MatrixXd::Zero(rows, Gs * Gs);
        for (const auto& [alpha, c] : gt.terms())
            for (Index a = 0; a < Gs; ++a)
                for (Index b2 = 0; b2 < Gs; ++b2) {
                    Index t = ixs.index_of(add(add(sex[a], sex[b2]), alpha));
                    Wj(t - 1, a * Gs + b2) += c;
                }
        W.push_back(std::move(Wj));
        sizes.push_back(static_cast<int>(Gs));
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
    rhs(0) = -1.0;
    GramSolve gs = solve_gram_system(W, sizes, rhs, opt.sdp);
    if (gs.status == SdpStatus::primal_infeasible) {
        res.status = CertificateStatus::no_certificate_at_level;
        res.message = gs.message;
        return res;
    }
    if (gs.status != SdpStatus::optimal) {
        res.status = CertificateStatus::solver_failure;
        res.message = gs.message;
        return res;
    }

    Eigen::MatrixXd Tt = T * (T.transpose() * T).inverse();
    Polynomial R = Polynomial::constant(n, -1.0);
    std::vector<Exponent> xex(Gx);
    for (Index r = 1; r <= Gx; ++r) xex[r - 1] = ixx.exponent_of(r);
    for (size_t j = 0; j < W.size(); ++j) {
        Eigen::MatrixXd P = Tt * gs.X[j] * Tt.transpose();
        P = 0.5 * (P + P.transpose()).eval();
        res.P.push_back(P);
        Polynomial sigma(n);
        for (Index r = 0; r < Gx; ++r)
            for (Index s = 0; s < Gx; ++s)
                if (P(r, s) != 0.0) sigma.add_term(add(xex[r], xex[s]), P(r, s));
        R -= rel.gen_polys[j] * sigma;
    }
    res.B = Eigen::MatrixXd::Zero(l, static_cast<Eigen::Index>(rel.b_cols));
    if (l > 0) {
        Polynomial rem(n);
        auto beta = divide_by_affine(R, sys.A, sys.b, rem);
        for (int i = 0; i < l; ++i) res.B.row(i) = beta[i].to_dense(rel.rho - 1).transpose();
    }
    finish(res, rel, opt);
    return res;
}

CertificateResult certify_infeasible(const PolySystem& sys, int max_level, const RelaxationOptions& opt) {
    if (max_level < 1) throw std::invalid_argument("max_level must be >= 1");
    CertificateResult last;
    GeneratorSet gens = GeneratorSet::truncated(static_cast<int>(sys.inequalities.size()), opt.k_max);
    for (int d = 1; d <= max_level; ++d) {
        try {
            last = certify_level(sys, d, gens, opt);
        } catch (const SizeError& e) {
            throw SizeError("level " + std::to_string(d) + ": " + e.what());
        }
        if (last.status == CertificateStatus::certified_infeasible) return last;
    }
    if (last.status != CertificateStatus::solver_failure) last.status = CertificateStatus::no_certificate_at_level;
    last.level = max_level;
    return last;
}

CertificateResult certify_infeasible(const ConstraintSystem& cs, const ParameterPoint& theta, int max_level,
                                     const RelaxationOptions& opt) {
    return certify_infeasible(polynomial_system(cs, theta, opt.include_sign), max_level, opt);
}

} // namespace css
