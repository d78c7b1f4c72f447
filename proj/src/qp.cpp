#include "css/qp.hpp"

#include <cmath>

namespace css {

QpProblem::QpProblem(int n)
    : H(Eigen::MatrixXd::Zero(n, n)), g(Eigen::VectorXd::Zero(n)), C(0, n), d(0), E(0, n), f(0) {}

void QpProblem::add_le(const Eigen::RowVectorXd& a, double rhs) {
    C.conservativeResize(C.rows() + 1, n());
    C.row(C.rows() - 1) = a;
    d.conservativeResize(d.size() + 1);
    d(d.size() - 1) = rhs;
}

void QpProblem::add_eq(const Eigen::RowVectorXd& a, double rhs) {
    E.conservativeResize(E.rows() + 1, n());
    E.row(E.rows() - 1) = a;
    f.conservativeResize(f.size() + 1);
    f(f.size() - 1) = rhs;
}

namespace {

double step_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0) a = std::min(a, -v(i) / dv(i));
    return a;
}

} // namespace

QpSolution solve_qp(const QpProblem& qp, const QpOptions& opt) {
    const int n = qp.n();
    const int mi = static_cast<int>(qp.C.rows());
    const int me = static_cast<int>(qp.E.rows());
    QpSolution sol;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd s = (qp.d - qp.C * x).cwiseMax(1.0);
    Eigen::VectorXd z = Eigen::VectorXd::Ones(mi);
    Eigen::VectorXd lam = Eigen::VectorXd::Zero(me);

    const double scale_d = 1.0 + (mi ? qp.d.lpNorm<Eigen::Infinity>() : 0.0) + (me ? qp.f.lpNorm<Eigen::Infinity>() : 0.0);
    const double scale_g = 1.0 + (n ? qp.g.lpNorm<Eigen::Infinity>() : 0.0);
    double hdiag = n ? qp.H.diagonal().cwiseAbs().maxCoeff() : 0.0;
    const double reg = 1e-13 * (1.0 + hdiag);

    Eigen::MatrixXd K(n + me, n + me);
    Eigen::VectorXd rhs(n + me);

    for (int it = 0; it < opt.max_iter; ++it) {
        sol.iterations = it;
        Eigen::VectorXd rd = qp.H * x + qp.g;
        if (mi) rd += qp.C.transpose() * z;
        if (me) rd += qp.E.transpose() * lam;
        Eigen::VectorXd re = me ? Eigen::VectorXd(qp.E * x - qp.f) : Eigen::VectorXd();
        Eigen::VectorXd rp = mi ? Eigen::VectorXd(qp.C * x + s - qp.d) : Eigen::VectorXd();
        double mu = mi ? s.dot(z) / mi : 0.0;
        double obj = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);

        double ed = rd.size() ? rd.lpNorm<Eigen::Infinity>() : 0.0;
        double ep = std::max(me ? re.lpNorm<Eigen::Infinity>() : 0.0, mi ? rp.lpNorm<Eigen::Infinity>() : 0.0);
        if (ed <= opt.tol * scale_g && ep <= opt.tol * scale_d && mu <= opt.tol * (1.0 + std::abs(obj))) {
            sol.status = QpStatus::optimal;
            break;
        }

        Eigen::VectorXd w = mi ? Eigen::VectorXd(z.cwiseQuotient(s)) : Eigen::VectorXd();
        K.setZero();
        K.topLeftCorner(n, n) = qp.H;
        if (mi) K.topLeftCorner(n, n) += qp.C.transpose() * w.asDiagonal() * qp.C;
        K.topLeftCorner(n, n).diagonal().array() += reg;
        if (me) {
            K.topRightCorner(n, me) = qp.E.transpose();
            K.bottomLeftCorner(me, n) = qp.E;
            K.bottomRightCorner(me, me).diagonal().setConstant(-1e-13);
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);

        auto solve = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& ds, Eigen::VectorXd& dz,
                         Eigen::VectorXd& dl) {
            rhs.head(n) = -rd;
            if (mi) rhs.head(n) -= qp.C.transpose() * ((-rc + z.cwiseProduct(rp)).cwiseQuotient(s));
            if (me) rhs.tail(me) = -re;
            Eigen::VectorXd sol_k = lu.solve(rhs);
            dx = sol_k.head(n);
            dl = sol_k.tail(me);
            if (mi) {
                ds = -rp - qp.C * dx;
                dz = (-rc - z.cwiseProduct(ds)).cwiseQuotient(s);
            }
        };

        Eigen::VectorXd dx, ds, dz, dl;
        if (!mi) {
            solve(Eigen::VectorXd(), dx, ds, dz, dl);
            x += dx;
            lam += dl;
            continue;
        }
        Eigen::VectorXd rc = s.cwiseProduct(z);
        solve(rc, dx, ds, dz, dl);
        double ap = step_to_boundary(s, ds), ad = step_to_boundary(z, dz);
        double a_aff = std::min(ap, ad);
        double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / mi;
        double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3);
        sigma = std::min(1.0, std::max(0.0, sigma));
        Eigen::VectorXd rc2 = rc + ds.cwiseProduct(dz) - Eigen::VectorXd::Constant(mi, sigma * mu);
        solve(rc2, dx, ds, dz, dl);
        double a = std::min(1.0, 0.995 * std::min(step_to_boundary(s, ds), step_to_boundary(z, dz)));
        if (!std::isfinite(a) || !dx.allFinite()) {
            sol.status = QpStatus::numeric;
            break;
        }
        x += a * dx;
        s += a * ds;
        z += a * dz;
        lam += a * dl;
        s = s.cwiseMax(1e-300);
        z = z.cwiseMax(1e-300);
        if (it + 1 == opt.max_iter) sol.status = QpStatus::max_iter;
    }
    sol.x = x;
    sol.z = z;
    sol.lambda = lam;
    sol.objective = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
    sol.lower_bound = sol.objective - (mi ? s.dot(z) : 0.0);
    return sol;
}

} // namespace css
