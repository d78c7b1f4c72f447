#include "css/manifold.hpp"

#include "css/bnb.hpp"
#include "css/errors.hpp"
#include "css/qp.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <thread>

namespace css {

namespace {

// Neumaier compensated sum
struct CompensatedSum {
    double sum = 0.0, comp = 0.0;
    void add(double v) {
        double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

LogLinearSystem reduced(const ManifoldContext& ctx) {
    return LogLinearSystem{ctx.Ar, ctx.br, ctx.sys.St, ctx.sys.h};
}

} // namespace

ManifoldContext::ManifoldContext(LogLinearSystem s) : sys(std::move(s)) {
    const int n = sys.n();
    if (sys.l() == 0) {
        Ar.resize(0, n);
        br.resize(0);
        N = Eigen::MatrixXd::Identity(n, n);
        return;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tol = std::max(sys.A.rows(), sys.A.cols()) * 1e-12 * (sv.size() ? sv(0) : 0.0);
    int rank = 0;
    while (rank < sv.size() && sv(rank) > tol) ++rank;
    // rows U_r' A = S_r V_r' keep the row space; U_r' b the matching right-hand side
    Ar = svd.matrixU().leftCols(rank).transpose() * sys.A;
    br = svd.matrixU().leftCols(rank).transpose() * sys.b;
    N = svd.matrixV().rightCols(n - rank);
}

Eigen::VectorXd ManifoldContext::slacks(const Eigen::VectorXd& y) const {
    Eigen::VectorXd s(sys.m() + sys.n());
    if (sys.m()) s.head(sys.m()) = sys.h - sys.St * y;
    s.tail(sys.n()) = -y;
    return s;
}

double ManifoldContext::residual(const Eigen::VectorXd& y) const {
    if (sys.l() == 0) return 0.0;
    return (sys.A * y.array().exp().matrix() - sys.b).lpNorm<Eigen::Infinity>();
}

SamplingSystem SamplingSystem::from(const ConstraintSystem& cs, const ParameterPoint& theta) {
    SamplingSystem ss{ManifoldContext(evaluate(cs, theta)), cs.total_concentration(theta), cs.env.RT,
                      Eigen::VectorXd(cs.m()), cs.metabolite_ids, cs.reaction_ids};
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(cs.n());
    for (int j = 0; j < cs.m(); ++j) ss.energy_offset(j) = reaction_energy(cs, theta, zero, j);
    return ss;
}

// ---------------------------------------------------------------- interior point

namespace {

Eigen::VectorXd row_norms(const LogLinearSystem& sys) {
    Eigen::VectorXd r(sys.m() + sys.n());
    for (int j = 0; j < sys.m(); ++j) r(j) = sys.St.row(j).norm();
    r.tail(sys.n()).setOnes();
    return r;
}

double radius_of(const ManifoldContext& ctx, const Eigen::VectorXd& norms, const Eigen::VectorXd& y) {
    Eigen::VectorXd s = ctx.slacks(y);
    double r = kInf;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (norms(k) > 0) r = std::min(r, s(k) / norms(k));
    return r;
}

// Feasible-path proximal SQP on r(y) - w ||y|| over the manifold.
Eigen::VectorXd interior_local(const ManifoldContext& ctx, const Eigen::VectorXd& norms, const Eigen::VectorXd& lo,
                               double w, const Eigen::VectorXd& y0) {
    const LogLinearSystem red = reduced(ctx);
    const int n = ctx.sys.n(), m = ctx.sys.m(), l = red.l();
    auto phi = [&](const Eigen::VectorXd& y) { return radius_of(ctx, norms, y) - w * y.norm(); };
    Eigen::VectorXd y = y0;
    double f = phi(y);
    double mu = 1.0;
    for (int it = 0; it < 300 && mu < 1e10; ++it) {
        const double r0 = radius_of(ctx, norms, y);
        const double ny = y.norm();
        Eigen::VectorXd x = y.array().exp().matrix();
        QpProblem qp(n + 1);
        qp.H.setZero();
        qp.H.diagonal().setConstant(mu);
        qp.g.setZero();
        qp.g(n) = -1.0;
        if (w > 0 && ny > 0) {
            Eigen::VectorXd gh = y / ny;
            qp.g.head(n) = w * gh;
            qp.H.topLeftCorner(n, n) += w / ny * (Eigen::MatrixXd::Identity(n, n) - gh * gh.transpose());
        }
        if (l) {
            qp.E.resize(l, n + 1);
            qp.E.leftCols(n) = red.A * x.asDiagonal();
            qp.E.col(n).setZero();
            qp.f = red.b - red.A * x;
        }
        qp.C = Eigen::MatrixXd::Zero(m + 2 * n, n + 1);
        qp.d.resize(m + 2 * n);
        for (int j = 0; j < m; ++j) {
            qp.C.row(j).head(n) = ctx.sys.St.row(j);
            qp.C(j, n) = norms(j);
            qp.d(j) = ctx.sys.h(j) - ctx.sys.St.row(j).dot(y) - r0 * norms(j);
        }
        for (int i = 0; i < n; ++i) {
            qp.C(m + i, i) = 1.0;
            qp.C(m + i, n) = 1.0;
            qp.d(m + i) = -y(i) - r0;
            qp.C(m + n + i, i) = -1.0;
            qp.d(m + n + i) = y(i) - lo(i);
        }
        qp.d = qp.d.cwiseMax(0.0);
        QpSolution s = solve_qp(qp);
        if (s.status != QpStatus::optimal || !s.x.allFinite()) {
            mu *= 4.0;
            continue;
        }
        Eigen::VectorXd dy = s.x.head(n);
        if (dy.lpNorm<Eigen::Infinity>() < 1e-12) break;
        auto yn = newton_restore(red, y + dy);
        if (!yn) {
            mu *= 4.0;
            continue;
        }
        double fn = phi(*yn);
        if (fn > f) {
            bool tiny = fn - f <= 1e-15 * (1.0 + std::abs(f));
            y = *yn;
            f = fn;
            mu = std::max(mu / 2.0, 1e-6);
            if (tiny) break;
        } else {
            mu *= 4.0;
        }
    }
    return y;
}

} // namespace

InteriorPoint interior_point(const LogLinearSystem& sys, double w_reg, const BnbOptions& opt) {
    if (w_reg < 0) throw std::invalid_argument("interior_point: negative regularization weight");
    ManifoldContext ctx(sys);
    const Eigen::VectorXd norms = row_norms(sys);
    auto box = initial_box(sys, opt.y_floor);
    if (!box) throw InfeasibleError("linear constraints admit no point");
    const Eigen::VectorXd &lo = box->first, &hi = box->second;

    std::vector<Eigen::VectorXd> starts;
    NlpResult p1 = phase1_nlp(sys, opt);
    if (p1.status == NlpStatus::infeasible) throw InfeasibleError("the feasible set is empty");
    const LogLinearSystem red = reduced(ctx);
    if (p1.y.size() == sys.n())
        if (auto y = newton_restore(red, p1.y)) starts.push_back(*y);
    if (auto c = polyhedron_center(sys, lo, hi)) {
        DescentResult d = residual_descent(sys, lo, hi, *c, 80, 1e-13 * (1.0 + sys.b.norm()));
        if (auto y = newton_restore(red, d.y)) starts.push_back(*y);
        std::mt19937_64 rng(opt.seed);
        for (int k = 0; k < opt.starts; ++k) {
            Eigen::VectorXd p(sys.n());
            for (int i = 0; i < sys.n(); ++i) {
                double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                p(i) = lo(i) + u * (hi(i) - lo(i));
            }
            Eigen::VectorXd dir = p - *c;
            Eigen::VectorXd q = *c + max_step_in_polyhedron(sys, lo, hi, *c, dir) * dir;
            DescentResult dq = residual_descent(sys, lo, hi, q, 80, 1e-13 * (1.0 + sys.b.norm()));
            if (auto y = newton_restore(red, dq.y)) starts.push_back(*y);
        }
    }
    if (starts.empty()) throw InfeasibleError("no point of the manifold found");

    InteriorPoint best;
    best.objective = -kInf;
    for (const auto& s : starts) {
        Eigen::VectorXd y = interior_local(ctx, norms, lo, w_reg, s);
        double r = radius_of(ctx, norms, y);
        double obj = r - w_reg * y.norm();
        if (ctx.residual(y) <= 1e-10 * (1.0 + sys.b.lpNorm<Eigen::Infinity>()) && obj > best.objective) {
            best.y = y;
            best.radius = r;
            best.objective = obj;
        }
    }
    if (best.y.size() == 0 || !(best.radius > 0))
        throw InfeasibleError("no point strictly inside the thermodynamic constraints");
    return best;
}

InteriorPoint interior_point(const ConstraintSystem& cs, const ParameterPoint& theta, double w_reg,
                             const BnbOptions& opt) {
    return interior_point(evaluate(cs, theta), w_reg, opt);
}

// ---------------------------------------------------------------- directions

std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

Eigen::VectorXd draw_coordinates(int dim, std::mt19937_64& rng) {
    Eigen::VectorXd u(dim);
    for (int k = 0; k < dim; ++k) u(k) = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
    return u;
}

Eigen::VectorXd tangent_direction(const ManifoldContext& ctx, const Eigen::VectorXd& y, const Eigen::VectorXd& u) {
    return (ctx.N * u).cwiseQuotient(y.array().exp().matrix());
}

Eigen::VectorXd tangent_sample(const ManifoldContext& ctx, const Eigen::VectorXd& y, std::mt19937_64& rng) {
    return tangent_direction(ctx, y, draw_coordinates(ctx.dim(), rng));
}

const char* to_string(Termination t) {
    switch (t) {
    case Termination::constraint_hit: return "constraint_hit";
    case Termination::reached_t_max: return "reached_t_max";
    case Termination::projection_diverged: return "projection_diverged";
    }
    return "?";
}

// ---------------------------------------------------------------- projection

namespace {

struct KktPoint {
    Eigen::VectorXd y, lambda;
};

std::optional<KktPoint> kkt_newton(const ManifoldContext& ctx, const Eigen::VectorXd& target, Eigen::VectorXd y,
                                   Eigen::VectorXd lambda, int max_iter) {
    const int n = ctx.sys.n(), l = static_cast<int>(ctx.Ar.rows());
    const double tol1 = 1e-13 * (1.0 + target.lpNorm<Eigen::Infinity>());
    const double tol2 = 1e-14 * (1.0 + ctx.br.lpNorm<Eigen::Infinity>());
    Eigen::MatrixXd J(n + l, n + l);
    Eigen::VectorXd G(n + l);
    for (int it = 0; it <= max_iter; ++it) {
        Eigen::VectorXd x = y.array().exp().matrix();
        Eigen::VectorXd atl = ctx.Ar.transpose() * lambda;
        G.head(n) = y + x.cwiseProduct(atl) - target;
        G.tail(l) = ctx.Ar * x - ctx.br;
        if (!G.allFinite()) return std::nullopt;
        if (G.head(n).lpNorm<Eigen::Infinity>() <= tol1 && (l == 0 || G.tail(l).lpNorm<Eigen::Infinity>() <= tol2))
            return KktPoint{y, lambda};
        if (it == max_iter) break;
        J.setZero();
        J.topLeftCorner(n, n).diagonal() = Eigen::VectorXd::Ones(n) + x.cwiseProduct(atl);
        J.topRightCorner(n, l) = x.asDiagonal() * ctx.Ar.transpose();
        J.bottomLeftCorner(l, n) = ctx.Ar * x.asDiagonal();
        Eigen::VectorXd step = J.partialPivLu().solve(G);
        if (!step.allFinite()) return std::nullopt;
        double big = step.head(n).lpNorm<Eigen::Infinity>();
        double a = big > 1.0 ? 1.0 / big : 1.0;
        y -= a * step.head(n);
        lambda -= a * step.tail(l);
    }
    return std::nullopt;
}

// Augmented state: [core | L | int x | int x^2 | int g | int g^2]
struct Flow {
    int core = 0;
    // core derivative; writes y and dy/dt
    std::function<bool(const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> dz, Eigen::VectorXd& y,
                       Eigen::VectorXd& ydot)>
        rhs;
    // exact manifold point at time t from an approximate state (updated in place)
    std::function<bool(double t, Eigen::VectorXd& z, Eigen::VectorXd& y)> exact;
    // whether the accepted state needs exact() applied
    std::function<bool(const Eigen::VectorXd& y)> drifted;
    // checked after each accepted step
    std::function<void(const Eigen::VectorXd& z)> check;
};

Trajectory run_flow(const ManifoldContext& ctx, const Flow& flow, const Eigen::VectorXd& core0,
                    const Eigen::VectorXd& y_start, const TrajectoryOptions& opt) {
    const int n = ctx.sys.n(), m = ctx.sys.m(), q = flow.core;
    const Eigen::VectorXd x_ref = y_start.array().exp().matrix();
    const Eigen::VectorXd g_ref = m ? Eigen::VectorXd(ctx.sys.St * y_start) : Eigen::VectorXd();
    const int total = q + 1 + 2 * n + 2 * m;

    OdeRhs f = [&](double, const Eigen::VectorXd& z, Eigen::VectorXd& dz) {
        dz.resize(total);
        Eigen::VectorXd y, ydot;
        if (!flow.rhs(z, dz.head(q), y, ydot)) {
            dz.setConstant(std::numeric_limits<double>::quiet_NaN());
            return;
        }
        Eigen::VectorXd x = y.array().exp().matrix();
        const double speed = x.cwiseProduct(ydot).norm();
        Eigen::VectorXd dx = x - x_ref;
        dz(q) = speed;
        dz.segment(q + 1, n) = speed * dx;
        dz.segment(q + 1 + n, n) = speed * dx.cwiseAbs2();
        if (m) {
            Eigen::VectorXd dg = ctx.sys.St * y - g_ref;
            dz.segment(q + 1 + 2 * n, m) = speed * dg;
            dz.segment(q + 1 + 2 * n + m, m) = speed * dg.cwiseAbs2();
        }
    };

    Trajectory tr;
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(total);
    z0.head(q) = core0;
    Dopri5 ode(f, opt.ode);
    ode.reset(0.0, z0);

    auto g_of = [&](const Eigen::VectorXd& y) { return m ? Eigen::VectorXd(ctx.sys.St * y) : Eigen::VectorXd(); };
    tr.y_min = tr.y_max = y_start;
    tr.g_min = tr.g_max = g_of(y_start);
    double last_len = 0.0;
    auto record = [&](double t, const Eigen::VectorXd& z, const Eigen::VectorXd& y, double len) {
        tr.y_min = tr.y_min.cwiseMin(y);
        tr.y_max = tr.y_max.cwiseMax(y);
        if (m) {
            Eigen::VectorXd g = g_of(y);
            tr.g_min = tr.g_min.cwiseMin(g);
            tr.g_max = tr.g_max.cwiseMax(g);
        }
        tr.max_residual = std::max(tr.max_residual, ctx.residual(y));
        if (opt.keep_samples) {
            tr.t.push_back(t);
            tr.y.push_back(y);
            tr.dl.push_back(len - last_len);
            Eigen::VectorXd tmp(q), yy, ydot;
            if (!flow.rhs(z, tmp, yy, ydot)) ydot = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
            tr.ydot.push_back(ydot);
        }
        last_len = len;
    };
    record(0.0, z0, y_start, 0.0);

    Eigen::VectorXd z_end = z0;
    tr.termination = Termination::reached_t_max;
    while (ode.t() < opt.t_max) {
        if (!ode.step(opt.t_max)) {
            tr.termination = Termination::projection_diverged;
            z_end = ode.y();
            break;
        }
        Eigen::VectorXd z = ode.y();
        Eigen::VectorXd y;
        {
            Eigen::VectorXd tmp(q), ydot;
            if (!flow.rhs(z, tmp, y, ydot)) {
                tr.termination = Termination::projection_diverged;
                z_end = z;
                break;
            }
        }
        if (flow.drifted(y)) {
            if (!flow.exact(ode.t(), z, y)) {
                tr.termination = Termination::projection_diverged;
                z_end = z;
                break;
            }
            ode.replace_state(z);
        }
        if (flow.check) flow.check(z);
        Eigen::VectorXd s = ctx.slacks(y);
        Eigen::Index arg = 0;
        double smin = s.size() ? s.minCoeff(&arg) : kInf;
        if (smin < -opt.event_tol) {
            // bisection on exact points of the last step
            double a = ode.t_prev(), b = ode.t();
            Eigen::VectorXd zb = z, yb = y;
            Eigen::Index ib = arg;
            bool ok = true;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (a + b);
                Eigen::VectorXd zm = ode.dense(mid), ym;
                {
                    Eigen::VectorXd tmp(q), ydot;
                    if (!flow.rhs(zm, tmp, ym, ydot)) {
                        ok = false;
                        break;
                    }
                }
                if (!flow.exact(mid, zm, ym)) {
                    ok = false;
                    break;
                }
                Eigen::VectorXd sm = ctx.slacks(ym);
                Eigen::Index im = 0;
                double v = sm.minCoeff(&im);
                if (std::abs(v) <= opt.event_tol) {
                    zb = zm, yb = ym, ib = im, b = mid;
                    break;
                }
                if (v > 0) {
                    a = mid;
                } else {
                    b = mid;
                    zb = zm, yb = ym, ib = im;
                }
                if (b - a <= 1e-15 * std::max(1.0, b)) break;
            }
            if (!ok) {
                tr.termination = Termination::projection_diverged;
                z_end = z;
                break;
            }
            record(b, zb, yb, zb(q));
            tr.termination = Termination::constraint_hit;
            tr.constraint = static_cast<int>(ib);
            z_end = zb;
            break;
        }
        record(ode.t(), z, y, z(q));
        z_end = z;
        if (smin <= opt.event_tol) {
            tr.termination = Termination::constraint_hit;
            tr.constraint = static_cast<int>(arg);
            break;
        }
    }
    tr.thermodynamic = tr.termination == Termination::constraint_hit && tr.constraint >= 0 && tr.constraint < m;
    tr.length = z_end(q);
    tr.int_x = z_end.segment(q + 1, n);
    tr.int_x2 = z_end.segment(q + 1 + n, n);
    tr.int_g = z_end.segment(q + 1 + 2 * n, m);
    tr.int_g2 = z_end.segment(q + 1 + 2 * n + m, m);
    return tr;
}

} // namespace

std::optional<Eigen::VectorXd> kkt_project(const ManifoldContext& ctx, const Eigen::VectorXd& target,
                                           const Eigen::VectorXd& y_guess, int max_iter) {
    auto p = kkt_newton(ctx, target, y_guess, Eigen::VectorXd::Zero(ctx.Ar.rows()), max_iter);
    if (!p) return std::nullopt;
    return p->y;
}

Trajectory projection_trajectory(const ManifoldContext& ctx, const Eigen::VectorXd& y_start, const Eigen::VectorXd& ubar,
                                 const TrajectoryOptions& opt) {
    const int n = ctx.sys.n(), l = static_cast<int>(ctx.Ar.rows());
    const double drift_scale = 1.0 + ctx.sys.b.lpNorm<Eigen::Infinity>();
    Flow flow;
    flow.core = n + l;
    flow.rhs = [&](const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> dz, Eigen::VectorXd& y,
                   Eigen::VectorXd& ydot) {
        y = z.head(n);
        Eigen::VectorXd lambda = z.segment(n, l);
        Eigen::VectorXd x = y.array().exp().matrix();
        Eigen::VectorXd M = Eigen::VectorXd::Ones(n) + x.cwiseProduct(ctx.Ar.transpose() * lambda);
        if (!M.allFinite() || M.cwiseAbs().minCoeff() < 1e-12) return false;
        Eigen::MatrixXd B = ctx.Ar * x.asDiagonal();
        Eigen::VectorXd Minv = M.cwiseInverse();
        Eigen::VectorXd lamdot = Eigen::VectorXd::Zero(l);
        if (l) {
            Eigen::MatrixXd K = B * Minv.asDiagonal() * B.transpose();
            lamdot = K.ldlt().solve(B * Minv.cwiseProduct(ubar));
        }
        ydot = Minv.cwiseProduct(ubar - B.transpose() * lamdot);
        dz.head(n) = ydot;
        dz.tail(l) = lamdot;
        return ydot.allFinite() && lamdot.allFinite();
    };
    flow.exact = [&](double t, Eigen::VectorXd& z, Eigen::VectorXd& y) {
        auto p = kkt_newton(ctx, y_start + t * ubar, z.head(n), z.segment(n, l), 50);
        if (!p) return false;
        z.head(n) = p->y;
        z.segment(n, l) = p->lambda;
        y = p->y;
        return true;
    };
    flow.drifted = [&](const Eigen::VectorXd& y) { return ctx.residual(y) > opt.drift_tol * drift_scale; };
    Eigen::VectorXd core0 = Eigen::VectorXd::Zero(n + l);
    core0.head(n) = y_start;
    return run_flow(ctx, flow, core0, y_start, opt);
}

// ---------------------------------------------------------------- geodesic

Eigen::VectorXd geodesic_acceleration(const ManifoldContext& ctx, const Eigen::VectorXd& x0, const Eigen::VectorXd& chi,
                                      const Eigen::VectorXd& chidot) {
    Eigen::VectorXd x = x0 + ctx.N * chi;
    Eigen::VectorXd a = ctx.N * chidot;
    Eigen::VectorXd w = x.array().square().inverse().matrix();
    Eigen::MatrixXd g = ctx.N.transpose() * w.asDiagonal() * ctx.N;
    Eigen::VectorXd rhs = ctx.N.transpose() * (a.array().square() / x.array().cube()).matrix();
    return g.ldlt().solve(rhs);
}

Eigen::VectorXd geodesic_acceleration_fd(const ManifoldContext& ctx, const Eigen::VectorXd& x0,
                                         const Eigen::VectorXd& chi, const Eigen::VectorXd& chidot, double step) {
    const int k = ctx.dim();
    auto metric = [&](const Eigen::VectorXd& c) {
        Eigen::VectorXd x = x0 + ctx.N * c;
        return Eigen::MatrixXd(ctx.N.transpose() * x.array().square().inverse().matrix().asDiagonal() * ctx.N);
    };
    std::vector<Eigen::MatrixXd> dg(k);
    for (int i = 0; i < k; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(k);
        e(i) = step;
        dg[i] = (metric(chi + e) - metric(chi - e)) / (2.0 * step);
    }
    // Gamma_{l,ij} v^i v^j = sum_i v_i (dg_i v)_l - 1/2 v' dg_l v
    Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < k; ++i) c += chidot(i) * (dg[i] * chidot);
    for (int l = 0; l < k; ++l) c(l) -= 0.5 * chidot.dot(dg[l] * chidot);
    return -metric(chi).ldlt().solve(c);
}

Trajectory geodesic_trajectory(const ManifoldContext& ctx, const Eigen::VectorXd& y_start, const Eigen::VectorXd& u,
                               const TrajectoryOptions& opt) {
    const int k = ctx.dim();
    const Eigen::VectorXd x0 = y_start.array().exp().matrix();
    Flow flow;
    flow.core = 2 * k;
    flow.rhs = [&](const Eigen::VectorXd& z, Eigen::Ref<Eigen::VectorXd> dz, Eigen::VectorXd& y,
                   Eigen::VectorXd& ydot) {
        Eigen::VectorXd chi = z.head(k), chidot = z.segment(k, k);
        Eigen::VectorXd x = x0 + ctx.N * chi;
        if (!(x.minCoeff() > 0)) return false;
        y = x.array().log().matrix();
        ydot = (ctx.N * chidot).cwiseQuotient(x);
        dz.head(k) = chidot;
        dz.tail(k) = geodesic_acceleration(ctx, x0, chi, chidot);
        return dz.allFinite();
    };
    // the chart is exact: y = ln(x0 + N chi) satisfies A exp y = b identically
    flow.exact = [](double, Eigen::VectorXd&, Eigen::VectorXd&) { return true; };
    flow.drifted = [](const Eigen::VectorXd&) { return false; };
    flow.check = [&](const Eigen::VectorXd& z) {
        Eigen::VectorXd x = x0 + ctx.N * z.head(k);
        Eigen::MatrixXd g = ctx.N.transpose() * x.array().square().inverse().matrix().asDiagonal() * ctx.N;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        if (!(ev(0) > 0) || ev(k - 1) / ev(0) > opt.max_cond)
            throw DegenerateError("geodesic metric is ill-conditioned (cond > " + std::to_string(opt.max_cond) + ")");
    };
    Eigen::VectorXd core0 = Eigen::VectorXd::Zero(2 * k);
    core0.tail(k) = u;
    return run_flow(ctx, flow, core0, y_start, opt);
}

// ---------------------------------------------------------------- statistics

const char* to_string(SampleMethod m) { return m == SampleMethod::projection ? "projection" : "geodesic"; }

SampleMethod parse_sample_method(const std::string& s) {
    if (s == "projection") return SampleMethod::projection;
    if (s == "geodesic") return SampleMethod::geodesic;
    throw std::invalid_argument("unknown sampling method '" + s + "' (projection|geodesic)");
}

CssStatistics sample_statistics(const SamplingSystem& ss, const SampleOptions& opt) {
    const ManifoldContext& ctx = ss.ctx;
    const int n = ctx.sys.n(), m = ctx.sys.m();
    if (opt.n_traj <= 0) throw std::invalid_argument("number of trajectories must be positive");
    CssStatistics st;
    st.metabolite_ids = ss.metabolite_ids;
    st.reaction_ids = ss.reaction_ids;

    Eigen::VectorXd y0;
    if (ctx.dim() == 0) {
        // the manifold is a single point: all mass sits there
        if (opt.start) {
            y0 = *opt.start;
        } else {
            NlpResult p = phase1_nlp(ctx.sys);
            if (p.status != NlpStatus::feasible) throw InfeasibleError("the feasible set is empty");
            y0 = p.y;
        }
        st.point_mass = true;
    } else {
        y0 = opt.start ? *opt.start : interior_point(ctx.sys, opt.w_reg).y;
    }
    if (y0.size() != n) throw std::invalid_argument("start point has the wrong length");
    st.start = y0;
    const Eigen::VectorXd x0 = y0.array().exp().matrix();
    const Eigen::VectorXd g0 = m ? Eigen::VectorXd(ctx.sys.St * y0) : Eigen::VectorXd();
    const double ctc = ss.total_concentration;

    auto finish_point_mass = [&] {
        st.mean_conc = st.min_conc = st.max_conc = ctc * x0;
        st.std_conc = Eigen::VectorXd::Zero(n);
        st.mean_drg = st.min_drg = st.max_drg = ss.RT * g0 + ss.energy_offset;
        st.std_drg = Eigen::VectorXd::Zero(m);
        st.max_residual = ctx.residual(y0);
    };
    if (st.point_mass) {
        st.trajectories = opt.n_traj;
        finish_point_mass();
        return st;
    }

    std::vector<Trajectory> paths(opt.n_traj);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex fail_mu;
    TrajectoryOptions topt = opt.trajectory;
    topt.keep_samples = opt.keep_trajectories;
    auto work = [&] {
        for (int i = next++; i < opt.n_traj; i = next++) {
            try {
                auto rng = trajectory_rng(opt.seed, static_cast<std::uint64_t>(i));
                Eigen::VectorXd u = draw_coordinates(ctx.dim(), rng);
                paths[i] = opt.method == SampleMethod::projection
                               ? projection_trajectory(ctx, y0, tangent_direction(ctx, y0, u), topt)
                               : geodesic_trajectory(ctx, y0, u, topt);
            } catch (...) {
                std::lock_guard<std::mutex> lock(fail_mu);
                if (!failure) failure = std::current_exception();
                next = opt.n_traj;
            }
        }
    };
    const int workers = std::max(1, std::min(opt.workers, opt.n_traj));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    CompensatedSum len;
    std::vector<CompensatedSum> sx(n), sx2(n), sg(m), sg2(m);
    Eigen::VectorXd ymin = y0, ymax = y0, gmin = g0, gmax = g0;
    for (const auto& p : paths) {
        len.add(p.length);
        for (int i = 0; i < n; ++i) {
            sx[i].add(p.int_x(i));
            sx2[i].add(p.int_x2(i));
        }
        for (int j = 0; j < m; ++j) {
            sg[j].add(p.int_g(j));
            sg2[j].add(p.int_g2(j));
        }
        ymin = ymin.cwiseMin(p.y_min);
        ymax = ymax.cwiseMax(p.y_max);
        if (m) {
            gmin = gmin.cwiseMin(p.g_min);
            gmax = gmax.cwiseMax(p.g_max);
        }
        st.max_residual = std::max(st.max_residual, p.max_residual);
        switch (p.termination) {
        case Termination::constraint_hit:
            ++st.constraint_hits;
            if (p.thermodynamic) ++st.thermodynamic_hits;
            break;
        case Termination::reached_t_max: ++st.reached_t_max; break;
        case Termination::projection_diverged: ++st.diverged; break;
        }
    }
    st.trajectories = opt.n_traj;
    st.total_length = len.value();
    if (!(st.total_length >= 1e-12)) throw DegenerateError("sampled trajectories have zero total length");
    const double L = st.total_length;
    st.mean_conc.resize(n);
    st.std_conc.resize(n);
    for (int i = 0; i < n; ++i) {
        double d = sx[i].value() / L;
        double var = std::max(0.0, sx2[i].value() / L - d * d);
        st.mean_conc(i) = ctc * (x0(i) + d);
        st.std_conc(i) = ctc * std::sqrt(var);
    }
    st.min_conc = ctc * ymin.array().exp().matrix();
    st.max_conc = ctc * ymax.array().exp().matrix();
    st.mean_drg.resize(m);
    st.std_drg.resize(m);
    for (int j = 0; j < m; ++j) {
        double d = sg[j].value() / L;
        double var = std::max(0.0, sg2[j].value() / L - d * d);
        st.mean_drg(j) = ss.RT * (g0(j) + d) + ss.energy_offset(j);
        st.std_drg(j) = ss.RT * std::sqrt(var);
    }
    st.min_drg = ss.RT * gmin + ss.energy_offset;
    st.max_drg = ss.RT * gmax + ss.energy_offset;
    if (opt.keep_trajectories) st.paths = std::move(paths);
    return st;
}

CssStatistics sample_statistics(const ConstraintSystem& cs, const ParameterPoint& theta, const SampleOptions& opt) {
    return sample_statistics(SamplingSystem::from(cs, theta), opt);
}

void CssStatistics::write_json(std::ostream& out) const {
    nlohmann::ordered_json j;
    j["trajectories"] = trajectories;
    j["total_length"] = total_length;
    j["point_mass"] = point_mass;
    j["terminations"] = {{"constraint_hit", constraint_hits},
                         {"thermodynamic", thermodynamic_hits},
                         {"reached_t_max", reached_t_max},
                         {"projection_diverged", diverged}};
    j["max_residual"] = max_residual;
    j["start"] = std::vector<double>(start.data(), start.data() + start.size());
    auto& mets = j["metabolites"] = nlohmann::ordered_json::array();
    for (size_t i = 0; i < metabolite_ids.size(); ++i)
        mets.push_back({{"id", metabolite_ids[i]},
                        {"mean_conc", mean_conc(i)},
                        {"std_conc", std_conc(i)},
                        {"min_conc", min_conc(i)},
                        {"max_conc", max_conc(i)}});
    auto& rxns = j["reactions"] = nlohmann::ordered_json::array();
    for (size_t k = 0; k < reaction_ids.size(); ++k)
        rxns.push_back({{"id", reaction_ids[k]}, {"mean_drG", mean_drg(k)}, {"std_drG", std_drg(k)}});
    out << j.dump(2) << '\n';
}

void write_trajectories_csv(const std::vector<Trajectory>& paths, std::ostream& out) {
    if (paths.empty()) return;
    const size_t n = paths.front().y.empty() ? 0 : static_cast<size_t>(paths.front().y.front().size());
    out << "traj_id,t";
    for (size_t i = 1; i <= n; ++i) out << ",y_" << i;
    out << ",dl\n";
    char buf[64];
    for (size_t p = 0; p < paths.size(); ++p) {
        const auto& tr = paths[p];
        for (size_t s = 0; s < tr.t.size(); ++s) {
            out << p;
            std::snprintf(buf, sizeof buf, ",%.17g", tr.t[s]);
            out << buf;
            for (Eigen::Index i = 0; i < tr.y[s].size(); ++i) {
                std::snprintf(buf, sizeof buf, ",%.17g", tr.y[s](i));
                out << buf;
            }
            std::snprintf(buf, sizeof buf, ",%.17g\n", tr.dl[s]);
            out << buf;
        }
    }
}

} // namespace css
