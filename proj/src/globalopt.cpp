#include "css/globalopt.hpp"

#include "css/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <random>
#include <thread>

namespace css {

namespace {

double env_double(const char* name, double fallback) {
    const char* s = std::getenv(name);
    if (!s || !*s) return fallback;
    char* end = nullptr;
    double v = std::strtod(s, &end);
    if (end == s || *end != '\0' || !(v > 0) || !std::isfinite(v))
        throw ValidationError(std::string(name) + " must be a positive number, got '" + s + "'");
    return v;
}

double lin_zero_tol(const Eigen::VectorXd& rhs) {
    return 1e-9 * (1.0 + (rhs.size() ? rhs.lpNorm<Eigen::Infinity>() : 0.0));
}

} // namespace

Tolerances Tolerances::from_env() {
    Tolerances t;
    t.feas_rel = env_double("CSS_EPS_FEAS", t.feas_rel);
    t.slack = env_double("CSS_EPS_SLACK", t.slack);
    t.gap = env_double("CSS_EPS_GAP", t.gap);
    return t;
}

const char* to_string(NlpStatus s) {
    switch (s) {
    case NlpStatus::feasible: return "feasible";
    case NlpStatus::infeasible: return "infeasible";
    default: return "undetermined";
    }
}

const char* to_string(PointStatus s) {
    switch (s) {
    case PointStatus::lin_infeasible: return "lin_infeasible";
    case PointStatus::infeasible: return "infeasible";
    case PointStatus::feasible: return "feasible";
    default: return "undetermined";
    }
}

LpResult phase1_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs) {
    const Eigen::Index l = A.rows(), n = A.cols();
    if (rhs.size() != l) throw std::invalid_argument("phase1_lp: right-hand side length mismatch");
    // rows negated where needed so every right-hand side is >= 0
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(l, n + 2 * l);
    Eigen::VectorXd b = rhs;
    for (Eigen::Index k = 0; k < l; ++k) {
        double sgn = rhs(k) < 0 ? -1.0 : 1.0;
        M.row(k).head(n) = sgn * A.row(k);
        b(k) = sgn * rhs(k);
        M(k, n + k) = 1.0;
        M(k, n + l + k) = -1.0;
    }
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 2 * l);
    c.tail(2 * l).setOnes();
    LpSolution s = solve_lp(LpProblem::standard(M, b, c));
    LpResult r;
    r.status = s.status;
    r.iterations = s.iterations;
    r.used_bland = s.used_bland;
    if (s.status == LpStatus::optimal) {
        r.objective = std::max(0.0, s.objective);
        r.x = s.x.head(n);
    } else {
        r.objective = kInf;
    }
    return r;
}

LpResult phase1_lp(const ConstraintSystem& cs, const ParameterPoint& theta) {
    return phase1_lp(cs.A, Eigen::VectorXd(cs.rhs(theta)));
}

std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> initial_box(const LogLinearSystem& sys, double y_floor) {
    const int n = sys.n();
    Eigen::VectorXd lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
        c(i) = 1.0;
        LpSolution mn = solve_lp(LpProblem::standard(sys.A, sys.b, c));
        if (mn.status == LpStatus::infeasible) return std::nullopt;
        LpSolution mx = solve_lp(LpProblem::standard(sys.A, sys.b, -c));
        if (mx.status == LpStatus::infeasible) return std::nullopt;
        double xmin = mn.status == LpStatus::optimal ? mn.objective : 0.0;
        double xmax = mx.status == LpStatus::optimal ? -mx.objective : 1.0;
        double l = xmin * (1 - 1e-9) - 1e-15;
        double h = xmax * (1 + 1e-9) + 1e-15;
        lo(i) = l > 0 ? std::max(std::log(l), y_floor) : y_floor;
        hi(i) = std::min(std::log(h), 0.0);
        if (hi(i) < y_floor) hi(i) = y_floor;
        if (lo(i) > hi(i)) lo(i) = hi(i);
    }
    return std::make_pair(lo, hi);
}

namespace {

Eigen::VectorXd column_weights(const LogLinearSystem& sys) {
    Eigen::VectorXd w(sys.n());
    for (int i = 0; i < sys.n(); ++i) w(i) = sys.A.col(i).norm();
    return w;
}

// Move p toward the interior point c until it lies in P.
Eigen::VectorXd pull_inside(const LogLinearSystem& sys, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            const Eigen::VectorXd& c, const Eigen::VectorXd& p) {
    Eigen::VectorXd d = p - c;
    double a = max_step_in_polyhedron(sys, lo, hi, c, d);
    return c + a * d;
}

bool slacks_ok(const LogLinearSystem& sys, const Eigen::VectorXd& y, double eps) {
    if (sys.m() && (sys.h - sys.St * y).minCoeff() < -eps) return false;
    return y.maxCoeff() <= eps;
}

} // namespace

NlpResult phase1_nlp(const LogLinearSystem& sys, const BnbOptions& opt) {
    const int n = sys.n(), l = sys.l();
    NlpResult res;
    res.eps_feas = opt.tol.eps_feas(sys.b);
    const double eps = res.eps_feas;
    const double sql = std::sqrt(static_cast<double>(std::max(l, 1)));

    LpResult lin = phase1_lp(sys.A, sys.b);
    const bool lin_empty = lin.status == LpStatus::optimal && lin.objective > lin_zero_tol(sys.b);
    if (lin_empty && lin.objective / sql > eps && opt.lin_shortcut) {
        res.status = NlpStatus::infeasible;
        res.short_circuit = true;
        res.lower_bound = lin.objective / sql;
        return res;
    }
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, opt.y_floor), hi = Eigen::VectorXd::Zero(n);
    if (!lin_empty)
        if (auto box = initial_box(sys, opt.y_floor)) {
            lo = box->first;
            hi = box->second;
        }
    auto center = polyhedron_center(sys, lo, hi);
    if (!center) {
        // no y satisfies the thermodynamic rows inside the box
        res.status = NlpStatus::infeasible;
        res.lower_bound = kInf;
        return res;
    }

    std::optional<Candidate> best;
    auto offer = [&](const DescentResult& d) {
        if (!best || d.residual < best->value) best = Candidate{d.residual, d.y};
    };
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int s = 0; s < std::max(1, opt.starts); ++s) {
        Eigen::VectorXd y0 = *center;
        if (s > 0) {
            Eigen::VectorXd p(n);
            for (int i = 0; i < n; ++i) p(i) = (*center)(i) + unif(rng) * 0.5 * (hi(i) - lo(i));
            y0 = pull_inside(sys, lo, hi, *center, p.cwiseMax(lo).cwiseMin(hi));
        }
        offer(residual_descent(sys, lo, hi, y0, 80, 1e-3 * eps));
        if (best->value <= 1e-3 * eps) break;
    }

    if (best->value > eps) {
        BnbCallbacks cb;
        const Eigen::VectorXd c0 = *center;
        cb.relax = [&](const Eigen::VectorXd& l0, const Eigen::VectorXd& h0, const Candidate* inc) {
            EnvelopeLp env = envelope_lp(sys, l0, h0, 2 * l, inc ? &inc->y : nullptr);
            for (int k = 0; k < l; ++k) {
                env.lp.A(k, env.first_extra + k) = 1.0;
                env.lp.A(k, env.first_extra + l + k) = -1.0;
            }
            env.lp.c.tail(2 * l).setOnes();
            LpSolution s = solve_lp(env.lp);
            Relaxation r;
            if (s.status == LpStatus::infeasible) {
                r.infeasible = true;
                return r;
            }
            if (s.status != LpStatus::optimal) {
                r.bound = -kInf;
                return r;
            }
            r.bound = std::max(0.0, s.objective) / sql;
            r.y = s.x.head(n).cwiseMax(l0).cwiseMin(h0);
            r.v = s.x.segment(n, n);
            return r;
        };
        cb.heuristic = [&](const BnbNode& node) -> std::optional<Candidate> {
            if (node.relax.y.size() != n) return std::nullopt;
            Eigen::VectorXd y0 = pull_inside(sys, lo, hi, c0, node.relax.y);
            DescentResult d = residual_descent(sys, lo, hi, y0, 12, 1e-3 * eps);
            return Candidate{d.residual, d.y};
        };
        BnbSettings st;
        st.max_nodes = opt.max_nodes;
        st.workers = opt.workers;
        st.abs_gap = 1e-3 * eps;
        st.rel_gap = opt.tol.gap;
        st.fathom_above = eps;
        st.stop_at_or_below = eps;
        st.weights = column_weights(sys);
        BnbOutcome o = branch_and_bound(lo, hi, cb, st, best);
        res.nodes = o.nodes;
        res.lower_history = std::move(o.lower_history);
        res.upper_history = std::move(o.upper_history);
        if (o.upper < best->value) best = Candidate{o.upper, o.y};
        res.lower_bound = std::min(std::max(0.0, o.lower), best->value);
    } else {
        res.lower_bound = 0.0;
    }
    res.objective = best->value;
    res.y = best->y;
    if (res.objective <= eps && slacks_ok(sys, res.y, opt.tol.slack)) res.status = NlpStatus::feasible;
    else if (res.lower_bound > eps) res.status = NlpStatus::infeasible;
    else res.status = NlpStatus::undetermined;
    return res;
}

NlpResult phase1_nlp(const ConstraintSystem& cs, const ParameterPoint& theta, const BnbOptions& opt) {
    return phase1_nlp(evaluate(cs, theta), opt);
}

// ---- sweeps ----

Grid Grid::line(double slope, double t1_lo, double t1_hi, int intervals) {
    if (intervals < 1) throw ValidationError("grid interval count must be >= 1");
    Grid g;
    g.is_line = true;
    g.slope = slope;
    g.t1_lo = t1_lo;
    g.t1_hi = t1_hi;
    g.intervals1 = intervals;
    return g;
}

Grid Grid::box(double t1_lo, double t1_hi, int intervals1, double t2_lo, double t2_hi, int intervals2) {
    if (intervals1 < 1 || intervals2 < 1) throw ValidationError("grid interval count must be >= 1");
    Grid g;
    g.is_line = false;
    g.t1_lo = t1_lo;
    g.t1_hi = t1_hi;
    g.t2_lo = t2_lo;
    g.t2_hi = t2_hi;
    g.intervals1 = intervals1;
    g.intervals2 = intervals2;
    return g;
}

std::vector<ParameterPoint> Grid::points() const {
    std::vector<ParameterPoint> pts;
    auto at = [](double a, double b, int k, int n) { return k == n ? b : a + (b - a) * k / n; };
    if (is_line) {
        for (int k = 0; k <= intervals1; ++k) {
            double t1 = at(t1_lo, t1_hi, k, intervals1);
            pts.push_back({t1, slope * t1});
        }
    } else {
        for (int j = 0; j <= intervals2; ++j)
            for (int i = 0; i <= intervals1; ++i)
                pts.push_back({at(t1_lo, t1_hi, i, intervals1), at(t2_lo, t2_hi, j, intervals2)});
    }
    return pts;
}

std::optional<std::pair<double, double>> theta_lin_line(const ConstraintSystem& cs, double slope) {
    const int n = cs.n();
    Eigen::MatrixXd M(4, n + 1);
    M.leftCols(n) = cs.A;
    M.col(n) = -(cs.F.col(0) + slope * cs.F.col(1));
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
    c(n) = 1.0;
    LpProblem lp = LpProblem::standard(M, Eigen::VectorXd(cs.w), c);
    LpSolution mn = solve_lp(lp);
    lp.c = -c;
    LpSolution mx = solve_lp(lp);
    if (mn.status != LpStatus::optimal || mx.status != LpStatus::optimal) return std::nullopt;
    return std::make_pair(mn.objective, -mx.objective);
}

bool FeasibilityMap::consistent() const {
    for (const auto& r : records)
        if (!r.lin_feasible && r.nlp && r.nlp->status == NlpStatus::feasible) return false;
    return true;
}

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

} // namespace

void FeasibilityMap::write_csv(std::ostream& out) const {
    out << "theta1,theta2,f_lin,f_star,lower_bound,status,certificate_level\n";
    for (const auto& r : records) {
        double fstar = r.nlp ? r.nlp->objective : std::nan("");
        double lb = r.nlp ? r.nlp->lower_bound : std::nan("");
        if (!r.nlp && !r.lin_feasible) lb = r.lin.objective / 2.0; // sqrt of the four rows
        out << fmt(r.theta.theta1) << ',' << fmt(r.theta.theta2) << ',' << fmt(r.lin.objective) << ',' << fmt(fstar)
            << ',' << fmt(lb) << ',' << to_string(r.status) << ','
            << (r.certificate_level ? std::to_string(*r.certificate_level) : std::string()) << '\n';
    }
}

FeasibilityMap feasibility_sweep(const ConstraintSystem& cs, const Grid& grid, const SweepOptions& opt) {
    FeasibilityMap map;
    map.grid = grid;
    auto pts = grid.points();
    if (pts.empty()) throw ValidationError("empty grid");
    map.records.resize(pts.size());

    auto run_point = [&](size_t k) {
        PointRecord& rec = map.records[k];
        rec.theta = pts[k];
        try {
            if (!(rec.theta.theta1 > 0)) throw ValidationError("theta1 must be positive");
            Eigen::VectorXd rhs = cs.rhs(rec.theta);
            rec.lin = phase1_lp(cs, rec.theta);
            if (rec.lin.status != LpStatus::optimal) throw NumericError(std::string("phase-I LP: ") + to_string(rec.lin.status));
            rec.lin_feasible = rec.lin.objective <= lin_zero_tol(rhs);
            if (rec.lin_feasible || opt.nlp_on_lin_infeasible) {
                BnbOptions b = opt.bnb;
                if (!rec.lin_feasible) b.lin_shortcut = false;
                rec.nlp = phase1_nlp(cs, rec.theta, b);
            }
            if (!rec.lin_feasible) rec.status = PointStatus::lin_infeasible;
            else if (rec.nlp->status == NlpStatus::feasible) rec.status = PointStatus::feasible;
            else if (rec.nlp->status == NlpStatus::infeasible) rec.status = PointStatus::infeasible;
            else rec.status = PointStatus::undetermined;
            if (opt.certify && (rec.status == PointStatus::infeasible || rec.status == PointStatus::lin_infeasible)) {
                CertificateResult c = certify_infeasible(cs, rec.theta, opt.certify_max_level, opt.relax);
                if (c.status == CertificateStatus::certified_infeasible) rec.certificate_level = c.level;
            }
        } catch (const std::exception& e) {
            rec.error = e.what();
            if (rec.status != PointStatus::lin_infeasible && rec.status != PointStatus::infeasible &&
                rec.status != PointStatus::feasible)
                rec.status = PointStatus::undetermined;
        }
    };

    const int w = std::max(1, opt.workers);
    if (w == 1) {
        for (size_t k = 0; k < pts.size(); ++k) run_point(k);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < w; ++t)
            pool.emplace_back([&] {
                for (size_t k; (k = next.fetch_add(1)) < pts.size();) run_point(k);
            });
        for (auto& t : pool) t.join();
    }
    return map;
}

// ---- global bounds ----

namespace {

// Interval propagation over A v = b (to within delta) and St y <= h.
bool propagate(const LogLinearSystem& sys, double delta, Eigen::VectorXd& lo, Eigen::VectorXd& hi) {
    const int n = sys.n();
    for (int round = 0; round < 4; ++round) {
        bool changed = false;
        for (int k = 0; k < sys.l(); ++k) {
            double smin = 0.0, smax = 0.0;
            Eigen::VectorXd tmin(n), tmax(n);
            for (int i = 0; i < n; ++i) {
                double a = sys.A(k, i), vl = std::exp(lo(i)), vh = std::exp(hi(i));
                tmin(i) = std::min(a * vl, a * vh);
                tmax(i) = std::max(a * vl, a * vh);
                smin += tmin(i);
                smax += tmax(i);
            }
            for (int i = 0; i < n; ++i) {
                double a = sys.A(k, i);
                if (a == 0.0) continue;
                double rl = sys.b(k) - delta - (smax - tmax(i));
                double rh = sys.b(k) + delta - (smin - tmin(i));
                double vl = a > 0 ? rl / a : rh / a;
                double vh = a > 0 ? rh / a : rl / a;
                vh += 1e-12 * std::abs(vh) + 1e-300;
                vl -= 1e-12 * std::abs(vl);
                if (vh <= 0) return false;
                double nh = std::log(vh);
                if (nh < hi(i) - 1e-9) {
                    hi(i) = nh;
                    changed = true;
                }
                if (vl > 0) {
                    double nl = std::log(vl);
                    if (nl > lo(i) + 1e-9) {
                        lo(i) = nl;
                        changed = true;
                    }
                }
                if (lo(i) > hi(i) + 1e-10) return false;
                if (lo(i) > hi(i)) lo(i) = hi(i);
            }
        }
        for (int j = 0; j < sys.m(); ++j) {
            double smin = 0.0;
            for (int i = 0; i < n; ++i) {
                double s = sys.St(j, i);
                smin += s > 0 ? s * lo(i) : s * hi(i);
            }
            for (int i = 0; i < n; ++i) {
                double s = sys.St(j, i);
                if (s == 0.0) continue;
                double rest = smin - (s > 0 ? s * lo(i) : s * hi(i));
                double lim = (sys.h(j) - rest) / s;
                lim += (s > 0 ? 1.0 : -1.0) * 1e-12 * (1.0 + std::abs(lim));
                if (s > 0 && lim < hi(i) - 1e-9) {
                    hi(i) = lim;
                    changed = true;
                } else if (s < 0 && lim > lo(i) + 1e-9) {
                    lo(i) = lim;
                    changed = true;
                }
                if (lo(i) > hi(i) + 1e-10) return false;
                if (lo(i) > hi(i)) lo(i) = hi(i);
            }
        }
        if (!changed) break;
    }
    return true;
}

BnbOutcome minimize_linear(const LogLinearSystem& sys, const Eigen::VectorXd& c, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, const Eigen::VectorXd& center, const Candidate& start,
                           const BnbOptions& opt) {
    const int n = sys.n(), l = sys.l();
    const double delta = 1e-10 * (1.0 + sys.b.lpNorm<Eigen::Infinity>());
    const double feas = 1e-12 * (1.0 + sys.b.norm());
    BnbCallbacks cb;
    cb.tighten = [&](Eigen::VectorXd& l0, Eigen::VectorXd& h0) { return propagate(sys, delta, l0, h0); };
    cb.relax = [&](const Eigen::VectorXd& l0, const Eigen::VectorXd& h0, const Candidate* inc) {
        EnvelopeLp env = envelope_lp(sys, l0, h0, 2 * l, inc ? &inc->y : nullptr);
        for (int k = 0; k < l; ++k) {
            env.lp.A(k, env.first_extra + k) = 1.0;
            env.lp.A(k, env.first_extra + l + k) = -1.0;
        }
        env.lp.hi.tail(2 * l).setConstant(delta);
        env.lp.c.head(n) = c;
        LpSolution s = solve_lp(env.lp);
        Relaxation r;
        if (s.status == LpStatus::infeasible) {
            r.infeasible = true;
            return r;
        }
        if (s.status != LpStatus::optimal) {
            r.bound = -kInf;
            return r;
        }
        r.bound = s.objective;
        r.y = s.x.head(n).cwiseMax(l0).cwiseMin(h0);
        r.v = s.x.segment(n, n);
        return r;
    };
    cb.heuristic = [&](const BnbNode& node) -> std::optional<Candidate> {
        if (node.relax.y.size() != n) return std::nullopt;
        Eigen::VectorXd y0 = pull_inside(sys, lo, hi, center, node.relax.y);
        DescentResult d = residual_descent(sys, lo, hi, y0, 30, feas);
        if (d.residual > feas) return std::nullopt;
        Eigen::VectorXd y1 = improve_linear(sys, lo, hi, c, d.y, feas);
        return Candidate{c.dot(y1), y1};
    };
    BnbSettings st;
    st.max_nodes = opt.max_nodes;
    st.workers = opt.workers;
    st.abs_gap = opt.tol.gap;
    st.rel_gap = opt.tol.gap;
    st.weights = column_weights(sys);
    st.log_weights = c;
    return branch_and_bound(lo, hi, cb, st, start);
}

} // namespace

BoundInterval global_bounds(const LogLinearSystem& sys, const Eigen::VectorXd& c, const BnbOptions& opt) {
    if (c.size() != sys.n()) throw std::invalid_argument("global_bounds: objective length mismatch");
    auto box = initial_box(sys, opt.y_floor);
    if (!box) throw InfeasibleError("linear constraints admit no point");
    Eigen::VectorXd lo = box->first, hi = box->second;
    const double delta = 1e-10 * (1.0 + sys.b.lpNorm<Eigen::Infinity>());
    if (!propagate(sys, delta, lo, hi)) throw InfeasibleError("constraint propagation found the feasible set empty");
    auto center = polyhedron_center(sys, lo, hi);
    if (!center) throw InfeasibleError("thermodynamic constraints admit no point inside the box");

    BnbOptions p1 = opt;
    p1.tol.feas_rel = 1e-12;
    NlpResult start = phase1_nlp(sys, p1);
    const double feas = 1e-12 * (1.0 + sys.b.norm());
    if (start.objective > feas) {
        DescentResult d = residual_descent(sys, lo, hi, pull_inside(sys, lo, hi, *center, start.y), 80, 0.0);
        if (d.residual > feas) throw InfeasibleError("no feasible point found; bounds need a point of the feasible set");
        start.y = d.y;
    }
    // the incumbent must also respect the propagated box for the search below
    Eigen::VectorXd y0 = start.y;
    BoundInterval out;
    BnbOutcome mn = minimize_linear(sys, c, lo.cwiseMin(y0), hi.cwiseMax(y0), *center, Candidate{c.dot(y0), y0}, opt);
    BnbOutcome mx = minimize_linear(sys, -c, lo.cwiseMin(y0), hi.cwiseMax(y0), *center, Candidate{-c.dot(y0), y0}, opt);
    out.lower = mn.lower;
    out.lower_attained = mn.upper;
    out.upper = -mx.lower;
    out.upper_attained = -mx.upper;
    out.open_gap = mn.exhausted || mx.exhausted;
    out.nodes = mn.nodes + mx.nodes;
    return out;
}

BoundInterval global_bounds(const ConstraintSystem& cs, const ParameterPoint& theta, const BoundTarget& target,
                            const BnbOptions& opt) {
    LogLinearSystem sys = evaluate(cs, theta);
    if (target.kind == BoundTarget::metabolite) {
        if (target.index < 0 || target.index >= cs.n()) throw std::out_of_range("metabolite index out of range");
        Eigen::VectorXd c = Eigen::VectorXd::Zero(cs.n());
        c(target.index) = 1.0;
        return global_bounds(sys, c, opt);
    }
    if (target.index < 0 || target.index >= cs.m()) throw std::out_of_range("reaction index out of range");
    Eigen::VectorXd c = sys.St.row(target.index).transpose();
    BoundInterval b = global_bounds(sys, c, opt);
    const double RT = cs.env.RT;
    const double off = reaction_energy(cs, theta, Eigen::VectorXd::Zero(cs.n()), target.index);
    auto map = [&](double v) { return std::isfinite(v) ? RT * v + off : v; };
    b.lower = map(b.lower);
    b.upper = map(b.upper);
    b.lower_attained = map(b.lower_attained);
    b.upper_attained = map(b.upper_attained);
    return b;
}

} // namespace css
