#include "css/bnb.hpp"

#include "css/qp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <queue>
#include <thread>

namespace css {

double exp_secant(double lo, double hi, double y) {
    if (hi - lo <= 0.0) return std::exp(lo);
    double slope = std::exp(lo) * std::expm1(hi - lo) / (hi - lo);
    return std::exp(lo) + slope * (y - lo);
}

double exp_tangent(double t, double y) { return std::exp(t) * (1.0 + y - t); }

double exp_max_gap_point(double lo, double hi) {
    if (hi - lo <= 1e-12) return 0.5 * (lo + hi);
    // exp(t) equals the secant slope
    double t = lo + std::log(std::expm1(hi - lo) / (hi - lo));
    return std::clamp(t, lo, hi);
}

EnvelopeLp envelope_lp(const LogLinearSystem& sys, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int extra_cols,
                       const Eigen::VectorXd* extra_tangent) {
    const int n = sys.n(), l = sys.l(), m = sys.m();
    const int cols = 2 * n + extra_cols;
    struct Row {
        Eigen::RowVectorXd a;
        RowType type;
        double rhs;
    };
    std::vector<Row> rows;
    rows.reserve(l + m + 5 * n);
    for (int k = 0; k < l; ++k) {
        Row r{Eigen::RowVectorXd::Zero(cols), RowType::eq, sys.b(k)};
        r.a.segment(n, n) = sys.A.row(k);
        rows.push_back(std::move(r));
    }
    for (int j = 0; j < m; ++j) {
        Row r{Eigen::RowVectorXd::Zero(cols), RowType::le, sys.h(j)};
        r.a.head(n) = sys.St.row(j);
        rows.push_back(std::move(r));
    }
    EnvelopeLp out;
    out.n = n;
    out.first_extra = 2 * n;
    out.eq_rows = l;
    LpProblem& lp = out.lp;
    lp.lo = Eigen::VectorXd::Zero(cols);
    lp.hi = Eigen::VectorXd::Constant(cols, kInf);
    lp.c = Eigen::VectorXd::Zero(cols);
    for (int i = 0; i < n; ++i) {
        const double a = lo(i), b = hi(i);
        if (b - a <= 1e-12) {
            double mid = 0.5 * (a + b);
            lp.lo(i) = lp.hi(i) = mid;
            lp.lo(n + i) = lp.hi(n + i) = std::exp(mid);
            continue;
        }
        lp.lo(i) = a;
        lp.hi(i) = b;
        lp.lo(n + i) = std::exp(a);
        lp.hi(n + i) = std::exp(b);
        const double slope = std::exp(a) * std::expm1(b - a) / (b - a);
        Row sec{Eigen::RowVectorXd::Zero(cols), RowType::le, std::exp(a) - slope * a};
        sec.a(n + i) = 1.0;
        sec.a(i) = -slope;
        rows.push_back(std::move(sec));
        std::vector<double> pts{a, b, exp_max_gap_point(a, b)};
        if (extra_tangent && extra_tangent->size() == n) {
            double t = (*extra_tangent)(i);
            if (t > a + 1e-3 * (b - a) && t < b - 1e-3 * (b - a)) pts.push_back(t);
        }
        for (double t : pts) {
            double et = std::exp(t);
            Row tan{Eigen::RowVectorXd::Zero(cols), RowType::ge, et * (1.0 - t)};
            tan.a(n + i) = 1.0;
            tan.a(i) = -et;
            rows.push_back(std::move(tan));
        }
    }
    lp.A.resize(static_cast<Eigen::Index>(rows.size()), cols);
    lp.b.resize(static_cast<Eigen::Index>(rows.size()));
    lp.rows.resize(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        lp.A.row(static_cast<Eigen::Index>(r)) = rows[r].a;
        lp.b(static_cast<Eigen::Index>(r)) = rows[r].rhs;
        lp.rows[r] = rows[r].type;
    }
    return out;
}

namespace {

struct NodeOrder {
    bool operator()(const BnbNode& a, const BnbNode& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    }
};

struct Child {
    BnbNode node;
    bool empty = false;
    std::optional<Candidate> cand;
};

// variable and split point for a node; -1 when nothing can be split
std::pair<int, double> choose_branch(const BnbNode& node, const Candidate* inc, const BnbSettings& s) {
    const Eigen::Index n = node.lo.size();
    int best = -1;
    double score = 0.0;
    const auto& r = node.relax;
    auto weight = [&](Eigen::Index i) { return s.weights.size() == n ? s.weights(i) : 1.0; };
    if (r.y.size() == n && r.v.size() == n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (node.hi(i) - node.lo(i) <= s.min_width) continue;
            double g = weight(i) * std::abs(r.v(i) - std::exp(r.y(i)));
            if (s.log_weights.size() == n && s.log_weights(i) != 0.0) {
                double lv = std::log(std::clamp(r.v(i), std::exp(node.lo(i)), std::exp(node.hi(i))));
                g = std::max(g, std::abs(s.log_weights(i)) * std::abs(r.y(i) - lv));
            }
            if (g > score) {
                score = g;
                best = static_cast<int>(i);
            }
        }
    }
    if (best < 0 || score <= 1e-15) {
        best = -1;
        score = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (node.hi(i) - node.lo(i) <= s.min_width) continue;
            double g = weight(i) * (std::exp(node.hi(i)) - std::exp(node.lo(i))) + 1e-300 * (node.hi(i) - node.lo(i));
            if (g > score) {
                score = g;
                best = static_cast<int>(i);
            }
        }
    }
    if (best < 0) return {-1, 0.0};
    const double a = node.lo(best), b = node.hi(best), w = b - a;
    auto inside = [&](double t) { return std::isfinite(t) && t >= a + 0.1 * w && t <= b - 0.1 * w; };
    if (inc && inc->y.size() == n && inside(inc->y(best))) return {best, inc->y(best)};
    if (r.y.size() == n && inside(r.y(best))) return {best, r.y(best)};
    return {best, std::clamp(exp_max_gap_point(a, b), a + 0.1 * w, b - 0.1 * w)};
}

} // namespace

BnbOutcome branch_and_bound(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const BnbCallbacks& cb,
                            const BnbSettings& s, std::optional<Candidate> start) {
    BnbOutcome out;
    std::optional<Candidate> inc = std::move(start);
    long next_id = 0;
    double fathomed_min = kInf;

    auto evaluate = [&](Eigen::VectorXd l, Eigen::VectorXd h, double parent_bound, int depth, const Candidate* incp) {
        Child c;
        if (cb.tighten && !cb.tighten(l, h)) {
            c.empty = true;
            return c;
        }
        c.node.lo = std::move(l);
        c.node.hi = std::move(h);
        c.node.depth = depth;
        c.node.relax = cb.relax(c.node.lo, c.node.hi, incp);
        if (c.node.relax.infeasible) {
            c.empty = true;
            return c;
        }
        c.node.bound = std::max(c.node.relax.bound, parent_bound);
        if (cb.heuristic) c.cand = cb.heuristic(c.node);
        return c;
    };

    auto gap_tol = [&](double up) { return std::max(s.abs_gap, s.rel_gap * std::abs(up)); };
    std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> open;

    auto absorb = [&](Child& c) {
        if (c.cand && (!inc || c.cand->value < inc->value)) inc = std::move(c.cand);
        if (c.empty) return;
        c.node.id = next_id++;
        double up = inc ? inc->value : kInf;
        if (c.node.bound > s.fathom_above || c.node.bound >= up - gap_tol(up)) {
            fathomed_min = std::min(fathomed_min, c.node.bound);
            return;
        }
        open.push(std::move(c.node));
    };

    {
        Child root = evaluate(lo, hi, -kInf, 0, inc ? &*inc : nullptr);
        out.nodes = 1;
        absorb(root);
    }

    double running_lower = -kInf;
    for (;;) {
        double up = inc ? inc->value : kInf;
        // children pushed before a better incumbent appeared may now be fathomable
        double lower = std::min({open.empty() ? kInf : open.top().bound, fathomed_min, up});
        running_lower = std::max(running_lower, lower);
        out.lower_history.push_back(running_lower);
        out.upper_history.push_back(up);
        if (up <= s.stop_at_or_below) break;
        if (running_lower > s.fathom_above) break;
        if (open.empty()) break;
        if (up - running_lower <= gap_tol(up)) break;
        if (out.nodes >= s.max_nodes) {
            out.exhausted = true;
            break;
        }

        std::vector<BnbNode> batch;
        const int k = std::max(1, s.workers);
        while (!open.empty() && static_cast<int>(batch.size()) < k) {
            BnbNode nd = open.top();
            open.pop();
            if (nd.bound >= up - gap_tol(up)) {
                fathomed_min = std::min(fathomed_min, nd.bound);
                continue;
            }
            batch.push_back(std::move(nd));
        }
        if (batch.empty()) continue;

        struct Job {
            Eigen::VectorXd l, h;
            double bound;
            int depth;
        };
        std::vector<Job> jobs;
        for (auto& nd : batch) {
            auto [var, at] = choose_branch(nd, inc ? &*inc : nullptr, s);
            if (var < 0) {
                fathomed_min = std::min(fathomed_min, nd.bound);
                continue;
            }
            Job left{nd.lo, nd.hi, nd.bound, nd.depth + 1};
            Job right{nd.lo, nd.hi, nd.bound, nd.depth + 1};
            left.h(var) = at;
            right.l(var) = at;
            jobs.push_back(std::move(left));
            jobs.push_back(std::move(right));
        }
        std::vector<Child> children(jobs.size());
        const Candidate* incp = inc ? &*inc : nullptr;
        if (k == 1 || jobs.size() <= 1) {
            for (size_t j = 0; j < jobs.size(); ++j)
                children[j] = evaluate(jobs[j].l, jobs[j].h, jobs[j].bound, jobs[j].depth, incp);
        } else {
            std::atomic<size_t> next{0};
            auto work = [&] {
                for (size_t j; (j = next.fetch_add(1)) < jobs.size();)
                    children[j] = evaluate(jobs[j].l, jobs[j].h, jobs[j].bound, jobs[j].depth, incp);
            };
            std::vector<std::thread> pool;
            const size_t nt = std::min<size_t>(static_cast<size_t>(k), jobs.size());
            for (size_t t = 0; t < nt; ++t) pool.emplace_back(work);
            for (auto& t : pool) t.join();
        }
        out.nodes += static_cast<long>(children.size());
        for (auto& c : children) absorb(c);
    }
    out.upper = inc ? inc->value : kInf;
    out.lower = out.lower_history.empty() ? -kInf : out.lower_history.back();
    if (inc) out.y = inc->y;
    return out;
}

std::optional<Eigen::VectorXd> polyhedron_center(const LogLinearSystem& sys, const Eigen::VectorXd& lo,
                                                 const Eigen::VectorXd& hi) {
    const int n = sys.n();
    for (int i = 0; i < n; ++i)
        if (lo(i) > hi(i)) return std::nullopt;
    LpProblem lp;
    lp.A.resize(0, n + 1);
    lp.c = Eigen::VectorXd::Zero(n + 1);
    lp.c(n) = -1.0;
    lp.lo = Eigen::VectorXd::Constant(n + 1, -kInf);
    lp.hi = Eigen::VectorXd::Constant(n + 1, kInf);
    lp.lo(n) = 0.0;
    for (int i = 0; i < n; ++i) {
        lp.lo(i) = lo(i);
        lp.hi(i) = hi(i);
    }
    for (int j = 0; j < sys.m(); ++j) {
        double nrm = sys.St.row(j).norm();
        if (nrm == 0.0) {
            if (sys.h(j) < 0) return std::nullopt;
            continue;
        }
        Eigen::RowVectorXd a(n + 1);
        a.head(n) = sys.St.row(j);
        a(n) = nrm;
        lp.add_row(a, RowType::le, sys.h(j));
    }
    for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(n + 1);
        a(i) = 1.0;
        a(n) = 1.0;
        lp.add_row(a, RowType::le, hi(i));
        a(i) = -1.0;
        lp.add_row(a, RowType::le, -lo(i));
    }
    LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::optimal) return std::nullopt;
    Eigen::VectorXd y = sol.x.head(n);
    return y.cwiseMax(lo).cwiseMin(hi);
}

double max_step_in_polyhedron(const LogLinearSystem& sys, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                              const Eigen::VectorXd& y, const Eigen::VectorXd& d) {
    double a = 1.0;
    if (sys.m() > 0) {
        Eigen::VectorXd sd = sys.St * d;
        Eigen::VectorXd slack = sys.h - sys.St * y;
        for (int j = 0; j < sys.m(); ++j)
            if (sd(j) > 0) a = std::min(a, std::max(0.0, slack(j)) / sd(j));
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (d(i) > 0) a = std::min(a, std::max(0.0, hi(i) - y(i)) / d(i));
        if (d(i) < 0) a = std::min(a, std::max(0.0, y(i) - lo(i)) / -d(i));
    }
    return a;
}

double residual_norm(const LogLinearSystem& sys, const Eigen::VectorXd& y) {
    return (sys.A * y.array().exp().matrix() - sys.b).norm();
}

DescentResult residual_descent(const LogLinearSystem& sys, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const Eigen::VectorXd& y0, int max_iter, double target) {
    const int n = sys.n(), m = sys.m();
    DescentResult res;
    Eigen::VectorXd y = y0;
    Eigen::VectorXd r = sys.A * y.array().exp().matrix() - sys.b;
    double f = r.norm();
    double mu = -1.0;
    int stalls = 0;
    for (int it = 0; it < max_iter && f > target; ++it) {
        res.iterations = it + 1;
        Eigen::MatrixXd J = sys.A * y.array().exp().matrix().asDiagonal();
        Eigen::MatrixXd JtJ = J.transpose() * J;
        const double scale = std::max(1e-300, JtJ.diagonal().maxCoeff());
        if (mu < 0) mu = 1e-3 * scale;
        Eigen::MatrixXd H = JtJ;
        H.diagonal().array() += mu;
        Eigen::VectorXd g = J.transpose() * r;
        Eigen::VectorXd step = -H.ldlt().solve(g);
        if (step.allFinite() && max_step_in_polyhedron(sys, lo, hi, y, step) < 1.0) {
            // blocked by the polyhedron: bound-constrained step, objective normalized
            const double gs = std::max(g.lpNorm<Eigen::Infinity>(), 1e-300);
            QpProblem qp(n);
            qp.H = H / gs;
            qp.g = g / gs;
            qp.C.resize(m + 2 * n, n);
            qp.d.resize(m + 2 * n);
            if (m) {
                qp.C.topRows(m) = sys.St;
                qp.d.head(m) = sys.h - sys.St * y;
            }
            qp.C.middleRows(m, n) = Eigen::MatrixXd::Identity(n, n);
            qp.d.segment(m, n) = hi - y;
            qp.C.bottomRows(n) = -Eigen::MatrixXd::Identity(n, n);
            qp.d.tail(n) = y - lo;
            step = solve_qp(qp).x;
        }
        if (!step.allFinite()) break;
        double a = max_step_in_polyhedron(sys, lo, hi, y, step);
        Eigen::VectorXd yn = y + a * step;
        Eigen::VectorXd rn = sys.A * yn.array().exp().matrix() - sys.b;
        double fn = rn.norm();
        if (fn < f) {
            stalls = (f - fn) <= 1e-12 * f ? stalls + 1 : 0;
            y = yn;
            r = rn;
            f = fn;
            mu = std::max(mu / 3.0, 1e-14 * scale);
            if (stalls >= 3) break;
        } else {
            mu *= 4.0;
            if (mu > 1e8 * scale || (a * step).lpNorm<Eigen::Infinity>() < 1e-15) break;
        }
    }
    res.y = y;
    res.residual = f;
    return res;
}

Eigen::VectorXd improve_linear(const LogLinearSystem& sys, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const Eigen::VectorXd& c, const Eigen::VectorXd& y0, double feas, int max_iter) {
    const int n = sys.n(), m = sys.m();
    Eigen::VectorXd y = y0;
    double f = c.dot(y);
    double mu = std::max(c.norm(), 1e-12);
    int failures = 0;
    for (int it = 0; it < max_iter && failures < 6; ++it) {
        Eigen::VectorXd x = y.array().exp().matrix();
        QpProblem qp(n);
        qp.H = mu * Eigen::MatrixXd::Identity(n, n);
        qp.g = c;
        qp.E = sys.A * x.asDiagonal();
        qp.f = sys.b - sys.A * x;
        qp.C.resize(m + 2 * n, n);
        qp.d.resize(m + 2 * n);
        if (m) {
            qp.C.topRows(m) = sys.St;
            qp.d.head(m) = sys.h - sys.St * y;
        }
        qp.C.middleRows(m, n) = Eigen::MatrixXd::Identity(n, n);
        qp.d.segment(m, n) = hi - y;
        qp.C.bottomRows(n) = -Eigen::MatrixXd::Identity(n, n);
        qp.d.tail(n) = y - lo;
        QpSolution s = solve_qp(qp);
        if (s.status != QpStatus::optimal || !s.x.allFinite()) {
            mu *= 4.0;
            ++failures;
            continue;
        }
        Eigen::VectorXd step = s.x;
        double a = max_step_in_polyhedron(sys, lo, hi, y, step);
        DescentResult d = residual_descent(sys, lo, hi, y + a * step, 30, feas);
        double fn = c.dot(d.y);
        if (d.residual <= feas && fn < f - 1e-14 * (1.0 + std::abs(f))) {
            if (f - fn <= 1e-13 * (1.0 + std::abs(f))) break;
            y = d.y;
            f = fn;
            mu = std::max(mu / 2.0, 1e-8 * c.norm());
            failures = 0;
        } else {
            mu *= 4.0;
            ++failures;
        }
    }
    return y;
}

std::optional<Eigen::VectorXd> newton_restore(const LogLinearSystem& sys, const Eigen::VectorXd& y0, double tol,
                                              int max_iter) {
    Eigen::VectorXd y = y0;
    const double scale = 1.0 + sys.b.lpNorm<Eigen::Infinity>();
    for (int it = 0; it <= max_iter; ++it) {
        Eigen::VectorXd x = y.array().exp().matrix();
        Eigen::VectorXd F = sys.A * x - sys.b;
        if (!F.allFinite()) return std::nullopt;
        if (F.lpNorm<Eigen::Infinity>() <= tol * scale) return y;
        if (it == max_iter) break;
        Eigen::MatrixXd J = sys.A * x.asDiagonal();
        Eigen::MatrixXd JJt = J * J.transpose();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(JJt);
        if (ldlt.info() != Eigen::Success) return std::nullopt;
        Eigen::VectorXd step = J.transpose() * ldlt.solve(F);
        double a = 1.0;
        // damp steps that would blow up exp
        double big = step.lpNorm<Eigen::Infinity>();
        if (big > 1.0) a = 1.0 / big;
        y -= a * step;
    }
    return std::nullopt;
}

} // namespace css
