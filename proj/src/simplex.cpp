#include "css/simplex.hpp"

#include <cmath>
#include <stdexcept>

namespace css {

LpProblem LpProblem::standard(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    LpProblem lp;
    lp.A = A;
    lp.b = b;
    lp.rows.assign(A.rows(), RowType::eq);
    lp.c = c;
    lp.lo = Eigen::VectorXd::Zero(A.cols());
    lp.hi = Eigen::VectorXd::Constant(A.cols(), kInf);
    return lp;
}

void LpProblem::add_row(const Eigen::RowVectorXd& a, RowType type, double rhs) {
    A.conservativeResize(A.rows() + 1, Eigen::NoChange);
    A.row(A.rows() - 1) = a;
    b.conservativeResize(b.size() + 1);
    b(b.size() - 1) = rhs;
    rows.push_back(type);
}

const char* to_string(LpStatus s) {
    switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    default: return "infeasible_numeric";
    }
}

namespace {

enum class VarState { basic, at_lo, at_hi, free_zero };

class Simplex {
public:
    Simplex(const LpProblem& lp, const SimplexOptions& opt) : opt_(opt) {
        m_ = static_cast<int>(lp.A.rows());
        n_ = static_cast<int>(lp.A.cols());
        int ns = 0;
        for (auto r : lp.rows) ns += r != RowType::eq;
        N_ = n_ + ns + m_;
        A_ = Eigen::MatrixXd::Zero(m_, N_);
        A_.leftCols(n_) = lp.A;
        b_ = lp.b;
        lo_.resize(N_);
        hi_.resize(N_);
        lo_.head(n_) = lp.lo;
        hi_.head(n_) = lp.hi;
        int k = n_;
        for (int i = 0; i < m_; ++i) {
            if (lp.rows[i] == RowType::eq) continue;
            A_(i, k) = lp.rows[i] == RowType::le ? 1.0 : -1.0;
            lo_(k) = 0.0;
            hi_(k) = kInf;
            ++k;
        }
        art0_ = k;
        x_ = Eigen::VectorXd::Zero(N_);
        state_.assign(N_, VarState::at_lo);
        for (int j = 0; j < art0_; ++j) {
            if (std::isfinite(lo_(j))) { x_(j) = lo_(j); state_[j] = VarState::at_lo; }
            else if (std::isfinite(hi_(j))) { x_(j) = hi_(j); state_[j] = VarState::at_hi; }
            else { x_(j) = 0.0; state_[j] = VarState::free_zero; }
        }
        Eigen::VectorXd r = b_ - A_.leftCols(art0_) * x_.head(art0_);
        head_.resize(m_);
        for (int i = 0; i < m_; ++i) {
            int a = art0_ + i;
            A_(i, a) = r(i) >= 0 ? 1.0 : -1.0;
            lo_(a) = 0.0;
            hi_(a) = kInf;
            x_(a) = std::abs(r(i));
            state_[a] = VarState::basic;
            head_[i] = a;
        }
        c_ = Eigen::VectorXd::Zero(N_);
    }

    LpSolution run(const LpProblem& lp) {
        LpSolution sol;
        for (int j = 0; j < n_; ++j)
            if (lo_(j) > hi_(j)) {
                sol.status = LpStatus::infeasible;
                return sol;
            }
        // phase 1
        c_.setZero();
        c_.tail(m_).setOnes();
        auto st = iterate();
        sol.iterations = iters_;
        if (st != Step::optimal) {
            sol.status = LpStatus::infeasible_numeric;
            return sol;
        }
        double infeas = x_.tail(m_).sum();
        double scale = std::max(1.0, b_.lpNorm<Eigen::Infinity>());
        if (infeas > 1e-7 * scale) {
            sol.status = LpStatus::infeasible;
            sol.objective = infeas;
            return sol;
        }
        for (int i = 0; i < m_; ++i) hi_(art0_ + i) = 0.0;
        for (int a = art0_; a < N_; ++a)
            if (state_[a] != VarState::basic) { x_(a) = 0.0; state_[a] = VarState::at_lo; }
        drive_out_artificials();
        // phase 2
        c_.setZero();
        c_.head(n_) = lp.c;
        bland_ = false;
        st = iterate();
        sol.iterations = iters_;
        sol.used_bland = used_bland_;
        if (st == Step::unbounded) {
            sol.status = LpStatus::unbounded;
            return sol;
        }
        if (st != Step::optimal) {
            sol.status = LpStatus::infeasible_numeric;
            return sol;
        }
        refactor();
        sol.x = x_.head(n_);
        sol.objective = lp.c.dot(sol.x);
        Eigen::VectorXd cb(m_);
        for (int i = 0; i < m_; ++i) cb(i) = c_(head_[i]);
        sol.duals = Binv_.transpose() * cb;
        Eigen::VectorXd res = lp.A * sol.x - lp.b;
        double viol = 0.0;
        for (int i = 0; i < m_; ++i) {
            double v = res(i);
            if (lp.rows[i] == RowType::eq) viol = std::max(viol, std::abs(v));
            else if (lp.rows[i] == RowType::le) viol = std::max(viol, v);
            else viol = std::max(viol, -v);
        }
        sol.status = viol <= 1e-6 * scale ? LpStatus::optimal : LpStatus::infeasible_numeric;
        return sol;
    }

private:
    enum class Step { optimal, unbounded, numeric };

    bool refactor() {
        Eigen::MatrixXd B(m_, m_);
        for (int i = 0; i < m_; ++i) B.col(i) = A_.col(head_[i]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        Binv_ = lu.inverse();
        if (!Binv_.allFinite()) return false;
        Eigen::VectorXd rhs = b_;
        for (int j = 0; j < N_; ++j)
            if (state_[j] != VarState::basic && x_(j) != 0.0) rhs -= A_.col(j) * x_(j);
        Eigen::VectorXd xb = Binv_ * rhs;
        for (int i = 0; i < m_; ++i) x_(head_[i]) = xb(i);
        since_refactor_ = 0;
        return true;
    }

    bool eligible(int j, double d) const {
        if (state_[j] == VarState::basic) return false;
        if (lo_(j) == hi_(j)) return false;
        const double tol = opt_.opt_tol;
        switch (state_[j]) {
        case VarState::at_lo: return d < -tol;
        case VarState::at_hi: return d > tol;
        case VarState::free_zero: return std::abs(d) > tol;
        default: return false;
        }
    }

    int price(const Eigen::RowVectorXd& y) {
        if (bland_) {
            for (int j = 0; j < N_; ++j) {
                if (state_[j] == VarState::basic) continue;
                double d = c_(j) - y.dot(A_.col(j));
                if (eligible(j, d)) return j;
            }
            return -1;
        }
        const int seg = std::max(64, N_ / 8);
        int start = cursor_;
        int scanned = 0;
        while (scanned < N_) {
            int best = -1;
            double bestd = 0.0;
            for (int k = 0; k < seg && scanned < N_; ++k, ++scanned) {
                int j = (start + scanned) % N_;
                if (state_[j] == VarState::basic) continue;
                double d = c_(j) - y.dot(A_.col(j));
                if (eligible(j, d) && std::abs(d) > bestd) {
                    bestd = std::abs(d);
                    best = j;
                }
            }
            if (best >= 0) {
                cursor_ = (start + scanned) % N_;
                return best;
            }
        }
        return -1;
    }

    Step iterate() {
        int degenerate = 0;
        if (!refactor()) return Step::numeric;
        while (true) {
            if (iters_ >= opt_.max_iter) return Step::numeric;
            if (since_refactor_ >= opt_.refactor_every && !refactor()) return Step::numeric;
            Eigen::VectorXd cb(m_);
            for (int i = 0; i < m_; ++i) cb(i) = c_(head_[i]);
            Eigen::RowVectorXd y = cb.transpose() * Binv_;
            int q = price(y);
            if (q < 0) {
                // confirm with a fresh factorization before declaring optimality
                if (since_refactor_ > 0) {
                    if (!refactor()) return Step::numeric;
                    continue;
                }
                return Step::optimal;
            }
            double dq = c_(q) - y.dot(A_.col(q));
            double dir = dq < 0 ? 1.0 : -1.0;
            Eigen::VectorXd alpha = Binv_ * A_.col(q);
            // Two-pass Harris ratio test: bound the step with a relaxed
            // feasibility tolerance, then take the largest pivot under that bound.
            constexpr double piv_tol = 1e-9, feas_tol = 1e-9;
            auto ratio = [&](int i, double a, double relax) {
                int jb = head_[i];
                if (a > 0) return std::isfinite(lo_(jb)) ? (x_(jb) - lo_(jb) + relax) / a : kInf;
                return std::isfinite(hi_(jb)) ? (hi_(jb) - x_(jb) + relax) / (-a) : kInf;
            };
            double bound = hi_(q) - lo_(q);
            for (int i = 0; i < m_; ++i) {
                double a = dir * alpha(i);
                if (std::abs(a) > piv_tol) bound = std::min(bound, ratio(i, a, feas_tol));
            }
            double theta = hi_(q) - lo_(q);
            int leave = -1;
            double best_piv = 0.0;
            if (bound < theta) {
                for (int i = 0; i < m_; ++i) {
                    double a = dir * alpha(i);
                    if (std::abs(a) <= piv_tol) continue;
                    double t = ratio(i, a, 0.0);
                    if (t > bound) continue;
                    bool take;
                    if (leave < 0) take = true;
                    else if (bland_) take = head_[i] < head_[leave];
                    else take = std::abs(a) > best_piv;
                    if (take) {
                        leave = i;
                        best_piv = std::abs(a);
                        theta = std::max(t, 0.0);
                    }
                }
            }
            if (!std::isfinite(theta)) return Step::unbounded;
            ++iters_;
            ++since_refactor_;
            if (theta <= 1e-12) {
                if (++degenerate > opt_.bland_after) bland_ = used_bland_ = true;
            } else {
                degenerate = 0;
            }
            x_(q) += dir * theta;
            for (int i = 0; i < m_; ++i) x_(head_[i]) -= dir * theta * alpha(i);
            if (leave < 0) {
                state_[q] = dir > 0 ? VarState::at_hi : VarState::at_lo;
                x_(q) = dir > 0 ? hi_(q) : lo_(q);
                continue;
            }
            int jl = head_[leave];
            double a = dir * alpha(leave);
            if (a > 0) { state_[jl] = VarState::at_lo; x_(jl) = lo_(jl); }
            else { state_[jl] = VarState::at_hi; x_(jl) = hi_(jl); }
            head_[leave] = q;
            state_[q] = VarState::basic;
            pivot(leave, alpha);
        }
    }

    void pivot(int r, const Eigen::VectorXd& alpha) {
        double p = alpha(r);
        Binv_.row(r) /= p;
        for (int i = 0; i < m_; ++i)
            if (i != r && alpha(i) != 0.0) Binv_.row(i) -= alpha(i) * Binv_.row(r);
    }

    void drive_out_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (head_[i] < art0_) continue;
            Eigen::RowVectorXd row = Binv_.row(i);
            int best = -1;
            double bestv = 1e-7;
            for (int j = 0; j < art0_; ++j) {
                if (state_[j] == VarState::basic) continue;
                double v = std::abs(row.dot(A_.col(j)));
                if (v > bestv) { bestv = v; best = j; }
            }
            if (best < 0) continue;
            Eigen::VectorXd alpha = Binv_ * A_.col(best);
            int jl = head_[i];
            state_[jl] = VarState::at_lo;
            x_(jl) = 0.0;
            head_[i] = best;
            state_[best] = VarState::basic;
            pivot(i, alpha);
        }
        refactor();
    }

    SimplexOptions opt_;
    int m_ = 0, n_ = 0, N_ = 0, art0_ = 0;
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_, c_, lo_, hi_, x_;
    std::vector<VarState> state_;
    std::vector<int> head_;
    Eigen::MatrixXd Binv_;
    int iters_ = 0, since_refactor_ = 0, cursor_ = 0;
    bool bland_ = false, used_bland_ = false;
};

} // namespace

LpSolution solve_lp(const LpProblem& lp, const SimplexOptions& opt) {
    if (lp.A.cols() != lp.c.size() || lp.A.rows() != lp.b.size() ||
        static_cast<Eigen::Index>(lp.rows.size()) != lp.A.rows() || lp.lo.size() != lp.c.size() ||
        lp.hi.size() != lp.c.size())
        throw std::invalid_argument("inconsistent LP dimensions");
    Simplex s(lp, opt);
    return s.run(lp);
}

} // namespace css
