#pragma once

#include "css/model.hpp"
#include "css/simplex.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace css {

// Spatial branch and bound over a y-box for problems whose only
// nonconvexity is the lifted relation v = exp(y). Minimization throughout.

// Secant over-estimator of exp on [lo, hi]; exact at both ends.
double exp_secant(double lo, double hi, double y);
// Tangent under-estimator of exp at t.
double exp_tangent(double t, double y);
// Point of [lo, hi] where the secant is farthest above exp.
double exp_max_gap_point(double lo, double hi);

// LP columns [y (n) | v (n) | extra], rows: A v (+ slack columns added by the
// caller) = b, St y <= h, secant and tangent cuts; y in [lo, hi], v in
// [exp lo, exp hi]. Tangents at lo, hi, the max-gap point and `extra_tangent`
// when it lies strictly inside the box.
struct EnvelopeLp {
    LpProblem lp;
    int n = 0;
    int first_extra = 0;
    int eq_rows = 0; // first eq_rows rows are A v = b
};

EnvelopeLp envelope_lp(const LogLinearSystem& sys, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int extra_cols,
                       const Eigen::VectorXd* extra_tangent = nullptr);

struct Relaxation {
    bool infeasible = false;
    double bound = 0.0;
    Eigen::VectorXd y;
    Eigen::VectorXd v;
};

struct Candidate {
    double value = 0.0;
    Eigen::VectorXd y;
};

struct BnbNode {
    Eigen::VectorXd lo, hi;
    double bound = 0.0;
    long id = 0;
    int depth = 0;
    Relaxation relax;
};

struct BnbCallbacks {
    // relaxation over a box; may consult the incumbent (nullptr if none)
    std::function<Relaxation(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const Candidate* incumbent)> relax;
    // primal heuristic from a node's relaxation
    std::function<std::optional<Candidate>(const BnbNode& node)> heuristic;
    // optional box tightening; false when the box is proven empty
    std::function<bool(Eigen::VectorXd& lo, Eigen::VectorXd& hi)> tighten;
};

struct BnbSettings {
    long max_nodes = 20000;
    int workers = 1;
    double abs_gap = 1e-9;
    double rel_gap = 1e-6;
    // nodes whose bound exceeds this are fathomed; the search stops once
    // the global lower bound exceeds it
    double fathom_above = kInf;
    // stop as soon as the incumbent is at or below this value
    double stop_at_or_below = -kInf;
    Eigen::VectorXd weights; // per-variable branching weight, default ones
    // optional weight on the gap |y - ln v| measured in y (objectives in y)
    Eigen::VectorXd log_weights;
    double min_width = 1e-9;
};

struct BnbOutcome {
    double upper = kInf; // incumbent value
    double lower = -kInf;
    Eigen::VectorXd y;   // incumbent point (empty if none)
    long nodes = 0;
    bool exhausted = false;
    std::vector<double> lower_history;
    std::vector<double> upper_history;
};

BnbOutcome branch_and_bound(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const BnbCallbacks& cb,
                            const BnbSettings& settings, std::optional<Candidate> start = std::nullopt);

// Polyhedron P = {St y <= h, lo <= y <= hi}.
// Chebyshev-style centre; nullopt when P is empty.
std::optional<Eigen::VectorXd> polyhedron_center(const LogLinearSystem& sys, const Eigen::VectorXd& lo,
                                                 const Eigen::VectorXd& hi);

// Largest alpha in [0, 1] keeping y + alpha d in P (y assumed in P).
double max_step_in_polyhedron(const LogLinearSystem& sys, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                              const Eigen::VectorXd& y, const Eigen::VectorXd& d);

// Levenberg-Marquardt descent on ||A exp y - b||_2 inside P. y0 must lie in P.
struct DescentResult {
    Eigen::VectorXd y;
    double residual = kInf;
    int iterations = 0;
};
DescentResult residual_descent(const LogLinearSystem& sys, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const Eigen::VectorXd& y0, int max_iter = 60, double target = 0.0);

// Gauss-Newton projection onto {A exp y = b} without inequality constraints.
std::optional<Eigen::VectorXd> newton_restore(const LogLinearSystem& sys, const Eigen::VectorXd& y0, double tol = 1e-13,
                                              int max_iter = 50);

double residual_norm(const LogLinearSystem& sys, const Eigen::VectorXd& y);

// Local descent of c'y from a feasible y: linearized QP steps with a proximal
// term, each followed by residual_descent back onto the manifold.
// Returns y unchanged when no step improves.
Eigen::VectorXd improve_linear(const LogLinearSystem& sys, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                               const Eigen::VectorXd& c, const Eigen::VectorXd& y, double feas, int max_iter = 15);

} // namespace css
