#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

namespace css {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowType { le, eq, ge };

// min c'x  s.t.  rows(A x) {<=,=,>=} b,  lo <= x <= hi
struct LpProblem {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    std::vector<RowType> rows;
    Eigen::VectorXd c;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;

    // all rows equalities, x >= 0
    static LpProblem standard(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c);
    void add_row(const Eigen::RowVectorXd& a, RowType type, double rhs);
};

enum class LpStatus { optimal, infeasible, unbounded, infeasible_numeric };

const char* to_string(LpStatus s);

struct SimplexOptions {
    double feas_tol = 1e-9;
    double opt_tol = 1e-9;
    int max_iter = 50000;
    int bland_after = 50;  // consecutive degenerate pivots before switching
    int refactor_every = 40;
};

struct LpSolution {
    LpStatus status = LpStatus::infeasible_numeric;
    double objective = 0.0;
    Eigen::VectorXd x;
    Eigen::VectorXd duals; // one per row, sign convention of min c'x
    int iterations = 0;
    bool used_bland = false;
};

// Dense bounded revised simplex, two phases, Dantzig partial pricing.
LpSolution solve_lp(const LpProblem& lp, const SimplexOptions& opt = {});

} // namespace css
