#pragma once

#include <Eigen/Dense>

namespace css {

// min 1/2 x'Hx + g'x  s.t.  C x <= d,  E x = f
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd C;
    Eigen::VectorXd d;
    Eigen::MatrixXd E;
    Eigen::VectorXd f;

    explicit QpProblem(int n = 0);
    int n() const { return static_cast<int>(g.size()); }
    void add_le(const Eigen::RowVectorXd& a, double rhs);
    void add_eq(const Eigen::RowVectorXd& a, double rhs);
};

enum class QpStatus { optimal, max_iter, numeric };

struct QpOptions {
    double tol = 1e-10;
    int max_iter = 200;
};

struct QpSolution {
    QpStatus status = QpStatus::numeric;
    Eigen::VectorXd x;
    Eigen::VectorXd z;      // inequality multipliers
    Eigen::VectorXd lambda; // equality multipliers
    double objective = 0.0;
    double lower_bound = 0.0; // objective minus the complementarity gap
    int iterations = 0;
};

// Mehrotra predictor-corrector interior point for convex QPs.
QpSolution solve_qp(const QpProblem& qp, const QpOptions& opt = {});

} // namespace css
