#pragma once

#include <Eigen/Dense>

#include <vector>

namespace css {

// min <C,X>  s.t.  <A_i,X> = b_i,  X = diag(X_1..X_K) psd
// A[k] is m x (n_k*n_k); row i holds vec(A_i restricted to block k), symmetric.
struct SdpProblem {
    std::vector<int> block_sizes;
    std::vector<Eigen::MatrixXd> A;
    Eigen::VectorXd b;
    std::vector<Eigen::MatrixXd> C; // empty means identity blocks

    int m() const { return static_cast<int>(b.size()); }
};

// inaccurate: stalled short of tol but within inaccurate_tol
enum class SdpStatus { optimal, inaccurate, primal_infeasible, max_iter, numeric };

const char* to_string(SdpStatus s);

struct SdpOptions {
    double tol = 1e-9;
    double inaccurate_tol = 1e-6;
    double farkas_tol = 1e-6;
    int max_iter = 150;
};

struct SdpSolution {
    SdpStatus status = SdpStatus::numeric;
    std::vector<Eigen::MatrixXd> X;
    std::vector<Eigen::MatrixXd> S;
    Eigen::VectorXd y;
    double primal_residual = 0.0;
    int iterations = 0;
};

// HKM primal-dual path following with Mehrotra correction. A primal
// infeasible instance is reported when the dual iterate turns into a
// Farkas ray: b'y > 0 with lambda_min(-A*y) / b'y > -farkas_tol.
SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opt = {});

double min_eigenvalue(const Eigen::MatrixXd& M);

} // namespace css
