#pragma once

#include "css/model.hpp"
#include "css/polynomial.hpp"
#include "css/ring.hpp"
#include "css/sdp.hpp"

#include <Eigen/Sparse>

#include <iosfwd>
#include <string>
#include <vector>

namespace css {

// Multisets of inequality indices; the empty multiset is the bare SOS term.
struct GeneratorSet {
    std::vector<std::vector<int>> products;
    int k_max = 2;

    // every multiset of size <= k_max over num_ineq inequalities, by size then lexicographic
    static GeneratorSet truncated(int num_ineq, int k_max);
};

// A polynomial system G_i(x) >= 0, H_k(x) = 0 with affine H_k = A_k x - b_k.
struct PolySystem {
    int n = 0;
    std::vector<Polynomial> inequalities;
    Eigen::MatrixXd A; // l x n, may have zero rows
    Eigen::VectorXd b;

    std::vector<Polynomial> equalities() const;
};

struct RelaxationOptions {
    bool include_sign = true; // x_i >= 0 as extra inequalities
    int k_max = 2;
    Index size_cap = 20000;
    int max_block = 200;
    double tol_eq = 1e-6;
    double tol_psd = 1e-8;
    SdpOptions sdp;
};

// Thermodynamic inequalities rescaled to unit max coefficient, followed by
// x_i >= 0 when requested; equalities are the four affine rows.
PolySystem polynomial_system(const ConstraintSystem& cs, const ParameterPoint& theta, bool include_sign);

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct SdpRelaxation {
    int n = 0;
    int d = 1;
    int d_g = 0;
    int rho = 0;
    Index num_rows = 0;   // s_p(n, rho), one per monomial t
    Index gram_size = 0;  // s_p(n, d)
    Index b_cols = 0;     // s_p(n, rho - 1) coefficients per multiplier beta_i
    int l = 0;
    PolySystem system;
    GeneratorSet gens;
    std::vector<Polynomial> gen_polys;
    // U[j] row t holds vec(U^t_j) (gram_size^2 columns, symmetric)
    std::vector<RowSparse> U;
    // row t holds V^t flattened as (i, c) -> i * b_cols + c
    RowSparse V;

    std::vector<bool> zero_rows() const;   // all U^t_j = 0 for t
    double zero_row_fraction() const;
    double zero_slice_fraction() const;    // over (t, j) pairs
};

SdpRelaxation build_relaxation(const PolySystem& sys, int d, const GeneratorSet& gens, const RelaxationOptions& opt = {});
SdpRelaxation build_relaxation(const ConstraintSystem& cs, const ParameterPoint& theta, int d, const RelaxationOptions& opt = {});

struct ReducedRelaxation {
    const SdpRelaxation* full = nullptr;
    std::vector<Index> retained_rows;
    std::vector<Index> eliminated_rows;
    std::vector<int> retained_blocks;
    Eigen::MatrixXd N;     // orthonormal basis of ker(V restricted to eliminated rows)
    Eigen::VectorXd b_m;   // minimum-norm component (zero: eliminated rows are homogeneous)
    std::vector<RowSparse> U; // retained rows, retained blocks
    Eigen::MatrixXd VN;    // retained rows of V times N
    Eigen::VectorXd rhs;   // -1 on the constant row
    bool rank_warning = false;

    Index linear_variables() const { return static_cast<Index>(N.cols()); }
};

// Dense kernel computation is capped by max_dense (columns of V touched).
ReducedRelaxation sparsity_reduce(const SdpRelaxation& rel, Index max_dense = 6000);
// Same container with nothing eliminated, N the identity.
ReducedRelaxation unreduced(const SdpRelaxation& rel);

enum class CertificateStatus { certified_infeasible, no_certificate_at_level, solver_failure };
const char* to_string(CertificateStatus s);

struct CertificateResult {
    CertificateStatus status = CertificateStatus::solver_failure;
    int level = 0;
    std::vector<Eigen::MatrixXd> P; // one Gram matrix per generator, x-monomial basis
    Eigen::MatrixXd B;              // l x b_cols
    double max_violation = 0.0;
    double min_eigenvalue = 0.0;
    std::string message;
};

// Witness check against the tensors: returns (max row violation, min eigenvalue).
std::pair<double, double> verify_witness(const SdpRelaxation& rel, const std::vector<Eigen::MatrixXd>& P,
                                         const Eigen::MatrixXd& B);

// Literal route: free multipliers eliminated, Gram blocks solved directly.
CertificateResult solve_feasibility(const ReducedRelaxation& rel, const RelaxationOptions& opt = {});

// Affine route: x = x0 + M s removes the equalities, the SDP lives in s.
CertificateResult certify_level(const PolySystem& sys, int d, const GeneratorSet& gens, const RelaxationOptions& opt = {});

CertificateResult certify_infeasible(const PolySystem& sys, int max_level, const RelaxationOptions& opt = {});
CertificateResult certify_infeasible(const ConstraintSystem& cs, const ParameterPoint& theta, int max_level,
                                     const RelaxationOptions& opt = {});

// Sparse SDP text format (.dat-s).
struct SdpaData {
    int m = 0;
    std::vector<int> block_sizes; // negative for diagonal blocks
    Eigen::VectorXd c;
    struct Entry {
        int matrix, block, i, j;
        double value;
    };
    std::vector<Entry> entries;
};

SdpaData to_sdpa(const ReducedRelaxation& rel);
void write_sdpa(const SdpaData& data, std::ostream& out);
void export_sdpa(const ReducedRelaxation& rel, std::ostream& out);
SdpaData parse_sdpa(std::istream& in);

} // namespace css
