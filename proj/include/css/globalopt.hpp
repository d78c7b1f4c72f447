#pragma once

#include "css/bnb.hpp"
#include "css/model.hpp"
#include "css/sdprelax.hpp"
#include "css/simplex.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace css {

struct Tolerances {
    double feas_rel = 1e-8; // eps_feas = feas_rel * ||w + F theta||_2
    double slack = 1e-10;
    double gap = 1e-6;

    double eps_feas(const Eigen::VectorXd& rhs) const { return feas_rel * rhs.norm(); }
    // CSS_EPS_FEAS, CSS_EPS_SLACK, CSS_EPS_GAP; non-positive or malformed values are rejected
    static Tolerances from_env();
};

// min ||x'||_1 s.t. A x + x'+ - x'- = rhs, x >= 0
struct LpResult {
    double objective = 0.0;
    Eigen::VectorXd x;
    LpStatus status = LpStatus::infeasible_numeric;
    int iterations = 0;
    bool used_bland = false;
};

LpResult phase1_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs);
LpResult phase1_lp(const ConstraintSystem& cs, const ParameterPoint& theta);

enum class NlpStatus { feasible, infeasible, undetermined };
const char* to_string(NlpStatus s);

struct BnbOptions {
    Tolerances tol;
    long max_nodes = 20000;
    int workers = 1;
    std::uint64_t seed = 0;
    int starts = 5;
    double y_floor = -27.631021115928547; // ln 1e-12
    // decide from the linear relaxation alone when it is already infeasible
    bool lin_shortcut = true;
};

struct NlpResult {
    NlpStatus status = NlpStatus::undetermined;
    double objective = kInf; // best ||A exp y - b||_2 found
    Eigen::VectorXd y;
    double lower_bound = 0.0;
    double eps_feas = 0.0;
    long nodes = 0;
    bool short_circuit = false; // decided by the linear relaxation alone
    std::vector<double> lower_history;
    std::vector<double> upper_history;
};

// Initial y-box: ln of LP bounds on x over {A x = b, x >= 0}, floored.
// nullopt when that polytope is empty.
std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> initial_box(const LogLinearSystem& sys, double y_floor);

NlpResult phase1_nlp(const LogLinearSystem& sys, const BnbOptions& opt = {});
NlpResult phase1_nlp(const ConstraintSystem& cs, const ParameterPoint& theta, const BnbOptions& opt = {});

// ---- parameter sweeps ----

struct Grid {
    bool is_line = true;
    double slope = 0.0; // line: theta2 = slope * theta1
    double t1_lo = 1.0, t1_hi = 1.0;
    double t2_lo = 0.0, t2_hi = 0.0;
    int intervals1 = 1;
    int intervals2 = 1;

    static Grid line(double slope, double t1_lo, double t1_hi, int intervals);
    static Grid box(double t1_lo, double t1_hi, int intervals1, double t2_lo, double t2_hi, int intervals2);
    // line points by increasing theta1; box points with theta1 fastest
    std::vector<ParameterPoint> points() const;
};

// [min, max] of theta1 over Theta_lin restricted to theta2 = slope * theta1
std::optional<std::pair<double, double>> theta_lin_line(const ConstraintSystem& cs, double slope);

enum class PointStatus { lin_infeasible, infeasible, feasible, undetermined };
const char* to_string(PointStatus s);

struct SweepOptions {
    BnbOptions bnb;
    int workers = 1;
    bool certify = false;
    int certify_max_level = 2;
    RelaxationOptions relax;
    // also run the NLP where the linear relaxation is infeasible
    bool nlp_on_lin_infeasible = false;
};

struct PointRecord {
    ParameterPoint theta;
    LpResult lin;
    bool lin_feasible = false;
    std::optional<NlpResult> nlp;
    PointStatus status = PointStatus::undetermined;
    std::optional<int> certificate_level;
    std::string error;
};

struct FeasibilityMap {
    Grid grid;
    std::vector<PointRecord> records;

    // lin infeasible implies nlp infeasible wherever the nlp ran
    bool consistent() const;
    void write_csv(std::ostream& out) const;
};

FeasibilityMap feasibility_sweep(const ConstraintSystem& cs, const Grid& grid, const SweepOptions& opt = {});

// ---- global bounds ----

struct BoundTarget {
    enum Kind { metabolite, reaction } kind = metabolite;
    int index = 0;
};

struct BoundInterval {
    double lower = -kInf;    // certified: no feasible point lies below
    double upper = kInf;     // certified: no feasible point lies above
    double lower_attained = kInf;  // best feasible value found for the min
    double upper_attained = -kInf; // best feasible value found for the max
    bool open_gap = false;
    long nodes = 0;
};

// y_i for metabolites, Delta_r G'_j (J/mol) for reactions
BoundInterval global_bounds(const ConstraintSystem& cs, const ParameterPoint& theta, const BoundTarget& target,
                            const BnbOptions& opt = {});
// min / max of c'y over {A exp y = b, St y <= h, y <= 0}
BoundInterval global_bounds(const LogLinearSystem& sys, const Eigen::VectorXd& c, const BnbOptions& opt = {});

} // namespace css
