#pragma once

#include "css/globalopt.hpp"
#include "css/model.hpp"
#include "css/ode.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace css {

// The constant-composition manifold {A exp y = b} with the log-polyhedron
// St y <= h, y <= 0 cut out of it.
struct ManifoldContext {
    LogLinearSystem sys; // as given
    Eigen::MatrixXd Ar;  // independent rows spanning the row space of A
    Eigen::VectorXd br;
    Eigen::MatrixXd N;   // orthonormal basis of ker A, n x (n - rank A)

    explicit ManifoldContext(LogLinearSystem s);
    int dim() const { return static_cast<int>(N.cols()); }
    // thermodynamic slacks h - St y followed by -y
    Eigen::VectorXd slacks(const Eigen::VectorXd& y) const;
    double residual(const Eigen::VectorXd& y) const; // ||A exp y - b||_inf
};

// Concentrations and reaction energies of a parameter point.
struct SamplingSystem {
    ManifoldContext ctx;
    double total_concentration = 1.0; // C_tc = Cs / theta1
    double RT = 1.0;
    Eigen::VectorXd energy_offset; // Delta_r G'_j at y = 0
    std::vector<std::string> metabolite_ids;
    std::vector<std::string> reaction_ids;

    static SamplingSystem from(const ConstraintSystem& cs, const ParameterPoint& theta);
};

// ---- interior point ----

struct InteriorPoint {
    Eigen::VectorXd y;
    double radius = 0.0;    // min over constraints of slack / row norm
    double objective = 0.0; // radius - w ||y||
    long nodes = 0;
};

// max r - w ||y||  s.t.  A exp y = b,  s_j y + r ||s_j|| <= h_j,  y_i + r <= 0.
// InfeasibleError when no point with r > 0 exists.
InteriorPoint interior_point(const LogLinearSystem& sys, double w_reg = 1e-3, const BnbOptions& opt = {});
InteriorPoint interior_point(const ConstraintSystem& cs, const ParameterPoint& theta, double w_reg = 1e-3,
                             const BnbOptions& opt = {});

// ---- directions ----

// Engine seeded from (seed, index) so trajectories are reproducible in any order.
std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index);
// u uniform on [-1, 1]^dim
Eigen::VectorXd draw_coordinates(int dim, std::mt19937_64& rng);
// E^-1 N u: a tangent vector of the manifold at y
Eigen::VectorXd tangent_direction(const ManifoldContext& ctx, const Eigen::VectorXd& y, const Eigen::VectorXd& u);
Eigen::VectorXd tangent_sample(const ManifoldContext& ctx, const Eigen::VectorXd& y, std::mt19937_64& rng);

// ---- trajectories ----

enum class Termination { constraint_hit, reached_t_max, projection_diverged };
const char* to_string(Termination t);

struct TrajectoryOptions {
    double t_max = 1e3;
    OdeOptions ode;
    bool keep_samples = true;
    double event_tol = 1e-9;   // |slack| at a located event
    double drift_tol = 1e-10;  // re-projection threshold on ||A exp y - b||_inf
    double max_cond = 1e12;    // geodesic metric conditioning limit
};

struct Trajectory {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> y;
    std::vector<double> dl; // arc length since the previous sample, first entry 0
    std::vector<Eigen::VectorXd> ydot; // dy/dt at each sample
    Termination termination = Termination::reached_t_max;
    int constraint = -1; // index into ManifoldContext::slacks, -1 if none
    bool thermodynamic = false;
    double length = 0.0;
    double max_residual = 0.0;
    // line integrals of x_i, x_i^2, s_j y, (s_j y)^2 relative to the start point
    Eigen::VectorXd int_x, int_x2, int_g, int_g2;
    // extremes over the recorded samples
    Eigen::VectorXd y_min, y_max, g_min, g_max;
};

// Projection of the start point along y_q + t ubar onto the manifold.
Trajectory projection_trajectory(const ManifoldContext& ctx, const Eigen::VectorXd& y_start, const Eigen::VectorXd& ubar,
                                 const TrajectoryOptions& opt = {});
// Geodesic of the metric induced by dx on the manifold (constant speed in y),
// started along the tangent vector E^-1 N u.
Trajectory geodesic_trajectory(const ManifoldContext& ctx, const Eigen::VectorXd& y_start, const Eigen::VectorXd& u,
                               const TrajectoryOptions& opt = {});

// Exact projection: y + E A' lambda = target, A exp y = b (Newton from y_guess).
std::optional<Eigen::VectorXd> kkt_project(const ManifoldContext& ctx, const Eigen::VectorXd& target,
                                           const Eigen::VectorXd& y_guess, int max_iter = 50);

// chi'' of the geodesic equation in the affine chart x = x0 + N chi
Eigen::VectorXd geodesic_acceleration(const ManifoldContext& ctx, const Eigen::VectorXd& x0, const Eigen::VectorXd& chi,
                                      const Eigen::VectorXd& chidot);
// Same from Christoffel symbols of central-difference metric derivatives.
Eigen::VectorXd geodesic_acceleration_fd(const ManifoldContext& ctx, const Eigen::VectorXd& x0,
                                         const Eigen::VectorXd& chi, const Eigen::VectorXd& chidot, double step = 1e-6);

// ---- statistics ----

enum class SampleMethod { projection, geodesic };
const char* to_string(SampleMethod m);
SampleMethod parse_sample_method(const std::string& s);

struct SampleOptions {
    int n_traj = 1000;
    SampleMethod method = SampleMethod::projection;
    std::uint64_t seed = 0;
    double w_reg = 1e-3;
    int workers = 1;
    TrajectoryOptions trajectory;
    std::optional<Eigen::VectorXd> start; // overrides the interior point
    bool keep_trajectories = false;
};

struct CssStatistics {
    std::vector<std::string> metabolite_ids;
    std::vector<std::string> reaction_ids;
    Eigen::VectorXd mean_conc, std_conc, min_conc, max_conc;
    Eigen::VectorXd mean_drg, std_drg, min_drg, max_drg;
    Eigen::VectorXd start;
    double total_length = 0.0;
    int trajectories = 0;
    int constraint_hits = 0;
    int thermodynamic_hits = 0;
    int reached_t_max = 0;
    int diverged = 0;
    double max_residual = 0.0;
    bool point_mass = false;
    std::vector<Trajectory> paths;

    void write_json(std::ostream& out) const;
};

CssStatistics sample_statistics(const SamplingSystem& ss, const SampleOptions& opt = {});
CssStatistics sample_statistics(const ConstraintSystem& cs, const ParameterPoint& theta, const SampleOptions& opt = {});

// traj_id,t,y_1..y_n,dl
void write_trajectories_csv(const std::vector<Trajectory>& paths, std::ostream& out);

} // namespace css
