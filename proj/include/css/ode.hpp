#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>

namespace css {

struct OdeOptions {
    double atol = 1e-10;
    double rtol = 1e-8;
    double h_init = 0.0; // 0 selects automatically
    double h_max = std::numeric_limits<double>::infinity();
    long max_steps = 200000;
};

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;

// Dormand-Prince 5(4) with the standard fourth-order continuous extension.
class Dopri5 {
public:
    Dopri5(OdeRhs f, OdeOptions opt = {});

    void reset(double t0, const Eigen::VectorXd& y0);
    // One accepted step, never past t_end. False on step-size underflow,
    // non-finite values or the step budget.
    bool step(double t_end);
    // State at t in [t_prev(), t()] from the last accepted step.
    Eigen::VectorXd dense(double t) const;
    // Overwrite the current state (after a projection); the derivative is recomputed.
    void replace_state(const Eigen::VectorXd& y);

    double t() const { return t_; }
    double t_prev() const { return t_old_; }
    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::VectorXd& dydt() const { return k1_; }
    long steps() const { return accepted_; }
    long rejected() const { return rejected_; }

private:
    double initial_step(double t_end);

    OdeRhs f_;
    OdeOptions opt_;
    double t_ = 0.0, t_old_ = 0.0, h_ = 0.0;
    Eigen::VectorXd y_, k1_;
    Eigen::VectorXd r1_, r2_, r3_, r4_, r5_; // dense output coefficients
    long accepted_ = 0, rejected_ = 0;
};

// Convenience: integrate from t0 to t1 and return y(t1).
Eigen::VectorXd integrate(const OdeRhs& f, double t0, const Eigen::VectorXd& y0, double t1, const OdeOptions& opt = {});

} // namespace css
