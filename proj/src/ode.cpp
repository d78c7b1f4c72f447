#include "css/ode.hpp"

#include "css/errors.hpp"

#include <algorithm>
#include <cmath>

namespace css {

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

} // namespace

Dopri5::Dopri5(OdeRhs f, OdeOptions opt) : f_(std::move(f)), opt_(opt) {}

void Dopri5::reset(double t0, const Eigen::VectorXd& y0) {
    t_ = t_old_ = t0;
    y_ = y0;
    k1_.resize(y0.size());
    f_(t_, y_, k1_);
    h_ = 0.0;
    accepted_ = rejected_ = 0;
    r1_ = r2_ = r3_ = r4_ = r5_ = Eigen::VectorXd::Zero(y0.size());
    r1_ = y_;
}

void Dopri5::replace_state(const Eigen::VectorXd& y) {
    y_ = y;
    f_(t_, y_, k1_);
}

double Dopri5::initial_step(double t_end) {
    if (opt_.h_init > 0) return opt_.h_init;
    Eigen::ArrayXd sc = opt_.atol + opt_.rtol * y_.array().abs();
    double d0 = std::sqrt((y_.array() / sc).square().mean());
    double dd1 = std::sqrt((k1_.array() / sc).square().mean());
    double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
    h0 = std::min(h0, std::abs(t_end - t_));
    Eigen::VectorXd y1 = y_ + h0 * k1_, k2(y_.size());
    f_(t_ + h0, y1, k2);
    double d2 = std::sqrt(((k2 - k1_).array() / sc).square().mean()) / h0;
    double h1 = std::max(dd1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(dd1, d2), 0.2);
    return std::min({100 * h0, h1, opt_.h_max});
}

bool Dopri5::step(double t_end) {
    const Eigen::Index n = y_.size();
    if (t_end <= t_) return false;
    if (h_ <= 0) h_ = initial_step(t_end);
    Eigen::VectorXd k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), ynew(n);
    for (int attempt = 0; attempt < 100; ++attempt) {
        if (accepted_ + rejected_ >= opt_.max_steps) return false;
        double h = std::min({h_, opt_.h_max, t_end - t_});
        if (h <= 1e-15 * std::max(1.0, std::abs(t_))) return false;
        yt = y_ + h * a21 * k1_;
        f_(t_ + c2 * h, yt, k2);
        yt = y_ + h * (a31 * k1_ + a32 * k2);
        f_(t_ + c3 * h, yt, k3);
        yt = y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3);
        f_(t_ + c4 * h, yt, k4);
        yt = y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4);
        f_(t_ + c5 * h, yt, k5);
        yt = y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f_(t_ + h, yt, k6);
        ynew = y_ + h * (a71 * k1_ + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        f_(t_ + h, ynew, k7);
        Eigen::VectorXd err = h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        Eigen::ArrayXd sc = opt_.atol + opt_.rtol * y_.array().abs().max(ynew.array().abs());
        double e = n ? std::sqrt((err.array() / sc).square().mean()) : 0.0;
        if (!std::isfinite(e) || !ynew.allFinite()) {
            h_ = 0.25 * h;
            ++rejected_;
            continue;
        }
        if (e <= 1.0) {
            Eigen::VectorXd ydiff = ynew - y_;
            Eigen::VectorXd bspl = h * k1_ - ydiff;
            r1_ = y_;
            r2_ = ydiff;
            r3_ = bspl;
            r4_ = ydiff - h * k7 - bspl;
            r5_ = h * (d1 * k1_ + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            t_old_ = t_;
            t_ = (h == t_end - t_) ? t_end : t_ + h;
            y_ = ynew;
            k1_ = k7;
            ++accepted_;
            double fac = e > 0 ? 0.9 * std::pow(e, -0.2) : 10.0;
            h_ = h * std::clamp(fac, 0.2, 10.0);
            return true;
        }
        ++rejected_;
        h_ = h * std::max(0.2, 0.9 * std::pow(e, -0.2));
    }
    return false;
}

Eigen::VectorXd Dopri5::dense(double t) const {
    double h = t_ - t_old_;
    if (h <= 0) return y_;
    double s = (t - t_old_) / h, s1 = 1.0 - s;
    return r1_ + s * (r2_ + s1 * (r3_ + s * (r4_ + s1 * r5_)));
}

Eigen::VectorXd integrate(const OdeRhs& f, double t0, const Eigen::VectorXd& y0, double t1, const OdeOptions& opt) {
    Dopri5 ode(f, opt);
    ode.reset(t0, y0);
    while (ode.t() < t1)
        if (!ode.step(t1)) throw NumericError("ODE integration failed at t = " + std::to_string(ode.t()));
    return ode.y();
}

} // namespace css
