#include "css/errors.hpp"
#include "css/ode.hpp"

#include <doctest.h>

#include <cmath>

using namespace css;

TEST_CASE("exponential decay") {
    OdeRhs f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = -y; };
    Eigen::VectorXd y0 = Eigen::VectorXd::Constant(1, 1.0);
    Eigen::VectorXd y = integrate(f, 0.0, y0, 5.0);
    CHECK(y(0) == doctest::Approx(std::exp(-5.0)).epsilon(1e-7));
}

TEST_CASE("harmonic oscillator with dense output") {
    OdeRhs f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        dy.resize(2);
        dy << y(1), -y(0);
    };
    Dopri5 ode(f);
    Eigen::VectorXd y0(2);
    y0 << 0.0, 1.0;
    ode.reset(0.0, y0);
    double worst = 0.0;
    while (ode.t() < 10.0) {
        REQUIRE(ode.step(10.0));
        for (int k = 1; k <= 4; ++k) {
            double t = ode.t_prev() + (ode.t() - ode.t_prev()) * k / 4.0;
            Eigen::VectorXd d = ode.dense(t);
            worst = std::max({worst, std::abs(d(0) - std::sin(t)), std::abs(d(1) - std::cos(t))});
        }
    }
    CHECK(ode.t() == 10.0);
    CHECK(std::abs(ode.y()(0) - std::sin(10.0)) < 1e-7);
    CHECK(worst < 1e-7);
    CHECK(ode.steps() > 10);
}

TEST_CASE("tighter tolerances reduce the error") {
    OdeRhs f = [](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = Eigen::VectorXd::Constant(1, std::cos(t) * y(0)); };
    Eigen::VectorXd y0 = Eigen::VectorXd::Constant(1, 1.0);
    double exact = std::exp(std::sin(3.0));
    OdeOptions loose;
    loose.atol = 1e-5;
    loose.rtol = 1e-5;
    OdeOptions tight;
    tight.atol = 1e-11;
    tight.rtol = 1e-11;
    double el = std::abs(integrate(f, 0.0, y0, 3.0, loose)(0) - exact);
    double et = std::abs(integrate(f, 0.0, y0, 3.0, tight)(0) - exact);
    CHECK(et < el);
    CHECK(et < 1e-9);
}

TEST_CASE("blow-up is reported") {
    OdeRhs f = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) { dy = y.array().square(); };
    OdeOptions opt;
    opt.max_steps = 5000;
    CHECK_THROWS_AS(integrate(f, 0.0, Eigen::VectorXd::Constant(1, 1.0), 2.0, opt), NumericError);
}

TEST_CASE("replacing the state restarts from the new value") {
    OdeRhs f = [](double, const Eigen::VectorXd&, Eigen::VectorXd& dy) { dy = Eigen::VectorXd::Constant(1, 1.0); };
    OdeOptions opt;
    opt.h_max = 0.25;
    Dopri5 ode(f, opt);
    ode.reset(0.0, Eigen::VectorXd::Zero(1));
    REQUIRE(ode.step(1.0));
    double t1 = ode.t();
    REQUIRE(t1 < 1.0);
    ode.replace_state(Eigen::VectorXd::Constant(1, 10.0));
    while (ode.t() < 1.0) REQUIRE(ode.step(1.0));
    CHECK(ode.y()(0) == doctest::Approx(11.0 - t1).epsilon(1e-12));
}
