#include "css/errors.hpp"
#include "css/model.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace css;
using test_support::random_model;
using test_support::toy;

namespace {

const char* kMinimal = R"({
  "metabolites": [{"id": "X", "z": 0, "beta": 0.1, "phi": 1.0}],
  "reactions": [],
  "environment": {"RT": 2478.957, "Cref": 1.0, "Cs": 0.3, "Bcap": 0.03}
})";

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Delta_r G' from concentrations c_i = x_i Cs / theta1 in units of Cref.
double energy_oracle(const NetworkModel& m, const ParameterPoint& th, const Eigen::VectorXd& y, int j) {
    const auto& r = m.reactions[j];
    double g = -m.env.RT * std::log(r.kprime);
    double lnc = std::log(m.env.Cs / (th.theta1 * m.env.Cref));
    for (const auto& [id, c] : r.stoich) g += m.env.RT * c * (y(m.metabolite_index(id)) + lnc);
    return g;
}

} // namespace

TEST_CASE("toy document loads with six metabolites and two reactions") {
    NetworkModel m = toy();
    CHECK(m.n() == 6);
    CHECK(m.m() == 2);
    CHECK(m.reactions[0].kprime == doctest::Approx(2.2e4));
    CHECK(m.reactions[1].kprime == doctest::Approx(1.22));
}

TEST_CASE("single metabolite without reactions loads") {
    NetworkModel m = load_model(kMinimal);
    CHECK(m.n() == 1);
    CHECK(m.m() == 0);
}

TEST_CASE("load errors") {
    SUBCASE("malformed json") { CHECK_THROWS_AS(load_model("{\"metabolites\": ["), ParseError); }
    SUBCASE("undeclared metabolite in stoich") {
        std::string doc = R"({"metabolites": [{"id": "X"}], "reactions": [{"id": "R", "stoich": {"Y": 1}, "Kprime": 1}],
                              "environment": {"RT": 1, "Cref": 1, "Cs": 1, "Bcap": 0}})";
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
    SUBCASE("non-positive Kprime") {
        std::string doc = R"({"metabolites": [{"id": "X"}], "reactions": [{"id": "R", "stoich": {"X": 1}, "Kprime": 0}],
                              "environment": {"RT": 1, "Cref": 1, "Cs": 1, "Bcap": 0}})";
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
    SUBCASE("unknown key") {
        std::string doc = R"({"metabolites": [{"id": "X", "charge": 1}], "reactions": [],
                              "environment": {"RT": 1, "Cref": 1, "Cs": 1, "Bcap": 0}})";
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
    SUBCASE("Kprime and drG0 disagree") {
        std::string doc = R"({"metabolites": [{"id": "X"}], "reactions": [{"id": "R", "stoich": {"X": 1}, "Kprime": 2, "drG0": 0}],
                              "environment": {"RT": 1, "Cref": 1, "Cs": 1, "Bcap": 0}})";
        CHECK_THROWS_AS(load_model(doc), ValidationError);
    }
    SUBCASE("Kprime and drG0 agree") {
        double g = -std::log(2.0);
        std::string doc = R"({"metabolites": [{"id": "X"}], "reactions": [{"id": "R", "stoich": {"X": 1}, "Kprime": 2, "drG0": )" +
                          std::to_string(g) + R"(}], "environment": {"RT": 1, "Cref": 1, "Cs": 1, "Bcap": 0}})";
        // std::to_string keeps 6 decimals, well inside 1e-6 relative on K'
        CHECK_NOTHROW(load_model(doc));
    }
    SUBCASE("Cs from osmotic pressure pair") {
        std::string doc = R"({"metabolites": [{"id": "X"}], "reactions": [],
                              "environment": {"RT": 2, "Cref": 1, "dPi": 1.0, "Ct0": 0.2, "Bcap": 0}})";
        CHECK(load_model(doc).env.Cs == doctest::Approx(0.3));
    }
}

TEST_CASE("assemble the toy model") {
    ConstraintSystem cs = assemble(toy());
    REQUIRE(cs.A.rows() == 4);
    REQUIRE(cs.A.cols() == 6);
    for (int i = 0; i < 6; ++i) CHECK(cs.A(3, i) == 1.0);
    CHECK(cs.A(0, 0) == -1.0);
    CHECK(cs.A(1, 2) == doctest::Approx(1.254));
    CHECK(cs.A(2, 4) == doctest::Approx(0.0547));
    // A + B -> C + D has nu = 0
    CHECK(cs.nu(0) == 0.0);
    CHECK(cs.kappa(0) == doctest::Approx(std::log(2.2e4)).epsilon(1e-14));
    Eigen::Vector4d r = cs.rhs({1.2, 0.5});
    CHECK(r(0) == 0.0);
    CHECK(r(1) == doctest::Approx(1.2));
    CHECK(r(2) == doctest::Approx(0.5));
    CHECK(r(3) == 1.0);
}

TEST_CASE("rank deficiency is rejected") {
    NetworkModel m = toy();
    for (auto& met : m.metabolites) {
        met.z = 0;
        met.beta = 1.0;
    }
    CHECK_THROWS_AS(assemble(m), RankError);
    CHECK_THROWS_AS(assemble(load_model(kMinimal)), RankError);
}

TEST_CASE("kappa recomputation on random models") {
    std::mt19937_64 rng(11);
    int checked = 0;
    for (int rep = 0; rep < 20; ++rep) {
        NetworkModel m = random_model(8, 5, rng);
        ConstraintSystem cs;
        try {
            cs = assemble(m);
        } catch (const RankError&) {
            continue;
        }
        for (int j = 0; j < m.m(); ++j) {
            double nu = 0;
            for (const auto& sc : m.reactions[j].stoich) nu += sc.second;
            CHECK(cs.nu(j) == nu);
            double expect = m.reactions[j].kprime * std::pow(m.env.Cref / m.env.Cs, nu);
            CHECK(rel_diff(std::exp(cs.kappa(j)), expect) < 1e-12);
        }
        ++checked;
    }
    CHECK(checked > 10);
}

TEST_CASE("thermo polynomials") {
    ConstraintSystem cs = assemble(toy());
    SUBCASE("unit concentration ratio gives K'' = K'") {
        auto polys = thermo_polynomials(cs, {0.3, 0.03});
        REQUIRE(polys.size() == 2);
        CHECK(polys[0].kpp == doctest::Approx(2.2e4));
        CHECK(polys[0].reactant == std::vector<int>{1, 1, 0, 0, 0, 0});
        CHECK(polys[0].product == std::vector<int>{0, 0, 1, 1, 0, 0});
    }
    SUBCASE("nu = 0 makes K'' independent of theta1") {
        CHECK(thermo_polynomials(cs, {0.7, 0.1})[0].kpp == doctest::Approx(2.2e4));
        CHECK(thermo_polynomials(cs, {3.1, 0.1})[0].kpp == doctest::Approx(2.2e4));
    }
    SUBCASE("overflow") {
        NetworkModel m = toy();
        m.reactions.push_back({"R3", {{"A", -1}, {"C", 1}, {"D", 1}, {"E", 1}}, 1e300, std::nullopt});
        ConstraintSystem c3 = assemble(m);
        CHECK_NOTHROW(thermo_polynomials(c3, {0.3, 0.0}));
        CHECK_THROWS_AS(thermo_polynomials(c3, {3e9, 0.0}), OverflowError);
    }
    SUBCASE("value matches term-by-term evaluation on random models") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> ux(0.01, 1.0);
        for (int rep = 0; rep < 10; ++rep) {
            NetworkModel m = random_model(8, 4, rng);
            ConstraintSystem c;
            try {
                c = assemble(m);
            } catch (const RankError&) {
                continue;
            }
            ParameterPoint th{0.8, 0.2};
            auto polys = thermo_polynomials(c, th);
            Eigen::VectorXd x(8);
            for (int i = 0; i < 8; ++i) x(i) = ux(rng);
            for (int j = 0; j < m.m(); ++j) {
                double nu = 0, lhs_r = 1, lhs_p = 1;
                for (const auto& [id, s] : m.reactions[j].stoich) {
                    nu += s;
                    double xi = x(m.metabolite_index(id));
                    if (s < 0) lhs_r *= std::pow(xi, -s);
                    else lhs_p *= std::pow(xi, s);
                }
                double kpp = m.reactions[j].kprime * std::pow(m.env.Cref * th.theta1 / m.env.Cs, nu);
                double expect = kpp * lhs_r - lhs_p;
                CHECK(std::abs(polys[j].value(x) - expect) <= 1e-12 * std::max(1.0, kpp * lhs_r + lhs_p));
            }
        }
    }
}

TEST_CASE("residuals") {
    ConstraintSystem cs = assemble(toy());
    ParameterPoint th{1.0, 0.1};
    SUBCASE("zero equality residual at a point built on the affine set") {
        // x = x0 + null-space step with x0 solving A x0 = rhs
        Eigen::VectorXd rhs = cs.rhs(th);
        Eigen::VectorXd x0 = cs.A.completeOrthogonalDecomposition().solve(rhs);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(cs.A);
        Eigen::MatrixXd N = lu.kernel();
        // any point of the affine set with positive entries; scan along the kernel
        Eigen::VectorXd x;
        std::mt19937_64 rng(3);
        std::normal_distribution<double> g;
        for (int k = 0; k < 10000; ++k) {
            Eigen::VectorXd c(N.cols());
            for (int i = 0; i < c.size(); ++i) c(i) = 0.3 * g(rng);
            Eigen::VectorXd cand = x0 + N * c;
            if ((cand.array() > 0).all()) {
                x = cand;
                break;
            }
        }
        REQUIRE(x.size() == 6);
        Residuals r = residuals(cs, th, x.array().log().matrix());
        CHECK(r.equality.lpNorm<Eigen::Infinity>() < 1e-12);
    }
    SUBCASE("slack and sign formulas") {
        Eigen::VectorXd y(6);
        y << -1.0, -2.0, -0.5, -3.0, -1.5, -0.7;
        Residuals r = residuals(cs, th, y);
        Eigen::VectorXd St_y = cs.S.transpose() * y;
        for (int j = 0; j < 2; ++j)
            CHECK(r.inequality(j) == doctest::Approx(cs.kappa(j) + cs.nu(j) * std::log(th.theta1) - St_y(j)));
        CHECK((r.sign + y).norm() == 0.0);
        Eigen::VectorXd eq = cs.A * y.array().exp().matrix() - cs.rhs(th);
        CHECK((r.equality - eq).norm() < 1e-15);
    }
    SUBCASE("doubling theta1 shifts slack j by nu_j ln 2") {
        NetworkModel m = toy();
        m.reactions.push_back({"R3", {{"A", -1}, {"C", 1}, {"E", 1}}, 3.0, std::nullopt});
        ConstraintSystem c3 = assemble(m);
        Eigen::VectorXd y = Eigen::VectorXd::Constant(6, -1.3);
        Residuals a = residuals(c3, {0.9, 0.1}, y), b = residuals(c3, {1.8, 0.1}, y);
        for (int j = 0; j < 3; ++j) CHECK(b.inequality(j) - a.inequality(j) == doctest::Approx(c3.nu(j) * std::log(2.0)));
        CHECK(c3.nu(2) == 1.0);
    }
}

TEST_CASE("reaction energy") {
    NetworkModel m = toy();
    ConstraintSystem cs = assemble(m);
    ParameterPoint th{1.01, 0.101};
    SUBCASE("zero at equilibrium") {
        Eigen::VectorXd y = Eigen::VectorXd::Constant(6, -2.0);
        for (int j = 0; j < 2; ++j) {
            Eigen::VectorXd ye = y;
            // product C (j = 0) or E (j = 1) absorbs the slack
            ye(j == 0 ? 2 : 4) += residuals(cs, th, y).inequality(j);
            CHECK(std::abs(reaction_energy(cs, th, ye, j)) <= 1e-9 * m.env.RT);
        }
    }
    SUBCASE("matches the concentration formula and agrees in sign with the slack") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> u(-12.0, 0.0);
        int disagreements = 0;
        for (int k = 0; k < 10000; ++k) {
            Eigen::VectorXd y(6);
            for (int i = 0; i < 6; ++i) y(i) = u(rng);
            Residuals r = residuals(cs, th, y);
            for (int j = 0; j < 2; ++j) {
                double g = reaction_energy(cs, th, y, j);
                if (std::abs(g - energy_oracle(m, th, y, j)) > 1e-9 * m.env.RT) ++disagreements;
                if ((g <= 0) != (r.inequality(j) >= 0)) ++disagreements;
            }
        }
        CHECK(disagreements == 0);
    }
    SUBCASE("out of range index") { CHECK_THROWS(reaction_energy(cs, th, Eigen::VectorXd::Zero(6), 2)); }
}

TEST_CASE("slack sign matches the polynomial form") {
    ConstraintSystem cs = assemble(toy());
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-10.0, 0.0);
    int mismatches = 0;
    for (double t1 : {0.95, 1.0, 1.05}) {
        ParameterPoint th{t1, 0.1 * t1};
        auto polys = thermo_polynomials(cs, th);
        for (int k = 0; k < 2000; ++k) {
            Eigen::VectorXd y(6);
            for (int i = 0; i < 6; ++i) y(i) = u(rng);
            Eigen::VectorXd x = y.array().exp();
            Residuals r = residuals(cs, th, y);
            for (int j = 0; j < 2; ++j) {
                double scale = std::max(polys[j].kpp, 1.0);
                double p = polys[j].value(x) / scale;
                if (std::abs(p) <= 1e-10) continue;
                if ((p >= 0) != (r.inequality(j) >= 0)) ++mismatches;
            }
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("serialize round trip") {
    std::mt19937_64 rng(29);
    std::vector<NetworkModel> corpus{toy(), test_support::glycolysis()};
    for (int k = 0; k < 5; ++k) corpus.push_back(random_model(8, 4, rng));
    for (const auto& m : corpus) {
        ConstraintSystem a, b;
        try {
            a = assemble(m);
        } catch (const RankError&) {
            continue;
        }
        b = assemble(load_model(serialize_model(m)));
        CHECK(a.A == b.A);
        CHECK(a.w == b.w);
        CHECK(a.F == b.F);
        CHECK(Eigen::MatrixXd(a.S) == Eigen::MatrixXd(b.S));
        CHECK(a.kappa == b.kappa);
        CHECK(a.nu == b.nu);
        CHECK(a.metabolite_ids == b.metabolite_ids);
        CHECK(a.reaction_ids == b.reaction_ids);
    }
}

TEST_CASE("reversing a reaction negates its column and inverts K'") {
    NetworkModel m = toy();
    ConstraintSystem a = assemble(m), b = assemble(reverse_reactions(m, {"R2"}));
    CHECK(Eigen::MatrixXd(b.S).col(1) == -Eigen::MatrixXd(a.S).col(1));
    CHECK(Eigen::MatrixXd(b.S).col(0) == Eigen::MatrixXd(a.S).col(0));
    CHECK(b.kappa(1) == doctest::Approx(-a.kappa(1)));
    CHECK_THROWS_AS(reverse_reactions(m, {"nope"}), ValidationError);
}
