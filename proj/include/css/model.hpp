#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace css {

struct Metabolite {
    std::string id;
    int z = 0;
    double beta = 0.0;
    double phi = 1.0;
};

struct Reaction {
    std::string id;
    // metabolite id -> signed coefficient, document order preserved
    std::vector<std::pair<std::string, int>> stoich;
    double kprime = 1.0;
    std::optional<double> drg0;
};

struct Environment {
    double RT = 2478.957;
    double Cref = 1.0;
    double Cs = 0.3;
    double Bcap = 0.03;
};

struct NetworkModel {
    std::vector<Metabolite> metabolites;
    std::vector<Reaction> reactions;
    Environment env;

    int n() const { return static_cast<int>(metabolites.size()); }
    int m() const { return static_cast<int>(reactions.size()); }
    int metabolite_index(std::string_view id) const; // -1 if absent
};

struct ParameterPoint {
    double theta1 = 1.0;
    double theta2 = 0.0;
};

// A exp(y) = b, St y <= h, y <= 0 with St holding one reaction per row.
struct LogLinearSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::MatrixXd St;
    Eigen::VectorXd h;

    int n() const { return static_cast<int>(A.cols()); }
    int l() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(St.rows()); }
};

struct ConstraintSystem {
    Eigen::MatrixXd A; // rows: charge, osmotic, buffer, ones
    Eigen::Vector4d w;
    Eigen::Matrix<double, 4, 2> F;
    Eigen::SparseMatrix<double> S; // n x m
    Eigen::VectorXd kappa;
    Eigen::VectorXd nu;
    Eigen::VectorXd kprime;
    Environment env;
    std::vector<std::string> metabolite_ids;
    std::vector<std::string> reaction_ids;

    int n() const { return static_cast<int>(A.cols()); }
    int m() const { return static_cast<int>(S.cols()); }
    Eigen::Vector4d rhs(const ParameterPoint& theta) const;
    Eigen::VectorXd thermo_bound(const ParameterPoint& theta) const;
    double total_concentration(const ParameterPoint& theta) const;
};

// K'' x^reactant - x^product >= 0
struct ThermoPolynomial {
    double kpp = 1.0;
    std::vector<int> reactant;
    std::vector<int> product;

    double value(const Eigen::VectorXd& x) const;
};

struct Residuals {
    Eigen::VectorXd equality;
    Eigen::VectorXd inequality;
    Eigen::VectorXd sign;
};

NetworkModel load_model(std::string_view source);
NetworkModel load_model_file(const std::string& path);
std::string serialize_model(const NetworkModel& model);

// Negates the listed stoichiometric columns and inverts their K'.
// An empty list or the single entry "all" reverses every reaction.
NetworkModel reverse_reactions(const NetworkModel& model, const std::vector<std::string>& ids);

ConstraintSystem assemble(const NetworkModel& model);
LogLinearSystem evaluate(const ConstraintSystem& cs, const ParameterPoint& theta);

std::vector<ThermoPolynomial> thermo_polynomials(const ConstraintSystem& cs, const ParameterPoint& theta);

Residuals residuals(const ConstraintSystem& cs, const ParameterPoint& theta, const Eigen::VectorXd& y);
Residuals residuals(const LogLinearSystem& sys, const Eigen::VectorXd& y);

// Transformed reaction Gibbs energy in J/mol, j is zero-based.
double reaction_energy(const ConstraintSystem& cs, const ParameterPoint& theta, const Eigen::VectorXd& y, int j);

} // namespace css
