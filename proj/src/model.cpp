#include "css/model.hpp"
#include "css/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace css {

using ojson = nlohmann::ordered_json;

namespace {

void reject_unknown(const ojson& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ValidationError(where + ": unknown key '" + it.key() + "'");
}

double number_field(const ojson& obj, const char* key, const std::string& where) {
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ValidationError(where + "." + key + ": expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(where + "." + key + ": not finite");
    return d;
}

Metabolite parse_metabolite(const ojson& j, size_t k) {
    std::string where = "metabolites[" + std::to_string(k) + "]";
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    reject_unknown(j, {"id", "z", "beta", "phi"}, where);
    if (!j.contains("id") || !j["id"].is_string()) throw ValidationError(where + ".id: missing or not a string");
    Metabolite m;
    m.id = j["id"].get<std::string>();
    if (m.id.empty()) throw ValidationError(where + ".id: empty");
    if (j.contains("z")) {
        if (!j["z"].is_number_integer()) throw ValidationError(where + ".z: expected an integer");
        m.z = j["z"].get<int>();
    }
    if (j.contains("beta")) m.beta = number_field(j, "beta", where);
    if (j.contains("phi")) m.phi = number_field(j, "phi", where);
    if (m.beta < 0) throw ValidationError(where + ".beta: negative buffer intensity");
    return m;
}

Reaction parse_reaction(const ojson& j, size_t k, double RT) {
    std::string where = "reactions[" + std::to_string(k) + "]";
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    reject_unknown(j, {"id", "stoich", "Kprime", "drG0"}, where);
    if (!j.contains("id") || !j["id"].is_string()) throw ValidationError(where + ".id: missing or not a string");
    Reaction r;
    r.id = j["id"].get<std::string>();
    if (!j.contains("stoich") || !j["stoich"].is_object() || j["stoich"].empty())
        throw ValidationError(where + ".stoich: missing or empty");
    for (auto it = j["stoich"].begin(); it != j["stoich"].end(); ++it) {
        if (!it.value().is_number_integer())
            throw ValidationError(where + ".stoich." + it.key() + ": expected an integer");
        int c = it.value().get<int>();
        if (c == 0) throw ValidationError(where + ".stoich." + it.key() + ": zero coefficient");
        r.stoich.emplace_back(it.key(), c);
    }
    bool hasK = j.contains("Kprime"), hasG = j.contains("drG0");
    if (!hasK && !hasG) throw ValidationError(where + ": needs Kprime or drG0");
    if (hasG) r.drg0 = number_field(j, "drG0", where);
    if (hasK) {
        r.kprime = number_field(j, "Kprime", where);
        if (!(r.kprime > 0)) throw ValidationError(where + ".Kprime: must be positive");
        if (hasG) {
            double k2 = std::exp(-*r.drg0 / RT);
            if (std::abs(k2 - r.kprime) > 1e-6 * r.kprime)
                throw ValidationError(where + ": Kprime and drG0 disagree");
        }
    } else {
        r.kprime = std::exp(-*r.drg0 / RT);
        if (!(r.kprime > 0) || !std::isfinite(r.kprime))
            throw ValidationError(where + ".drG0: equilibrium constant not representable");
    }
    return r;
}

Environment parse_environment(const ojson& j) {
    if (!j.is_object()) throw ValidationError("environment: expected an object");
    reject_unknown(j, {"RT", "Cref", "Cs", "Bcap", "dPi", "Ct0"}, "environment");
    Environment e;
    for (const char* key : {"RT", "Cref", "Bcap"})
        if (!j.contains(key)) throw ValidationError(std::string("environment.") + key + ": missing");
    e.RT = number_field(j, "RT", "environment");
    e.Cref = number_field(j, "Cref", "environment");
    e.Bcap = number_field(j, "Bcap", "environment");
    if (j.contains("Cs")) {
        if (j.contains("dPi") || j.contains("Ct0")) throw ValidationError("environment: give Cs or (dPi, Ct0), not both");
        e.Cs = number_field(j, "Cs", "environment");
    } else {
        if (!j.contains("dPi") || !j.contains("Ct0")) throw ValidationError("environment.Cs: missing");
        e.Cs = number_field(j, "dPi", "environment") / e.RT - number_field(j, "Ct0", "environment");
    }
    if (!(e.RT > 0)) throw ValidationError("environment.RT: must be positive");
    if (!(e.Cref > 0)) throw ValidationError("environment.Cref: must be positive");
    if (!(e.Cs > 0)) throw ValidationError("environment.Cs: must be positive");
    if (e.Bcap < 0) throw ValidationError("environment.Bcap: negative");
    return e;
}

} // namespace

int NetworkModel::metabolite_index(std::string_view id) const {
    for (size_t i = 0; i < metabolites.size(); ++i)
        if (metabolites[i].id == id) return static_cast<int>(i);
    return -1;
}

NetworkModel load_model(std::string_view source) {
    ojson doc;
    try {
        doc = ojson::parse(source.begin(), source.end());
    } catch (const ojson::parse_error& e) {
        throw ParseError(std::string("model document: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("model document: top level must be an object");
    reject_unknown(doc, {"metabolites", "reactions", "environment"}, "model");
    for (const char* key : {"metabolites", "reactions", "environment"})
        if (!doc.contains(key)) throw ValidationError(std::string("model: missing '") + key + "'");
    if (!doc["metabolites"].is_array()) throw ValidationError("metabolites: expected an array");
    if (!doc["reactions"].is_array()) throw ValidationError("reactions: expected an array");

    NetworkModel model;
    try {
        model.env = parse_environment(doc["environment"]);
        std::set<std::string> seen;
        for (size_t k = 0; k < doc["metabolites"].size(); ++k) {
            model.metabolites.push_back(parse_metabolite(doc["metabolites"][k], k));
            if (!seen.insert(model.metabolites.back().id).second)
                throw ValidationError("metabolites[" + std::to_string(k) + "].id: duplicate '" + model.metabolites.back().id + "'");
        }
        if (model.metabolites.empty()) throw ValidationError("metabolites: at least one metabolite required");
        std::set<std::string> rseen;
        for (size_t k = 0; k < doc["reactions"].size(); ++k) {
            Reaction r = parse_reaction(doc["reactions"][k], k, model.env.RT);
            if (!rseen.insert(r.id).second) throw ValidationError("reactions[" + std::to_string(k) + "].id: duplicate '" + r.id + "'");
            for (const auto& [id, c] : r.stoich)
                if (model.metabolite_index(id) < 0)
                    throw ValidationError("reactions[" + std::to_string(k) + "].stoich: unknown metabolite '" + id + "'");
            model.reactions.push_back(std::move(r));
        }
    } catch (const ojson::exception& e) {
        throw ValidationError(std::string("model document: ") + e.what());
    }
    return model;
}

NetworkModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

std::string serialize_model(const NetworkModel& model) {
    ojson doc;
    doc["metabolites"] = ojson::array();
    for (const auto& m : model.metabolites)
        doc["metabolites"].push_back({{"id", m.id}, {"z", m.z}, {"beta", m.beta}, {"phi", m.phi}});
    doc["reactions"] = ojson::array();
    for (const auto& r : model.reactions) {
        ojson st = ojson::object();
        for (const auto& [id, c] : r.stoich) st[id] = c;
        ojson rj = {{"id", r.id}, {"stoich", st}, {"Kprime", r.kprime}};
        doc["reactions"].push_back(rj);
    }
    doc["environment"] = {{"RT", model.env.RT}, {"Cref", model.env.Cref}, {"Cs", model.env.Cs}, {"Bcap", model.env.Bcap}};
    return doc.dump(2);
}

NetworkModel reverse_reactions(const NetworkModel& model, const std::vector<std::string>& ids) {
    bool all = ids.empty() || (ids.size() == 1 && ids[0] == "all");
    NetworkModel out = model;
    std::set<std::string> wanted(ids.begin(), ids.end());
    for (const auto& id : ids) {
        if (all) break;
        bool found = false;
        for (const auto& r : model.reactions) found = found || r.id == id;
        if (!found) throw ValidationError("reverse: unknown reaction '" + id + "'");
    }
    for (auto& r : out.reactions) {
        if (!all && !wanted.count(r.id)) continue;
        for (auto& [id, c] : r.stoich) c = -c;
        r.kprime = 1.0 / r.kprime;
        if (r.drg0) r.drg0 = -*r.drg0;
    }
    return out;
}

Eigen::Vector4d ConstraintSystem::rhs(const ParameterPoint& theta) const {
    return w + F * Eigen::Vector2d(theta.theta1, theta.theta2);
}

Eigen::VectorXd ConstraintSystem::thermo_bound(const ParameterPoint& theta) const {
    return kappa + nu * std::log(theta.theta1);
}

double ConstraintSystem::total_concentration(const ParameterPoint& theta) const {
    return env.Cs / theta.theta1;
}

ConstraintSystem assemble(const NetworkModel& model) {
    const int n = model.n(), m = model.m();
    ConstraintSystem cs;
    cs.env = model.env;
    cs.A.resize(4, n);
    for (int i = 0; i < n; ++i) {
        const auto& met = model.metabolites[i];
        cs.A(0, i) = met.z;
        cs.A(1, i) = met.phi;
        cs.A(2, i) = met.beta;
        cs.A(3, i) = 1.0;
        cs.metabolite_ids.push_back(met.id);
    }
    if (n <= 4) throw RankError("constraint system needs more metabolites than the 4 linear rows (n = " + std::to_string(n) + ")");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(cs.A);
    if (qr.rank() < 4) throw RankError("linear constraint matrix has rank " + std::to_string(qr.rank()) + " < 4");
    cs.w << 0, 0, 0, 1;
    cs.F.setZero();
    cs.F(1, 0) = 1.0;
    cs.F(2, 1) = 1.0;

    std::vector<Eigen::Triplet<double>> trip;
    cs.kappa.resize(m);
    cs.nu.resize(m);
    cs.kprime.resize(m);
    for (int j = 0; j < m; ++j) {
        const auto& r = model.reactions[j];
        int nu = 0;
        for (const auto& [id, c] : r.stoich) {
            trip.emplace_back(model.metabolite_index(id), j, c);
            nu += c;
        }
        cs.nu(j) = nu;
        cs.kprime(j) = r.kprime;
        cs.kappa(j) = std::log(r.kprime) + nu * std::log(model.env.Cref / model.env.Cs);
        cs.reaction_ids.push_back(r.id);
    }
    cs.S.resize(n, m);
    cs.S.setFromTriplets(trip.begin(), trip.end());
    return cs;
}

LogLinearSystem evaluate(const ConstraintSystem& cs, const ParameterPoint& theta) {
    LogLinearSystem sys;
    sys.A = cs.A;
    sys.b = cs.rhs(theta);
    sys.St = Eigen::MatrixXd(cs.S.transpose());
    sys.h = cs.thermo_bound(theta);
    return sys;
}

double ThermoPolynomial::value(const Eigen::VectorXd& x) const {
    double r = kpp, p = 1.0;
    for (size_t i = 0; i < reactant.size(); ++i) {
        if (reactant[i]) r *= std::pow(x(i), reactant[i]);
        if (product[i]) p *= std::pow(x(i), product[i]);
    }
    return r - p;
}

std::vector<ThermoPolynomial> thermo_polynomials(const ConstraintSystem& cs, const ParameterPoint& theta) {
    const int n = cs.n();
    Eigen::MatrixXd S(cs.S);
    std::vector<ThermoPolynomial> out;
    for (int j = 0; j < cs.m(); ++j) {
        ThermoPolynomial t;
        double ratio = cs.env.Cref * theta.theta1 / cs.env.Cs;
        t.kpp = cs.kprime(j) * std::pow(ratio, cs.nu(j));
        if (!std::isfinite(t.kpp) || t.kpp == 0.0)
            throw OverflowError("K'' of reaction '" + cs.reaction_ids[j] + "' not representable");
        t.reactant.assign(n, 0);
        t.product.assign(n, 0);
        for (int i = 0; i < n; ++i) {
            int c = static_cast<int>(S(i, j));
            if (c < 0) t.reactant[i] = -c;
            if (c > 0) t.product[i] = c;
        }
        out.push_back(std::move(t));
    }
    return out;
}

Residuals residuals(const LogLinearSystem& sys, const Eigen::VectorXd& y) {
    Residuals r;
    r.equality = sys.A * y.array().exp().matrix() - sys.b;
    r.inequality = sys.h - sys.St * y;
    r.sign = -y;
    return r;
}

Residuals residuals(const ConstraintSystem& cs, const ParameterPoint& theta, const Eigen::VectorXd& y) {
    return residuals(evaluate(cs, theta), y);
}

double reaction_energy(const ConstraintSystem& cs, const ParameterPoint& theta, const Eigen::VectorXd& y, int j) {
    if (j < 0 || j >= cs.m()) throw std::out_of_range("reaction index out of range");
    const double RT = cs.env.RT;
    const double drg0 = -RT * std::log(cs.kprime(j));
    const double conc_shift = std::log(cs.total_concentration(theta) / cs.env.Cref);
    double lnGamma = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(cs.S, j); it; ++it)
        lnGamma += it.value() * (y(it.row()) + conc_shift);
    return drg0 + RT * lnGamma;
}

} // namespace css
