#include "css/cli.hpp"

#include "css/errors.hpp"
#include "css/globalopt.hpp"
#include "css/manifold.hpp"
#include "css/model.hpp"
#include "css/sdprelax.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

namespace css::cli {

namespace {

using ojson = nlohmann::ordered_json;

struct Common {
    std::string model;
    std::vector<std::string> reverse;
    std::optional<double> eps_feas, eps_slack, eps_gap;
    int workers = 1;
    std::uint64_t seed = 0;
    std::string out;
};

struct Range {
    double lo = 0.0, hi = 0.0;
};

Range parse_range(const std::string& s, const char* what) {
    auto colon = s.find(':');
    if (colon == std::string::npos) throw std::invalid_argument(std::string(what) + " must be lo:hi, got '" + s + "'");
    std::istringstream a(s.substr(0, colon)), b(s.substr(colon + 1));
    a.imbue(std::locale::classic());
    b.imbue(std::locale::classic());
    Range r;
    if (!(a >> r.lo) || !(b >> r.hi) || !a.eof() || !b.eof() || !(r.lo <= r.hi))
        throw std::invalid_argument(std::string(what) + " must be lo:hi with lo <= hi, got '" + s + "'");
    return r;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("model", c.model, "model JSON file")->required();
    sub->add_option("--reverse", c.reverse, "reverse reactions: ids or 'all'")->delimiter(',');
    sub->add_option("--eps-feas", c.eps_feas, "relative phase-I feasibility tolerance");
    sub->add_option("--eps-slack", c.eps_slack, "slack tolerance");
    sub->add_option("--eps-gap", c.eps_gap, "branch-and-bound gap tolerance");
    sub->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--out", c.out, "output file (default stdout)");
}

Tolerances tolerances(const Common& c) {
    Tolerances t = Tolerances::from_env();
    auto set = [](double& dst, const std::optional<double>& v, const char* name) {
        if (!v) return;
        if (!(*v > 0) || !std::isfinite(*v)) throw std::invalid_argument(std::string(name) + " must be positive");
        dst = *v;
    };
    set(t.feas_rel, c.eps_feas, "--eps-feas");
    set(t.slack, c.eps_slack, "--eps-slack");
    set(t.gap, c.eps_gap, "--eps-gap");
    return t;
}

BnbOptions bnb_options(const Common& c) {
    BnbOptions o;
    o.tol = tolerances(c);
    o.seed = c.seed;
    o.workers = 1;
    return o;
}

NetworkModel load(const Common& c) {
    NetworkModel m = load_model_file(c.model);
    if (!c.reverse.empty()) {
        std::vector<std::string> ids = c.reverse;
        if (ids.size() == 1 && ids[0] == "all") ids.clear();
        for (const auto& id : ids) {
            bool found = false;
            for (const auto& r : m.reactions) found = found || r.id == id;
            if (!found) throw std::invalid_argument("--reverse: unknown reaction '" + id + "'");
        }
        m = reverse_reactions(m, ids);
    }
    return m;
}

// Writes to --out or the given stream.
template <class F>
void emit(const Common& c, std::ostream& out, F&& body) {
    if (c.out.empty()) {
        body(out);
        return;
    }
    std::ofstream f(c.out, std::ios::binary);
    if (!f) throw IoError("cannot open '" + c.out + "' for writing");
    f.imbue(std::locale::classic());
    body(f);
    if (!f) throw IoError("failed writing '" + c.out + "'");
}

std::string theta_text(double t1, double t2) {
    std::ostringstream s;
    s.imbue(std::locale::classic());
    s.precision(10);
    s << "theta1=" << t1 << ", theta2=" << t2;
    return s.str();
}

} // namespace

std::optional<double> parse_line_spec(const std::string& spec) {
    static const std::regex re(
        R"(^\s*theta2\s*=\s*(?:([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*\*\s*)?theta1\s*$)");
    std::smatch m;
    if (!std::regex_match(spec, m, re)) return std::nullopt;
    if (!m[1].matched) return 1.0;
    std::istringstream s(m[1].str());
    s.imbue(std::locale::classic());
    double v = 0.0;
    s >> v;
    return v;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Constant-composition feasibility analysis of reaction networks"};
    app.require_subcommand(1);
    Common c;

    auto* check = app.add_subcommand("check", "validate a model and print its constraint summary");
    add_common(check, c);

    std::string line;
    std::string t1_range, t2_range;
    int intervals = 80, intervals2 = 0, max_level = 2;
    bool do_certify = false, nlp_all = false;
    auto* sweep = app.add_subcommand("sweep", "phase-I feasibility over a parameter line or box");
    add_common(sweep, c);
    sweep->add_option("--line", line, "parameter line, e.g. theta2=0.1*theta1");
    sweep->add_option("--theta1", t1_range, "theta1 range lo:hi (line default: the linear-relaxation range)");
    sweep->add_option("--theta2", t2_range, "theta2 range lo:hi for a box grid");
    sweep->add_option("--intervals", intervals, "intervals along theta1")->check(CLI::PositiveNumber);
    sweep->add_option("--intervals2", intervals2, "intervals along theta2 (default: --intervals)")
        ->check(CLI::PositiveNumber);
    sweep->add_flag("--certify", do_certify, "attach certificate levels at infeasible points");
    sweep->add_option("--max-level", max_level, "highest relaxation level")->check(CLI::Range(1, 4));
    sweep->add_flag("--nlp-everywhere", nlp_all, "also run the NLP where the linear relaxation is infeasible");

    double theta1 = 1.0, theta2 = 0.0;
    auto add_theta = [&](CLI::App* sub) {
        sub->add_option("--theta1", theta1, "theta1")->required();
        sub->add_option("--theta2", theta2, "theta2")->required();
    };
    auto* certify = app.add_subcommand("certify", "search for an infeasibility certificate at one point");
    add_common(certify, c);
    add_theta(certify);
    certify->add_option("--max-level", max_level, "highest relaxation level")->check(CLI::Range(1, 4));

    std::vector<std::string> targets;
    long max_nodes = 20000;
    auto* bounds = app.add_subcommand("bounds", "certified bounds on log-concentrations and reaction energies");
    add_common(bounds, c);
    add_theta(bounds);
    bounds->add_option("--targets", targets, "metabolite or reaction ids (default all)")->delimiter(',');
    bounds->add_option("--max-nodes", max_nodes, "node budget per bound")->check(CLI::PositiveNumber);

    int n_traj = 1000;
    std::string method = "projection";
    double t_max = 1e3, w_reg = 1e-3;
    std::string traj_out;
    auto* sample = app.add_subcommand("sample", "line-measure statistics from random trajectories");
    add_common(sample, c);
    add_theta(sample);
    sample->add_option("--n-traj", n_traj, "number of trajectories")->check(CLI::PositiveNumber);
    sample->add_option("--method", method, "projection or geodesic")
        ->check(CLI::IsMember({"projection", "geodesic"}));
    sample->add_option("--t-max", t_max, "trajectory parameter limit")->check(CLI::PositiveNumber);
    sample->add_option("--w-reg", w_reg, "interior-point regularization weight")->check(CLI::NonNegativeNumber);
    sample->add_option("--trajectories", traj_out, "write trajectory samples as CSV");

    int level = 1;
    bool full = false;
    auto* sdpa = app.add_subcommand("export-sdpa", "write the certificate SDP in sparse SDPA format");
    add_common(sdpa, c);
    add_theta(sdpa);
    sdpa->add_option("--level", level, "relaxation level d")->check(CLI::Range(1, 4));
    sdpa->add_flag("--full", full, "skip the sparsity reduction");

    std::vector<std::string> argv_store{"css"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? ok : usage_error;
    }

    std::string command = app.get_subcommands().front()->get_name();
    std::string where;
    try {
        NetworkModel model = load(c);
        ConstraintSystem cs = assemble(model);

        if (command == "check") {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(cs.A);
            ojson j;
            j["model"] = c.model;
            j["metabolites"] = cs.n();
            j["reactions"] = cs.m();
            j["rank_A"] = lu.rank();
            j["kappa"] = std::vector<double>(cs.kappa.data(), cs.kappa.data() + cs.kappa.size());
            emit(c, out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
            return ok;
        }

        if (command == "sweep") {
            Grid grid;
            if (!line.empty()) {
                auto slope = parse_line_spec(line);
                if (!slope) throw std::invalid_argument("--line must look like theta2=c*theta1, got '" + line + "'");
                if (!t2_range.empty()) throw std::invalid_argument("--line and --theta2 are exclusive");
                Range r;
                if (t1_range.empty()) {
                    where = "linear relaxation range, " + line;
                    auto lin = theta_lin_line(cs, *slope);
                    if (!lin) throw InfeasibleError("the linear relaxation is empty along " + line);
                    r = {lin->first, lin->second};
                } else {
                    r = parse_range(t1_range, "--theta1");
                }
                grid = Grid::line(*slope, r.lo, r.hi, intervals);
            } else {
                if (t1_range.empty() || t2_range.empty())
                    throw std::invalid_argument("sweep needs --line or both --theta1 and --theta2 ranges");
                Range a = parse_range(t1_range, "--theta1"), b = parse_range(t2_range, "--theta2");
                grid = Grid::box(a.lo, a.hi, intervals, b.lo, b.hi, intervals2 > 0 ? intervals2 : intervals);
            }
            SweepOptions so;
            so.bnb = bnb_options(c);
            so.workers = c.workers;
            so.certify = do_certify;
            so.certify_max_level = max_level;
            so.nlp_on_lin_infeasible = nlp_all;
            where.clear();
            FeasibilityMap map = feasibility_sweep(cs, grid, so);
            emit(c, out, [&](std::ostream& o) { map.write_csv(o); });
            for (const auto& r : map.records)
                if (!r.error.empty()) {
                    err << "css sweep: " << theta_text(r.theta.theta1, r.theta.theta2) << ": " << r.error << '\n';
                    return numeric_failure;
                }
            return ok;
        }

        where = theta_text(theta1, theta2);
        const ParameterPoint theta{theta1, theta2};

        if (command == "certify") {
            CertificateResult r = certify_infeasible(cs, theta, max_level);
            ojson j;
            j["theta1"] = theta1;
            j["theta2"] = theta2;
            j["status"] = to_string(r.status);
            j["level"] = r.level;
            j["max_violation"] = r.max_violation;
            j["min_eigenvalue"] = r.min_eigenvalue;
            if (!r.message.empty()) j["message"] = r.message;
            emit(c, out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
            return r.status == CertificateStatus::solver_failure ? numeric_failure : ok;
        }

        if (command == "bounds") {
            BnbOptions bo = bnb_options(c);
            bo.max_nodes = max_nodes;
            std::vector<BoundTarget> list;
            auto lookup = [&](const std::string& id) {
                for (int i = 0; i < cs.n(); ++i)
                    if (cs.metabolite_ids[i] == id) return BoundTarget{BoundTarget::metabolite, i};
                for (int j = 0; j < cs.m(); ++j)
                    if (cs.reaction_ids[j] == id) return BoundTarget{BoundTarget::reaction, j};
                throw std::invalid_argument("--targets: unknown id '" + id + "'");
            };
            if (targets.empty()) {
                for (int i = 0; i < cs.n(); ++i) list.push_back({BoundTarget::metabolite, i});
                for (int j = 0; j < cs.m(); ++j) list.push_back({BoundTarget::reaction, j});
            } else {
                for (const auto& id : targets) list.push_back(lookup(id));
            }
            const double ctc = cs.total_concentration(theta);
            ojson j;
            j["theta1"] = theta1;
            j["theta2"] = theta2;
            j["metabolites"] = ojson::array();
            j["reactions"] = ojson::array();
            for (const auto& t : list) {
                BoundInterval b = global_bounds(cs, theta, t, bo);
                if (t.kind == BoundTarget::metabolite) {
                    j["metabolites"].push_back({{"id", cs.metabolite_ids[t.index]},
                                                {"y_lower", b.lower},
                                                {"y_upper", b.upper},
                                                {"conc_lower", ctc * std::exp(b.lower)},
                                                {"conc_upper", ctc * std::exp(b.upper)},
                                                {"open_gap", b.open_gap}});
                } else {
                    j["reactions"].push_back({{"id", cs.reaction_ids[t.index]},
                                              {"drG_lower", b.lower},
                                              {"drG_upper", b.upper},
                                              {"open_gap", b.open_gap}});
                }
            }
            emit(c, out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
            return ok;
        }

        if (command == "sample") {
            SampleOptions so;
            so.n_traj = n_traj;
            so.method = parse_sample_method(method);
            so.seed = c.seed;
            so.workers = c.workers;
            so.w_reg = w_reg;
            so.trajectory.t_max = t_max;
            so.keep_trajectories = !traj_out.empty();
            CssStatistics st = sample_statistics(cs, theta, so);
            emit(c, out, [&](std::ostream& o) { st.write_json(o); });
            if (!traj_out.empty()) {
                std::ofstream f(traj_out, std::ios::binary);
                if (!f) throw IoError("cannot open '" + traj_out + "' for writing");
                write_trajectories_csv(st.paths, f);
            }
            return ok;
        }

        if (command == "export-sdpa") {
            SdpRelaxation rel = build_relaxation(cs, theta, level);
            ReducedRelaxation red = full ? unreduced(rel) : sparsity_reduce(rel);
            emit(c, out, [&](std::ostream& o) { export_sdpa(red, o); });
            return ok;
        }
    } catch (const ParseError& e) {
        err << "css " << command << ": " << e.what() << '\n';
        return usage_error;
    } catch (const ValidationError& e) {
        err << "css " << command << ": " << e.what() << '\n';
        return usage_error;
    } catch (const IoError& e) {
        err << "css " << command << ": " << e.what() << '\n';
        return usage_error;
    } catch (const Error& e) {
        err << "css " << command << (where.empty() ? "" : " (" + where + ")") << ": " << e.what() << '\n';
        return numeric_failure;
    } catch (const std::invalid_argument& e) {
        err << "css " << command << ": " << e.what() << '\n';
        return usage_error;
    } catch (const std::out_of_range& e) {
        err << "css " << command << ": " << e.what() << '\n';
        return usage_error;
    } catch (const std::exception& e) {
        err << "css " << command << (where.empty() ? "" : " (" + where + ")") << ": " << e.what() << '\n';
        return numeric_failure;
    }
    return usage_error;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

} // namespace css::cli
