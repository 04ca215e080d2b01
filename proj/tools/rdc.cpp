// rdc: verify vertical contracts of contract networks, run the platoon case study.
//
// Exit codes: 0 verdict true / check passed, 1 verdict false / check failed,
// 2 input error, 3 solver failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rdc/io.hpp"
#include "rdc/platoon.hpp"
#include "rdc/simplex.hpp"
#include "rdc/verification.hpp"

namespace {

constexpr int kTrue = 0;
constexpr int kFalse = 1;
constexpr int kInputError = 2;
constexpr int kSolverFailure = 3;

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::size_t env_threads() {
    if (const char* s = std::getenv("RDC_THREADS")) {
        try {
            return static_cast<std::size_t>(std::stoul(s));
        } catch (...) {
            throw InputError(std::string("RDC_THREADS must be a nonnegative integer, got '") + s + "'");
        }
    }
    return 0;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out);
    if (!f) throw InputError("cannot write '" + out + "'");
    f << text;
}

std::string format_rho(const rdc::ExtReal& v) {
    if (v.is_pos_inf()) return "+inf";
    if (v.is_neg_inf()) return "-inf";
    std::ostringstream s;
    s << std::setprecision(17) << v.value();
    return s.str();
}

void print_summary(std::ostream& os, const rdc::Network& net, const rdc::Report& rep) {
    os << std::left << std::setw(16) << "target" << std::setw(26) << "rho" << std::setw(9) << "status" << std::setw(6)
       << "LPs" << "time_ms\n";
    for (const auto& r : rep.results) {
        os << std::setw(16) << rdc::target_label(net, r.target) << std::setw(26) << format_rho(r.value) << std::setw(9)
           << rdc::rho_status(r.value, rep.tolerance) << std::setw(6) << r.lp_count << std::fixed << std::setprecision(3)
           << r.solve_ms << std::defaultfloat << "\n";
    }
    os << "verdict: " << (rep.verdict ? "true" : "false") << " (" << rep.results.size() << " LP groups, "
       << std::fixed << std::setprecision(3) << rep.total_ms << std::defaultfloat << " ms)\n";
    if (!rep.extendibility_asserted) os << "note: extendibility of the component contracts was not asserted\n";
    for (const auto& w : rep.warnings) os << "warning: " << w.message << "\n";
}

int run_report(const rdc::VerificationProblem& prob, const std::string& out, bool summary) {
    rdc::Report rep = rdc::verify(prob);
    emit(rdc::report_to_json(prob.network, rep).dump(2) + "\n", out);
    if (summary) print_summary(out.empty() ? std::cerr : std::cout, prob.network, rep);
    return rep.verdict ? kTrue : kFalse;
}

void print_graph_info(const rdc::Digraph& g, const std::vector<std::optional<rdc::Causality>>& labels,
                      bool count_orders, std::size_t max_nodes) {
    auto name_set = [&](const std::set<rdc::NodeId>& s) {
        std::string out = "{";
        for (auto it = s.begin(); it != s.end(); ++it) out += (it == s.begin() ? "" : ", ") + g.name(*it);
        return out + "}";
    };
    std::cout << "nodes: " << g.size() << ", edges: " << g.edges().size() << "\n";
    rdc::TopoResult topo = rdc::topological_order(g);
    if (topo.ok()) {
        std::cout << "topological order:";
        for (rdc::NodeId v : topo.order) std::cout << " " << g.name(v);
        std::cout << "\n";
    } else {
        std::cout << "cycle:";
        for (const auto& e : topo.cycle) std::cout << " " << g.name(e.src) << "->" << g.name(e.dst);
        std::cout << "\n";
    }
    if (count_orders) std::cout << "topological orders: " << rdc::count_topological_orders(g, max_nodes) << "\n";
    std::cout << "edges:\n";
    rdc::EdgeMask nsc(g.edges().size());
    for (std::size_t k = 0; k < g.edges().size(); ++k) {
        const auto& e = g.edges()[k];
        nsc[k] = !(labels[k] && *labels[k] == rdc::Causality::strict);
        std::cout << "  " << g.name(e.src) << " -> " << g.name(e.dst) << "  "
                  << (labels[k] ? rdc::to_string(*labels[k]) : "unlabeled") << "\n";
    }
    rdc::TopoResult nsc_topo = rdc::topological_order(g, nsc);
    if (!nsc_topo.ok()) {
        std::cout << "algebraic loop:";
        for (const auto& e : nsc_topo.cycle) std::cout << " " << g.name(e.src) << "->" << g.name(e.dst);
        std::cout << "\n";
    }
    std::cout << "backward reachable sets:\n";
    for (rdc::NodeId i = 0; i < g.size(); ++i) {
        std::cout << "  BR(" << g.name(i) << ") = " << name_set(rdc::backward_reachable(g, i))
                  << "  BR_nsc(" << g.name(i) << ") = " << name_set(rdc::backward_reachable(g, i, nsc)) << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vertical-contract verification for networks of LTI recursively defined contracts"};
    app.require_subcommand(1);

    std::string file, out, target = "Omega", h_tot_str, leader_file, export_file, mode_str;
    bool summary = false, strict = false, count_orders = false, do_verify = false, do_simulate = false;
    std::size_t threads = 0, max_nodes = 12, lp_index = 0, steps = 300;
    int horizon_ext = -1, M = 0;
    std::uint64_t seed = 1;
    double h_tot = 0.0;

    auto* verify = app.add_subcommand("verify", "verify a problem file");
    verify->add_option("file", file, "problem JSON")->required();
    verify->add_option("--out", out, "write the report here instead of stdout");
    verify->add_flag("--summary", summary, "print a table of results");
    verify->add_flag("--strict", strict, "treat structural warnings as errors");
    verify->add_option("--threads", threads, "worker threads (0: RDC_THREADS or all cores)");
    verify->add_option("--mode", mode_str, "override builder mode: general, cascade, two_system_feedback");
    verify->add_option("--horizon-extension", horizon_ext, "override horizon extension");

    auto* platoon = app.add_subcommand("platoon", "vehicle platoon case study");
    platoon->add_option("--M", M, "number of vehicles (>= 2)")->required();
    auto* g_verify = platoon->add_flag("--verify", do_verify, "verify the vertical contract");
    auto* g_sim = platoon->add_flag("--simulate", do_simulate, "simulate the closed loop");
    auto* g_exp = platoon->add_option("--export", export_file, "write the problem JSON to FILE");
    g_verify->excludes(g_sim)->excludes(g_exp);
    g_sim->excludes(g_exp);
    platoon->add_option("--steps", steps, "simulation steps");
    platoon->add_option("--seed", seed, "noise seed");
    platoon->add_option("--out", out, "output file (report JSON, or trajectory .csv / .json)");
    platoon->add_option("--h-tot", h_tot_str, "headway of the system contract (defaults to the component headway)");
    platoon->add_option("--leader", leader_file, "leader profile JSON");
    platoon->add_flag("--summary", summary, "print a table of results");
    platoon->add_option("--threads", threads, "worker threads");

    auto* graph = app.add_subcommand("graph-info", "topological order, causality and reachability tables");
    graph->add_option("file", file, "problem or graph JSON")->required();
    graph->add_flag("--count-orders", count_orders, "count topological orders (exponential)");
    graph->add_option("--max-nodes", max_nodes, "node bound for --count-orders");

    auto* dump = app.add_subcommand("dump-lp", "print verification LPs in LP format");
    dump->add_option("file", file, "problem JSON")->required();
    dump->add_option("--target", target, "node id or Omega");
    dump->add_option("--index", lp_index, "LP index within the group");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kInputError;
    }

    try {
        if (threads == 0) threads = env_threads();
        if (*verify) {
            rdc::VerificationProblem prob = rdc::problem_from_json(rdc::read_json_file(file));
            prob.options.threads = threads;
            prob.options.strict_assumptions = strict;
            if (!mode_str.empty()) prob.options.mode = rdc::parse_mode(mode_str, "--mode");
            if (horizon_ext >= 0) prob.options.horizon_extension = horizon_ext;
            return run_report(prob, out, summary);
        }
        if (*platoon) {
            rdc::PlatoonParams params;
            params.M = M;
            params.validate();
            std::optional<double> h_override;
            if (!h_tot_str.empty()) {
                try {
                    h_tot = std::stod(h_tot_str);
                } catch (...) {
                    throw InputError("--h-tot expects a number");
                }
                h_override = h_tot;
            }
            if (do_simulate) {
                rdc::LeaderProfile prof = leader_file.empty() ? rdc::default_leader_profile()
                                                              : rdc::leader_profile_from_json(rdc::read_json_file(leader_file));
                rdc::Trajectory tr = rdc::simulate(params, steps, seed, prof);
                rdc::GuaranteeCheck check = rdc::check_trajectory_guarantees(tr, params);
                bool as_json = out.size() >= 5 && out.substr(out.size() - 5) == ".json";
                std::ostringstream data;
                if (as_json) {
                    data << rdc::trajectory_to_json(tr, check).dump(2) << "\n";
                } else {
                    rdc::write_trajectory_csv(data, tr);
                }
                emit(data.str(), out);
                std::ostream& msg = out.empty() ? std::cerr : std::cout;
                msg << "guarantees: " << (check.ok ? "pass" : "fail");
                if (check.first) {
                    msg << " (first violation: step " << check.first->step << ", vehicle " << check.first->vehicle
                        << ", " << check.first->row << ")";
                }
                msg << "; infeasible control steps: " << tr.infeasible_count << "; rng " << tr.rng << " seed " << seed
                    << "\n";
                return check.ok && tr.infeasible_count == 0 ? kTrue : kFalse;
            }
            rdc::VerificationProblem prob = rdc::build_platoon(params, h_override);
            prob.options.threads = threads;
            if (!export_file.empty()) {
                emit(rdc::problem_to_json(prob).dump(2) + "\n", export_file);
                return kTrue;
            }
            if (!do_verify) throw InputError("platoon: choose one of --verify, --simulate, --export");
            return run_report(prob, out, summary);
        }
        if (*graph) {
            rdc::Json doc = rdc::read_json_file(file);
            if (doc.is_object() && doc.contains("graph")) {
                rdc::LabeledGraph lg = rdc::graph_from_json(doc);
                print_graph_info(lg.graph, lg.labels, count_orders, max_nodes);
                return kTrue;
            }
            rdc::VerificationProblem prob = rdc::problem_from_json(doc);
            const rdc::Network& net = prob.network;
            std::vector<std::optional<rdc::Causality>> labels(net.causality().begin(), net.causality().end());
            print_graph_info(net.graph(), labels, count_orders, max_nodes);
            for (const auto& f : rdc::check_assumptions(net)) std::cout << "finding: " << f.message << "\n";
            return kTrue;
        }
        if (*dump) {
            rdc::VerificationProblem prob = rdc::problem_from_json(rdc::read_json_file(file));
            std::vector<rdc::VerificationLp> lps;
            if (target == "Omega") {
                lps = rdc::build_guarantee_lps(prob);
            } else {
                auto id = prob.network.graph().find(target);
                if (!id) throw InputError("unknown target '" + target + "'");
                lps = rdc::build_assumption_lps(prob, *id);
            }
            if (lp_index >= lps.size()) {
                throw InputError("target '" + target + "' has " + std::to_string(lps.size()) + " LPs");
            }
            rdc::write_lp_text(std::cout, lps[lp_index].lp, target + " LP " + std::to_string(lp_index));
            return kTrue;
        }
    } catch (const rdc::NumericalFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
