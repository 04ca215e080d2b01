#ifndef RDC_IO_HPP
#define RDC_IO_HPP

// JSON problem files, reports and trajectories.

#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rdc/contracts.hpp"
#include "rdc/network.hpp"
#include "rdc/platoon.hpp"
#include "rdc/verification.hpp"

namespace rdc {

using Json = nlohmann::json;

/// Schema violation located by a JSON pointer.
class SchemaError : public std::invalid_argument {
public:
    SchemaError(const std::string& pointer, const std::string& what)
        : std::invalid_argument((pointer.empty() ? "/" : pointer) + ": " + what), pointer_(pointer.empty() ? "/" : pointer) {}
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

namespace io_detail {

inline std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

// A JSON value together with its pointer, for error messages.
struct Node {
    const Json& j;
    std::string ptr;

    Node at(const std::string& key) const {
        if (!j.is_object()) throw SchemaError(ptr, "expected an object");
        auto it = j.find(key);
        if (it == j.end()) throw SchemaError(ptr + "/" + escape(key), "missing required field");
        return {*it, ptr + "/" + escape(key)};
    }
    std::optional<Node> opt(const std::string& key) const {
        if (!j.is_object()) throw SchemaError(ptr, "expected an object");
        auto it = j.find(key);
        if (it == j.end()) return std::nullopt;
        return Node{*it, ptr + "/" + escape(key)};
    }
    Node at(std::size_t i) const { return {j.at(i), ptr + "/" + std::to_string(i)}; }

    std::size_t size_array() const {
        if (!j.is_array()) throw SchemaError(ptr, "expected an array");
        return j.size();
    }
    double number() const {
        if (!j.is_number()) throw SchemaError(ptr, "expected a number");
        return j.get<double>();
    }
    std::size_t count() const {
        if (!j.is_number_integer() || j.get<long long>() < 0) throw SchemaError(ptr, "expected a nonnegative integer");
        return j.get<std::size_t>();
    }
    int integer() const {
        if (!j.is_number_integer()) throw SchemaError(ptr, "expected an integer");
        return j.get<int>();
    }
    bool boolean() const {
        if (!j.is_boolean()) throw SchemaError(ptr, "expected a boolean");
        return j.get<bool>();
    }
    std::string string() const {
        if (!j.is_string()) throw SchemaError(ptr, "expected a string");
        return j.get<std::string>();
    }
    std::vector<double> vector() const {
        std::vector<double> out;
        for (std::size_t i = 0, n = size_array(); i < n; ++i) out.push_back(at(i).number());
        return out;
    }
    Matrix matrix(std::size_t rows, std::size_t cols) const {
        std::size_t n = size_array();
        if (n != rows) {
            throw SchemaError(ptr, "expected " + std::to_string(rows) + " rows, found " + std::to_string(n));
        }
        Matrix m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            Node row = at(r);
            if (row.size_array() != cols) {
                throw SchemaError(row.ptr, "expected " + std::to_string(cols) + " columns, found " +
                                               std::to_string(row.j.size()));
            }
            for (std::size_t c = 0; c < cols; ++c) m(r, c) = row.at(c).number();
        }
        return m;
    }
};

inline InequalityBlock parse_block(const Node& n, BlockKind kind, std::size_t n_d, std::size_t n_y) {
    InequalityBlock b;
    b.kind = kind;
    b.depth = n.at("depth").integer();
    if (b.depth < 0) throw SchemaError(n.ptr + "/depth", "depth must be nonnegative");
    b.rhs = n.at("rhs").vector();
    std::size_t rows = b.rhs.size();
    b.coeff_d = n.at("coeff_d").matrix(rows, static_cast<std::size_t>(b.depth + 1) * n_d);
    b.coeff_y = n.at("coeff_y").matrix(rows, static_cast<std::size_t>(b.y_slots()) * n_y);
    return b;
}

inline LtiRdContract parse_contract(const Node& n, const std::string& label) {
    std::size_t n_d = n.at("n_d").count();
    std::size_t n_y = n.at("n_y").count();
    if (n_d == 0 || n_y == 0) throw SchemaError(n.ptr, "n_d and n_y must be positive");
    std::vector<InequalityBlock> a, g;
    if (auto blocks = n.opt("assumption_blocks")) {
        for (std::size_t i = 0, k = blocks->size_array(); i < k; ++i) {
            a.push_back(parse_block(blocks->at(i), BlockKind::assumption, n_d, n_y));
        }
    }
    if (auto blocks = n.opt("guarantee_blocks")) {
        for (std::size_t i = 0, k = blocks->size_array(); i < k; ++i) {
            g.push_back(parse_block(blocks->at(i), BlockKind::guarantee, n_d, n_y));
        }
    }
    try {
        return LtiRdContract(n_d, n_y, std::move(a), std::move(g), label);
    } catch (const DimensionError& e) {
        throw SchemaError(n.ptr, e.what());
    }
}

inline Json matrix_json(const Matrix& m) {
    Json out = Json::array();
    for (const auto& row : m.to_rows()) out.push_back(row);
    return out;
}

inline Json block_json(const InequalityBlock& b) {
    return Json{{"depth", b.depth}, {"coeff_d", matrix_json(b.coeff_d)}, {"coeff_y", matrix_json(b.coeff_y)}, {"rhs", b.rhs}};
}

inline Json ext_json(const ExtReal& v) {
    if (v.is_pos_inf()) return "+inf";
    if (v.is_neg_inf()) return "-inf";
    return v.value();
}

}  // namespace io_detail

inline Json contract_to_json(const LtiRdContract& c) {
    Json a = Json::array(), g = Json::array();
    for (const auto& b : c.assumptions()) a.push_back(io_detail::block_json(b));
    for (const auto& b : c.guarantees()) g.push_back(io_detail::block_json(b));
    return Json{{"n_d", c.n_d()}, {"n_y", c.n_y()}, {"assumption_blocks", a}, {"guarantee_blocks", g}};
}

inline LtiRdContract contract_from_json(const Json& j, const std::string& label = {}) {
    return io_detail::parse_contract({j, ""}, label);
}

inline BuilderMode parse_mode(const std::string& s, const std::string& ptr = "/options/mode") {
    if (s == "general") return BuilderMode::general;
    if (s == "cascade") return BuilderMode::cascade;
    if (s == "two_system_feedback") return BuilderMode::two_system_feedback;
    throw SchemaError(ptr, "unknown mode '" + s + "' (general, cascade, two_system_feedback)");
}

/// Parses a problem document. Errors carry the JSON pointer of the offending value.
inline VerificationProblem problem_from_json(const Json& doc) {
    using io_detail::Node;
    Node root{doc, ""};
    if (!doc.is_object()) throw SchemaError("", "expected an object");

    std::map<std::string, LtiRdContract> contracts;
    Node cs = root.at("contracts");
    if (!cs.j.is_object()) throw SchemaError(cs.ptr, "expected an object");
    for (auto it = cs.j.begin(); it != cs.j.end(); ++it) {
        contracts.emplace(it.key(), io_detail::parse_contract(cs.at(it.key()), it.key()));
    }

    Node net = root.at("network");
    Node nodes_n = net.at("nodes");
    std::vector<NetworkNode> nodes;
    std::map<std::string, NodeId> ids;
    std::vector<std::optional<std::size_t>> local_ext;
    for (std::size_t i = 0, n = nodes_n.size_array(); i < n; ++i) {
        Node nd = nodes_n.at(i);
        std::string id = nd.at("id").string();
        std::string label = nd.at("contract").string();
        auto c = contracts.find(label);
        if (c == contracts.end()) throw SchemaError(nd.ptr + "/contract", "unknown contract '" + label + "'");
        if (!ids.emplace(id, i).second) throw SchemaError(nd.ptr + "/id", "duplicate node id '" + id + "'");
        nodes.push_back({id, c->second});
        auto ext = nd.opt("n_d_ext");
        local_ext.push_back(ext ? std::optional<std::size_t>(ext->count()) : std::nullopt);
    }
    const std::size_t n = nodes.size();
    auto node_ref = [&](const Node& v) {
        std::string id = v.string();
        auto it = ids.find(id);
        if (it == ids.end()) throw SchemaError(v.ptr, "unknown node '" + id + "'");
        return it->second;
    };

    // External inputs: a global dimension, or per-node dimensions stacked in node order.
    bool per_node = std::any_of(local_ext.begin(), local_ext.end(), [](const auto& v) { return v.has_value(); });
    std::vector<std::size_t> ext_offset(n, 0);
    std::size_t n_d_ext = 0;
    if (per_node) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!local_ext[i]) throw SchemaError(nodes_n.at(i).ptr + "/n_d_ext", "required when any node declares it");
            ext_offset[i] = n_d_ext;
            n_d_ext += *local_ext[i];
        }
        if (auto g = net.opt("n_d_ext"); g && g->count() != n_d_ext) {
            throw SchemaError(g->ptr, "must equal the sum of the per-node n_d_ext values");
        }
    } else {
        n_d_ext = net.at("n_d_ext").count();
    }

    Network::CausalityOverrides overrides;
    std::set<Edge> edges;
    if (auto es = net.opt("edges")) {
        for (std::size_t k = 0, m = es->size_array(); k < m; ++k) {
            Node e = es->at(k);
            Edge ed{node_ref(e.at("src")), node_ref(e.at("dst"))};
            if (ed.src == ed.dst) throw SchemaError(e.ptr, "self-loop");
            if (!edges.insert(ed).second) throw SchemaError(e.ptr, "duplicate edge");
            if (auto c = e.opt("causality")) {
                std::string s = c->string();
                if (s != "strict" && s != "nonstrict") throw SchemaError(c->ptr, "expected \"strict\" or \"nonstrict\"");
                overrides[ed] = s == "strict" ? Causality::strict : Causality::nonstrict;
            }
        }
    }

    std::vector<NodeId> w;
    if (auto ws = net.opt("output_set")) {
        for (std::size_t k = 0, m = ws->size_array(); k < m; ++k) w.push_back(node_ref(ws->at(k)));
    }

    Node wiring = net.at("wiring");
    std::optional<Network> network;
    try {
        if (auto stack = wiring.opt("stack")) {
            // Sources: {"node": id, "coord": c} or {"ext": c}.
            auto source = [&](const Node& s) {
                if (auto e = s.opt("ext")) return SourceRef{std::nullopt, e->count()};
                return SourceRef{node_ref(s.at("node")), s.at("coord").count()};
            };
            Node ins = stack->at("inputs");
            std::vector<std::vector<SourceRef>> inputs(n);
            for (std::size_t i = 0; i < n; ++i) {
                Node list = ins.at(nodes[i].id);
                for (std::size_t k = 0, m = list.size_array(); k < m; ++k) {
                    SourceRef s = source(list.at(k));
                    if (!s.node) s.coord += ext_offset[i];
                    inputs[i].push_back(s);
                }
            }
            std::vector<SourceRef> outputs;
            if (auto outs = stack->opt("outputs")) {
                for (std::size_t k = 0, m = outs->size_array(); k < m; ++k) outputs.push_back(source(outs->at(k)));
            }
            network = Network::from_sources(std::move(nodes), n_d_ext, inputs, outputs, overrides);
        } else {
            std::size_t n_y_ext = net.at("n_y_ext").count();
            std::map<Edge, Matrix> feed;
            if (auto fs = wiring.opt("F")) {
                for (std::size_t k = 0, m = fs->size_array(); k < m; ++k) {
                    Node f = fs->at(k);
                    Edge ed{node_ref(f.at("src")), node_ref(f.at("dst"))};
                    Matrix mat = f.at("matrix").matrix(nodes[ed.dst].contract.n_d(), nodes[ed.src].contract.n_y());
                    if (!mat.is_zero()) edges.insert(ed);
                    feed[ed] = std::move(mat);
                }
            }
            std::vector<Matrix> ext_in, ext_out;
            std::optional<Node> es = wiring.opt("E"), hs = wiring.opt("H");
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t nd = nodes[i].contract.n_d(), ny = nodes[i].contract.n_y();
                Matrix e(nd, n_d_ext);
                if (es && es->j.contains(nodes[i].id)) {
                    std::size_t width = per_node ? *local_ext[i] : n_d_ext;
                    Matrix local = es->at(nodes[i].id).matrix(nd, width);
                    for (std::size_t r = 0; r < nd; ++r)
                        for (std::size_t c = 0; c < width; ++c) e(r, ext_offset[i] + c) = local(r, c);
                }
                ext_in.push_back(std::move(e));
                ext_out.push_back(hs && hs->j.contains(nodes[i].id) ? hs->at(nodes[i].id).matrix(n_y_ext, ny)
                                                                     : Matrix(n_y_ext, ny));
            }
            network = Network(std::move(nodes), std::vector<Edge>(edges.begin(), edges.end()), n_d_ext, n_y_ext,
                              std::move(feed), std::move(ext_in), std::move(ext_out), w, overrides);
        }
    } catch (const NetworkError& e) {
        throw SchemaError(net.ptr, e.what());
    } catch (const DimensionError& e) {
        throw SchemaError(net.ptr, e.what());
    }

    Node ct = root.at("c_tot");
    LtiRdContract c_tot;
    if (ct.j.is_string()) {
        auto it = contracts.find(ct.string());
        if (it == contracts.end()) throw SchemaError(ct.ptr, "unknown contract '" + ct.string() + "'");
        c_tot = it->second;
    } else {
        c_tot = io_detail::parse_contract(ct, "c_tot");
    }

    VerificationOptions opts;
    if (auto o = root.opt("options")) {
        if (auto v = o->opt("tolerance")) opts.tolerance = v->number();
        if (auto v = o->opt("mode")) opts.mode = parse_mode(v->string(), v->ptr);
        if (auto v = o->opt("horizon_extension")) {
            opts.horizon_extension = v->integer();
            if (opts.horizon_extension < 0) throw SchemaError(v->ptr, "must be nonnegative");
        }
        if (auto v = o->opt("extendibility_asserted")) opts.extendibility_asserted = v->boolean();
    }
    if (c_tot.n_d() != network->n_d_ext() || c_tot.n_y() != network->n_y_ext()) {
        throw SchemaError(ct.ptr, "c_tot must have n_d = " + std::to_string(network->n_d_ext()) + " and n_y = " +
                                      std::to_string(network->n_y_ext()));
    }
    return VerificationProblem{std::move(*network), std::move(c_tot), opts};
}

/// Canonical form: explicit F/E/H matrices, edges with effective causality, contracts keyed by node.
inline Json problem_to_json(const VerificationProblem& p) {
    const Network& net = p.network;
    Json contracts = Json::object();
    Json nodes = Json::array(), edges = Json::array(), f = Json::array(), e = Json::object(), h = Json::object();
    std::map<std::string, std::string> used;  // label -> node that introduced it
    for (NodeId i = 0; i < net.size(); ++i) {
        const auto& c = net.contract(i);
        std::string label = c.label().empty() ? "C_" + net.name(i) : c.label();
        if (used.count(label) && !(contracts[label] == contract_to_json(c))) label += "@" + net.name(i);
        used[label] = net.name(i);
        contracts[label] = contract_to_json(c);
        nodes.push_back({{"id", net.name(i)}, {"contract", label}});
        e[net.name(i)] = io_detail::matrix_json(net.ext_in(i));
        if (net.in_output_set(i)) h[net.name(i)] = io_detail::matrix_json(net.ext_out(i));
    }
    for (std::size_t k = 0; k < net.graph().edges().size(); ++k) {
        const Edge& ed = net.graph().edges()[k];
        edges.push_back({{"src", net.name(ed.src)}, {"dst", net.name(ed.dst)}, {"causality", to_string(net.causality()[k])}});
        f.push_back({{"src", net.name(ed.src)}, {"dst", net.name(ed.dst)}, {"matrix", io_detail::matrix_json(net.feed(ed.dst, ed.src))}});
    }
    Json w = Json::array();
    for (NodeId i : net.output_set()) w.push_back(net.name(i));
    return Json{{"contracts", contracts},
                {"network",
                 {{"n_d_ext", net.n_d_ext()},
                  {"n_y_ext", net.n_y_ext()},
                  {"nodes", nodes},
                  {"edges", edges},
                  {"wiring", {{"F", f}, {"E", e}, {"H", h}}},
                  {"output_set", w}}},
                {"c_tot", contract_to_json(p.c_tot)},
                {"options",
                 {{"tolerance", p.options.tolerance},
                  {"mode", to_string(p.options.mode)},
                  {"horizon_extension", p.options.horizon_extension},
                  {"extendibility_asserted", p.options.extendibility_asserted}}}};
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw SchemaError("", std::string("malformed JSON: ") + e.what());
    }
}

/// Graph-only document: {"graph": {"nodes": [...], "edges": [{"src", "dst", "causality"?}]}}.
struct LabeledGraph {
    Digraph graph;
    std::vector<std::optional<Causality>> labels;
};

inline LabeledGraph graph_from_json(const Json& doc) {
    using io_detail::Node;
    Node g = Node{doc, ""}.at("graph");
    Node ns = g.at("nodes");
    std::vector<std::string> names;
    std::map<std::string, NodeId> ids;
    for (std::size_t i = 0, n = ns.size_array(); i < n; ++i) {
        names.push_back(ns.at(i).string());
        if (!ids.emplace(names.back(), i).second) throw SchemaError(ns.at(i).ptr, "duplicate node");
    }
    std::vector<Edge> edges;
    std::vector<std::optional<Causality>> labels;
    if (auto es = g.opt("edges")) {
        for (std::size_t k = 0, m = es->size_array(); k < m; ++k) {
            Node e = es->at(k);
            auto ref = [&](const Node& v) {
                auto it = ids.find(v.string());
                if (it == ids.end()) throw SchemaError(v.ptr, "unknown node '" + v.string() + "'");
                return it->second;
            };
            edges.push_back({ref(e.at("src")), ref(e.at("dst"))});
            std::optional<Causality> label;
            if (auto c = e.opt("causality")) {
                std::string s = c->string();
                if (s != "strict" && s != "nonstrict") throw SchemaError(c->ptr, "expected \"strict\" or \"nonstrict\"");
                label = s == "strict" ? Causality::strict : Causality::nonstrict;
            }
            labels.push_back(label);
        }
    }
    try {
        return {Digraph(names, edges), labels};
    } catch (const NetworkError& e) {
        throw SchemaError(g.ptr, e.what());
    }
}

inline Json signal_json(const Signal& s) { return Json(s); }

inline Json witness_to_json(const Network& net, const Witness& w) {
    Json nodes = Json::object();
    for (const auto& [j, d] : w.d) nodes[net.name(j)] = {{"d", signal_json(d)}, {"y", signal_json(w.y.at(j))}};
    const ObjectiveRef& o = w.meta.objective;
    return Json{{"lp_index", w.lp_index},
                {"horizon", w.meta.layout.horizon()},
                {"objective",
                 {{"contract", o.who.system ? "c_tot" : net.name(o.who.node)},
                  {"kind", to_string(o.who.kind)},
                  {"block", o.block},
                  {"row", o.row},
                  {"time", o.time}}},
                {"d_ext", signal_json(w.d_ext)},
                {"y_ext", signal_json(w.y_ext)},
                {"nodes", nodes}};
}

inline const char* rho_status(const ExtReal& v, double tol) {
    if (v.is_neg_inf()) return "vacuous";
    return v.le(tol) ? "pass" : "fail";
}

inline Json report_to_json(const Network& net, const Report& rep) {
    Json results = Json::array();
    for (const RhoResult& r : rep.results) {
        Json entry{{"target", target_label(net, r.target)},
                   {"rho", io_detail::ext_json(r.value)},
                   {"status", rho_status(r.value, rep.tolerance)},
                   {"lp_count", r.lp_count},
                   {"solve_ms", r.solve_ms},
                   {"avg_vars", r.stats.avg_vars},
                   {"avg_constraints", r.stats.avg_constraints},
                   {"simplex_iterations", r.stats.iterations}};
        if (r.witness) entry["witness"] = witness_to_json(net, *r.witness);
        results.push_back(entry);
    }
    Json warnings = Json::array();
    for (const Finding& f : rep.warnings) warnings.push_back(f.message);
    double vars = 0.0, cons = 0.0;
    std::size_t lps = 0;
    for (const RhoResult& r : rep.results) {
        vars += r.stats.avg_vars * static_cast<double>(r.lp_count);
        cons += r.stats.avg_constraints * static_cast<double>(r.lp_count);
        lps += r.lp_count;
    }
    return Json{{"verdict", rep.verdict},
                {"tolerance", rep.tolerance},
                {"mode", to_string(rep.mode)},
                {"extendibility_asserted", rep.extendibility_asserted},
                {"total_ms", rep.total_ms},
                {"lp_groups", rep.results.size()},
                {"lp_stats", {{"lp_total", lps}, {"avg_vars", lps ? vars / lps : 0.0}, {"avg_constraints", lps ? cons / lps : 0.0}}},
                {"results", results},
                {"warnings", warnings}};
}

inline Json trajectory_to_json(const Trajectory& tr, const GuaranteeCheck& check) {
    Json vehicles = Json::array();
    for (int r = 0; r < tr.M; ++r) {
        vehicles.push_back({{"vehicle", r + 1}, {"p", tr.p[r]}, {"v", tr.v[r]}, {"u", tr.u[r]}, {"omega", tr.omega[r]}});
    }
    Json guar{{"ok", check.ok}};
    if (check.first) {
        guar["first_violation"] = {{"step", check.first->step}, {"vehicle", check.first->vehicle}, {"row", check.first->row},
                                   {"residual", check.first->residual}};
    }
    Json out{{"M", tr.M}, {"steps", tr.steps}, {"seed", tr.seed}, {"rng", tr.rng}, {"infeasible_count", tr.infeasible_count},
             {"guarantees", guar}, {"vehicles", vehicles}};
    if (tr.first_infeasible) out["first_infeasible"] = {{"step", tr.first_infeasible->first}, {"vehicle", tr.first_infeasible->second}};
    return out;
}

/// Leader profile: [{"duration": s, "target_speed_kmh": x, "max_slew": m/s^2}, ...].
inline LeaderProfile leader_profile_from_json(const Json& doc) {
    using io_detail::Node;
    Node root{doc, ""};
    LeaderProfile prof;
    for (std::size_t i = 0, n = root.size_array(); i < n; ++i) {
        Node s = root.at(i);
        LeaderSegment seg;
        seg.duration = s.at("duration").number();
        seg.target_speed = kmh_to_ms(s.at("target_speed_kmh").number());
        seg.max_slew = s.at("max_slew").number();
        prof.push_back(seg);
    }
    return prof;
}

}  // namespace rdc

#endif
