#ifndef RDC_NETWORK_HPP
#define RDC_NETWORK_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rdc/contracts.hpp"
#include "rdc/matrix.hpp"

namespace rdc {

using NodeId = std::size_t;

struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class Causality { strict, nonstrict };
enum class EdgeFilter { all, nsc_only };

inline const char* to_string(Causality c) { return c == Causality::strict ? "strict" : "nonstrict"; }

class NetworkError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Plain directed graph with named nodes. Self-loops and parallel edges are rejected.
class Digraph {
public:
    Digraph() = default;

    Digraph(std::vector<std::string> names, std::vector<Edge> edges) : names_(std::move(names)), edges_(std::move(edges)) {
        std::set<Edge> seen;
        in_.resize(names_.size());
        out_.resize(names_.size());
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            const Edge& ed = edges_[e];
            if (ed.src >= names_.size() || ed.dst >= names_.size()) {
                throw NetworkError("edge endpoint out of range");
            }
            if (ed.src == ed.dst) {
                throw NetworkError("self-loop on node '" + names_[ed.src] + "'");
            }
            if (!seen.insert(ed).second) {
                throw NetworkError("duplicate edge " + names_[ed.src] + "->" + names_[ed.dst]);
            }
            out_[ed.src].push_back(e);
            in_[ed.dst].push_back(e);
        }
        // Deterministic neighbour order: by the other endpoint's index.
        for (auto& list : out_) {
            std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) { return edges_[a].dst < edges_[b].dst; });
        }
        for (auto& list : in_) {
            std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) { return edges_[a].src < edges_[b].src; });
        }
    }

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(NodeId i) const { return names_.at(i); }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<std::size_t>& out_edges(NodeId i) const { return out_[i]; }
    const std::vector<std::size_t>& in_edges(NodeId i) const { return in_[i]; }

    std::optional<NodeId> find(const std::string& name) const {
        auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end()) {
            return std::nullopt;
        }
        return static_cast<NodeId>(it - names_.begin());
    }

    std::optional<std::size_t> edge_index(NodeId src, NodeId dst) const {
        for (std::size_t e : out_[src]) {
            if (edges_[e].dst == dst) {
                return e;
            }
        }
        return std::nullopt;
    }

private:
    std::vector<std::string> names_;
    std::vector<Edge> edges_;
    std::vector<std::vector<std::size_t>> in_;
    std::vector<std::vector<std::size_t>> out_;
};

/// Per-edge mask selecting the edges a traversal may use; empty mask means all edges.
using EdgeMask = std::vector<bool>;

struct TopoResult {
    std::vector<NodeId> order;  // position -> node, valid when cycle is empty
    std::vector<Edge> cycle;    // certificate: consecutive edges closing a cycle

    bool ok() const { return cycle.empty(); }
};

/// Depth-first topological ordering with index-ordered tie-breaking.
inline TopoResult topological_order(const Digraph& g, const EdgeMask& mask = {}) {
    const std::size_t n = g.size();
    enum : std::uint8_t { white, grey, black };
    std::vector<std::uint8_t> colour(n, white);
    std::vector<NodeId> post;
    post.reserve(n);
    std::vector<std::size_t> parent_edge(n, SIZE_MAX);
    auto usable = [&](std::size_t e) { return mask.empty() || mask[e]; };

    TopoResult result;
    struct Frame {
        NodeId node;
        std::size_t next;
    };
    for (NodeId root = 0; root < n && result.cycle.empty(); ++root) {
        if (colour[root] != white) {
            continue;
        }
        std::vector<Frame> stack{{root, 0}};
        colour[root] = grey;
        while (!stack.empty() && result.cycle.empty()) {
            Frame& f = stack.back();
            const auto& outs = g.out_edges(f.node);
            if (f.next == outs.size()) {
                colour[f.node] = black;
                post.push_back(f.node);
                stack.pop_back();
                continue;
            }
            std::size_t e = outs[f.next++];
            if (!usable(e)) {
                continue;
            }
            NodeId v = g.edges()[e].dst;
            if (colour[v] == grey) {
                // Back edge: walk parents from f.node up to v.
                std::vector<Edge> cyc{g.edges()[e]};
                NodeId u = f.node;
                while (u != v) {
                    const Edge& pe = g.edges()[parent_edge[u]];
                    cyc.push_back(pe);
                    u = pe.src;
                }
                std::reverse(cyc.begin(), cyc.end());
                // Rotate so the certificate starts at the smallest source index.
                auto first = std::min_element(cyc.begin(), cyc.end(),
                                              [](const Edge& a, const Edge& b) { return a.src < b.src; });
                std::rotate(cyc.begin(), first, cyc.end());
                result.cycle = std::move(cyc);
            } else if (colour[v] == white) {
                colour[v] = grey;
                parent_edge[v] = e;
                stack.push_back({v, 0});
            }
        }
    }
    if (result.cycle.empty()) {
        result.order.assign(post.rbegin(), post.rend());
    }
    return result;
}

/// Every edge goes from an earlier to a later position; `order` must be a permutation.
inline bool is_valid_topological_order(const Digraph& g, const std::vector<NodeId>& order, const EdgeMask& mask = {}) {
    if (order.size() != g.size()) {
        return false;
    }
    std::vector<std::size_t> pos(g.size(), SIZE_MAX);
    for (std::size_t p = 0; p < order.size(); ++p) {
        if (order[p] >= g.size() || pos[order[p]] != SIZE_MAX) {
            return false;
        }
        pos[order[p]] = p;
    }
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        if (!mask.empty() && !mask[e]) {
            continue;
        }
        if (pos[g.edges()[e].src] >= pos[g.edges()[e].dst]) {
            return false;
        }
    }
    return true;
}

/// Exact number of topological orderings (0 for cyclic graphs). Exponential in node count.
inline std::uint64_t count_topological_orders(const Digraph& g, std::size_t max_nodes = 12) {
    const std::size_t n = g.size();
    if (n > max_nodes) {
        throw NetworkError("count_topological_orders: " + std::to_string(n) + " nodes exceeds bound " +
                           std::to_string(max_nodes));
    }
    if (n >= 63) {
        throw NetworkError("count_topological_orders: graph too large");
    }
    std::vector<std::uint64_t> preds(n, 0);
    for (const Edge& e : g.edges()) {
        preds[e.dst] |= std::uint64_t{1} << e.src;
    }
    // ways[S]: orderings of the node set S as a prefix.
    std::vector<std::uint64_t> ways(std::size_t{1} << n, 0);
    ways[0] = 1;
    for (std::uint64_t s = 0; s < ways.size(); ++s) {
        if (ways[s] == 0) {
            continue;
        }
        for (std::size_t v = 0; v < n; ++v) {
            std::uint64_t bit = std::uint64_t{1} << v;
            if ((s & bit) == 0 && (preds[v] & ~s) == 0) {
                ways[s | bit] += ways[s];
            }
        }
    }
    return ways.back();
}

/// Nodes j with a directed path of length >= 1 from j to i. Contains i itself iff i lies on a cycle.
inline std::set<NodeId> backward_reachable(const Digraph& g, NodeId i, const EdgeMask& mask = {}) {
    std::set<NodeId> seen;
    std::vector<NodeId> frontier{i};
    while (!frontier.empty()) {
        NodeId v = frontier.back();
        frontier.pop_back();
        for (std::size_t e : g.in_edges(v)) {
            if (!mask.empty() && !mask[e]) {
                continue;
            }
            NodeId u = g.edges()[e].src;
            if (seen.insert(u).second) {
                frontier.push_back(u);
            }
        }
    }
    return seen;
}

/// Network node: an identifier bound to its component contract.
struct NetworkNode {
    std::string id;
    LtiRdContract contract;
};

/// One coordinate source for selection-style wiring: an external input coordinate
/// (node empty) or an output coordinate of a node.
struct SourceRef {
    std::optional<NodeId> node;
    std::size_t coord = 0;
};

struct Finding {
    enum class Kind { assumption1, assumption2 };
    Kind kind;
    std::string message;
    std::optional<NodeId> node;
    std::vector<Edge> cycle;
};

/// Interconnection of contract-bearing nodes:
///   d_i(k) = sum_j F_ij y_j(k) + E_i d_ext(k),   y_ext(k) = sum_{i in W} H_i y_i(k).
/// d_ext is the network-wide external input; E_i selects from it.
class Network {
public:
    using CausalityOverrides = std::map<Edge, Causality>;

    Network(std::vector<NetworkNode> nodes, std::vector<Edge> edges, std::size_t n_d_ext, std::size_t n_y_ext,
            std::map<Edge, Matrix> feed, std::vector<Matrix> ext_in, std::vector<Matrix> ext_out,
            std::vector<NodeId> output_set, CausalityOverrides overrides = {})
        : nodes_(std::move(nodes)), n_d_ext_(n_d_ext), n_y_ext_(n_y_ext), feed_(std::move(feed)),
          ext_in_(std::move(ext_in)), ext_out_(std::move(ext_out)) {
        std::vector<std::string> names;
        for (const auto& n : nodes_) {
            names.push_back(n.id);
        }
        std::set<std::string> unique(names.begin(), names.end());
        if (unique.size() != names.size()) {
            throw NetworkError("duplicate node id");
        }
        graph_ = Digraph(std::move(names), std::move(edges));
        in_w_.assign(nodes_.size(), false);
        for (NodeId w : output_set) {
            if (w >= nodes_.size()) {
                throw NetworkError("output set references unknown node");
            }
            in_w_[w] = true;
        }
        validate();
        causality_ = derive();
        for (const auto& [edge, label] : overrides) {
            auto idx = graph_.edge_index(edge.src, edge.dst);
            if (!idx) {
                throw NetworkError("causality override for missing edge " + name(edge.src) + "->" + name(edge.dst));
            }
            if (label == Causality::strict && causality_[*idx] == Causality::nonstrict) {
                throw NetworkError("edge " + name(edge.src) + "->" + name(edge.dst) +
                                   " has direct feedthrough and cannot be declared strict");
            }
            causality_[*idx] = label;
        }
    }

    /// Selection-style wiring: inputs[i][c] names the source of coordinate c of d_i, and
    /// outputs[c] names the source of coordinate c of y_ext. Edges follow from the sources.
    static Network from_sources(std::vector<NetworkNode> nodes, std::size_t n_d_ext,
                                const std::vector<std::vector<SourceRef>>& inputs, const std::vector<SourceRef>& outputs,
                                CausalityOverrides overrides = {}) {
        const std::size_t n = nodes.size();
        if (inputs.size() != n) {
            throw NetworkError("from_sources: one source list per node required");
        }
        std::map<Edge, Matrix> feed;
        std::vector<Matrix> ext_in;
        std::vector<Matrix> ext_out;
        std::set<Edge> edge_set;
        for (NodeId i = 0; i < n; ++i) {
            const auto& c = nodes[i].contract;
            if (inputs[i].size() != c.n_d()) {
                throw NetworkError("from_sources: node '" + nodes[i].id + "' needs " + std::to_string(c.n_d()) +
                                   " input sources");
            }
            Matrix e(c.n_d(), n_d_ext);
            for (std::size_t r = 0; r < inputs[i].size(); ++r) {
                const SourceRef& s = inputs[i][r];
                if (!s.node) {
                    if (s.coord >= n_d_ext) {
                        throw NetworkError("from_sources: external coordinate out of range");
                    }
                    e(r, s.coord) = 1.0;
                    continue;
                }
                NodeId j = *s.node;
                if (j >= n || s.coord >= nodes[j].contract.n_y()) {
                    throw NetworkError("from_sources: output reference out of range");
                }
                Edge ed{j, i};
                auto it = feed.find(ed);
                if (it == feed.end()) {
                    it = feed.emplace(ed, Matrix(c.n_d(), nodes[j].contract.n_y())).first;
                }
                it->second(r, s.coord) = 1.0;
                edge_set.insert(ed);
            }
            ext_in.push_back(std::move(e));
        }
        std::vector<bool> in_w(n, false);
        for (NodeId i = 0; i < n; ++i) {
            ext_out.emplace_back(outputs.size(), nodes[i].contract.n_y());
        }
        for (std::size_t r = 0; r < outputs.size(); ++r) {
            const SourceRef& s = outputs[r];
            if (!s.node || *s.node >= n || s.coord >= nodes[*s.node].contract.n_y()) {
                throw NetworkError("from_sources: external output must reference a node output");
            }
            ext_out[*s.node](r, s.coord) = 1.0;
            in_w[*s.node] = true;
        }
        std::vector<NodeId> w;
        for (NodeId i = 0; i < n; ++i) {
            if (in_w[i]) {
                w.push_back(i);
            }
        }
        return Network(std::move(nodes), std::vector<Edge>(edge_set.begin(), edge_set.end()), n_d_ext, outputs.size(),
                       std::move(feed), std::move(ext_in), std::move(ext_out), std::move(w), std::move(overrides));
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<NetworkNode>& nodes() const { return nodes_; }
    const NetworkNode& node(NodeId i) const { return nodes_.at(i); }
    const std::string& name(NodeId i) const { return nodes_.at(i).id; }
    const LtiRdContract& contract(NodeId i) const { return nodes_.at(i).contract; }
    const Digraph& graph() const { return graph_; }
    std::size_t n_d_ext() const { return n_d_ext_; }
    std::size_t n_y_ext() const { return n_y_ext_; }

    /// F_ij (rows n_{d_i}, cols n_{y_j}); a zero matrix when no wiring is stored.
    Matrix feed(NodeId i, NodeId j) const {
        auto it = feed_.find(Edge{j, i});
        if (it == feed_.end()) {
            return Matrix(contract(i).n_d(), contract(j).n_y());
        }
        return it->second;
    }
    const std::map<Edge, Matrix>& feed_matrices() const { return feed_; }
    const Matrix& ext_in(NodeId i) const { return ext_in_.at(i); }
    const Matrix& ext_out(NodeId i) const { return ext_out_.at(i); }
    bool in_output_set(NodeId i) const { return in_w_.at(i); }

    std::vector<NodeId> output_set() const {
        std::vector<NodeId> w;
        for (NodeId i = 0; i < size(); ++i) {
            if (in_w_[i]) {
                w.push_back(i);
            }
        }
        return w;
    }

    /// Effective labels (derived, then relaxed by user overrides), indexed like graph().edges().
    const std::vector<Causality>& causality() const { return causality_; }

    Causality causality(NodeId src, NodeId dst) const {
        auto idx = graph_.edge_index(src, dst);
        if (!idx) {
            throw NetworkError("no edge " + name(src) + "->" + name(dst));
        }
        return causality_[*idx];
    }

    EdgeMask nsc_mask() const {
        EdgeMask m(causality_.size());
        for (std::size_t e = 0; e < causality_.size(); ++e) {
            m[e] = causality_[e] == Causality::nonstrict;
        }
        return m;
    }

    /// Labels implied by the contracts alone: edge j->i is strict iff Gd0(C_i) F_ij = 0.
    std::vector<Causality> derive() const {
        std::vector<Causality> out;
        out.reserve(graph_.edges().size());
        for (const Edge& e : graph_.edges()) {
            Matrix prod = contract(e.dst).current_input_coefficients() * feed(e.dst, e.src);
            out.push_back(prod.is_zero() ? Causality::strict : Causality::nonstrict);
        }
        return out;
    }

private:
    void validate() const {
        const std::size_t n = nodes_.size();
        if (ext_in_.size() != n || ext_out_.size() != n) {
            throw NetworkError("E and H must have one matrix per node");
        }
        for (const auto& [edge, m] : feed_) {
            if (edge.src >= n || edge.dst >= n) {
                throw NetworkError("wiring references unknown node");
            }
            const auto& dst = contract(edge.dst);
            const auto& src = contract(edge.src);
            if (m.rows() != dst.n_d() || m.cols() != src.n_y()) {
                throw NetworkError("F[" + name(edge.dst) + "][" + name(edge.src) + "] must be " +
                                   std::to_string(dst.n_d()) + "x" + std::to_string(src.n_y()));
            }
            if (!m.is_zero() && !graph_.edge_index(edge.src, edge.dst)) {
                throw NetworkError("F[" + name(edge.dst) + "][" + name(edge.src) + "] is nonzero but edge " +
                                   name(edge.src) + "->" + name(edge.dst) + " is missing");
            }
        }
        for (NodeId i = 0; i < n; ++i) {
            const auto& c = contract(i);
            if (ext_in_[i].rows() != c.n_d() || ext_in_[i].cols() != n_d_ext_) {
                throw NetworkError("E[" + name(i) + "] must be " + std::to_string(c.n_d()) + "x" +
                                   std::to_string(n_d_ext_));
            }
            if (ext_out_[i].rows() != n_y_ext_ || ext_out_[i].cols() != c.n_y()) {
                throw NetworkError("H[" + name(i) + "] must be " + std::to_string(n_y_ext_) + "x" +
                                   std::to_string(c.n_y()));
            }
            if (!ext_out_[i].is_zero() && !in_w_[i]) {
                throw NetworkError("H[" + name(i) + "] is nonzero but node is not in the output set");
            }
            for (std::size_t r = 0; r < c.n_d(); ++r) {
                bool sourced = max_abs(ext_in_[i].row(r)) > 0.0;
                for (std::size_t e : graph_.in_edges(i)) {
                    auto it = feed_.find(graph_.edges()[e]);
                    if (it != feed_.end() && max_abs(it->second.row(r)) > 0.0) {
                        sourced = true;
                    }
                }
                if (!sourced) {
                    throw NetworkError("input coordinate " + std::to_string(r) + " of node '" + name(i) +
                                       "' has no source");
                }
            }
        }
    }

    std::vector<NetworkNode> nodes_;
    Digraph graph_;
    std::size_t n_d_ext_ = 0;
    std::size_t n_y_ext_ = 0;
    std::map<Edge, Matrix> feed_;
    std::vector<Matrix> ext_in_;
    std::vector<Matrix> ext_out_;
    std::vector<bool> in_w_;
    std::vector<Causality> causality_;
};

/// Causality implied by the contracts (strict iff the downstream guarantee has no
/// current-time dependence on the fed coordinates).
inline std::vector<Causality> derive_edge_causality(const Network& net) { return net.derive(); }

inline TopoResult topological_order(const Network& net) { return topological_order(net.graph()); }

inline std::set<NodeId> backward_reachable(const Network& net, NodeId i, EdgeFilter filter) {
    if (filter == EdgeFilter::all) {
        return backward_reachable(net.graph(), i);
    }
    return backward_reachable(net.graph(), i, net.nsc_mask());
}

/// BR(i) together with i itself.
inline std::set<NodeId> backward_reachable_plus(const Network& net, NodeId i, EdgeFilter filter) {
    auto s = backward_reachable(net, i, filter);
    s.insert(i);
    return s;
}

/// Structural checks: algebraic loops (cycles of non-strict edges) and, conservatively,
/// nodes outside the output set whose assumptions read their own output while they
/// receive external input.
inline std::vector<Finding> check_assumptions(const Network& net) {
    std::vector<Finding> findings;
    TopoResult nsc = topological_order(net.graph(), net.nsc_mask());
    if (!nsc.ok()) {
        std::string msg = "algebraic loop through non-strictly-causal edges:";
        for (const Edge& e : nsc.cycle) {
            msg += " " + net.name(e.src) + "->" + net.name(e.dst);
        }
        findings.push_back({Finding::Kind::assumption2, msg, std::nullopt, nsc.cycle});
    }
    for (NodeId i = 0; i < net.size(); ++i) {
        if (net.in_output_set(i)) {
            continue;
        }
        if (net.contract(i).assumptions_read_output() && !net.ext_in(i).is_zero()) {
            findings.push_back({Finding::Kind::assumption1,
                                "node '" + net.name(i) +
                                    "' has output-dependent assumptions and external input but is not an output node",
                                i,
                                {}});
        }
    }
    return findings;
}

}  // namespace rdc

#endif
