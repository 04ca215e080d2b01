#ifndef RDC_VERIFICATION_HPP
#define RDC_VERIFICATION_HPP

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rdc/contracts.hpp"
#include "rdc/network.hpp"
#include "rdc/simplex.hpp"

namespace rdc {

class VerificationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class BuilderMode { general, cascade, two_system_feedback };

inline const char* to_string(BuilderMode m) {
    switch (m) {
        case BuilderMode::general: return "general";
        case BuilderMode::cascade: return "cascade";
        default: return "two_system_feedback";
    }
}

struct VerificationOptions {
    double tolerance = 1e-6;
    BuilderMode mode = BuilderMode::general;
    int horizon_extension = 0;
    bool extendibility_asserted = false;
    bool strict_assumptions = false;  // treat conservative structural warnings as errors
    std::size_t threads = 1;          // 0: hardware concurrency
    SolverOptions solver;
};

struct VerificationProblem {
    Network network;
    LtiRdContract c_tot;
    VerificationOptions options;
};

/// Canonical LP variable layout: time-major; per step d_ext, y_ext, then d_j, y_j per included node.
class VarLayout {
public:
    VarLayout() = default;

    VarLayout(const Network& net, const std::set<NodeId>& nodes, int horizon)
        : horizon_(horizon), n_d_ext_(net.n_d_ext()), n_y_ext_(net.n_y_ext()), pos_(net.size(), SIZE_MAX) {
        std::size_t off = n_d_ext_ + n_y_ext_;
        for (NodeId j : nodes) {  // std::set iterates in declaration order
            pos_[j] = nodes_.size();
            nodes_.push_back(j);
            offset_.push_back(off);
            n_d_.push_back(net.contract(j).n_d());
            n_y_.push_back(net.contract(j).n_y());
            off += n_d_.back() + n_y_.back();
        }
        step_ = off;
    }

    int horizon() const { return horizon_; }
    std::size_t n_vars() const { return step_ * static_cast<std::size_t>(horizon_ + 1); }
    const std::vector<NodeId>& nodes() const { return nodes_; }
    bool includes(NodeId j) const { return j < pos_.size() && pos_[j] != SIZE_MAX; }

    std::size_t d_ext(int t, std::size_t c) const { return base(t) + c; }
    std::size_t y_ext(int t, std::size_t c) const { return base(t) + n_d_ext_ + c; }
    std::size_t d(NodeId j, int t, std::size_t c) const { return base(t) + offset_[pos_.at(j)] + c; }
    std::size_t y(NodeId j, int t, std::size_t c) const {
        std::size_t p = pos_.at(j);
        return base(t) + offset_[p] + n_d_[p] + c;
    }

    std::vector<std::string> names(const Network& net) const {
        std::vector<std::string> out(n_vars());
        for (int t = 0; t <= horizon_; ++t) {
            std::string ts = "_" + std::to_string(t);
            for (std::size_t c = 0; c < n_d_ext_; ++c) out[d_ext(t, c)] = "dext" + std::to_string(c) + ts;
            for (std::size_t c = 0; c < n_y_ext_; ++c) out[y_ext(t, c)] = "yext" + std::to_string(c) + ts;
            for (std::size_t p = 0; p < nodes_.size(); ++p) {
                std::string id = sanitize(net.name(nodes_[p]));
                for (std::size_t c = 0; c < n_d_[p]; ++c) out[d(nodes_[p], t, c)] = "d_" + id + "_" + std::to_string(c) + ts;
                for (std::size_t c = 0; c < n_y_[p]; ++c) out[y(nodes_[p], t, c)] = "y_" + id + "_" + std::to_string(c) + ts;
            }
        }
        return out;
    }

private:
    std::size_t base(int t) const {
        if (t < 0 || t > horizon_) throw std::out_of_range("VarLayout: time outside horizon");
        return step_ * static_cast<std::size_t>(t);
    }

    static std::string sanitize(const std::string& s) {
        std::string out;
        for (char ch : s) out += std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_';
        return out;
    }

    int horizon_ = 0;
    std::size_t n_d_ext_ = 0, n_y_ext_ = 0, step_ = 0;
    std::vector<NodeId> nodes_;
    std::vector<std::size_t> pos_, offset_, n_d_, n_y_;
};

/// Whose inequalities a constraint range or objective refers to.
struct ContractRef {
    bool system = false;  // true: C_tot over the external signals
    NodeId node = 0;
    BlockKind kind = BlockKind::assumption;
};

/// Block `block` of `who`, imposed at every time in [from, to].
struct PremiseRange {
    ContractRef who;
    std::size_t block = 0;
    int from = 0;
    int to = -1;
};

struct ObjectiveRef {
    ContractRef who;
    std::size_t block = 0;
    std::size_t row = 0;
    int time = 0;
};

/// Everything needed to re-check an LP point without the LP itself.
struct LpMeta {
    VarLayout layout;
    std::vector<NodeId> defined_nodes;  // nodes whose input definitions are imposed
    std::vector<PremiseRange> premises;
    ObjectiveRef objective;
};

struct VerificationLp {
    LpProblem lp;
    LpMeta meta;
};

struct Target {
    bool omega = false;
    NodeId node = 0;
};

struct Witness {
    std::size_t lp_index = 0;
    LpMeta meta;
    std::vector<double> point;
    Signal d_ext, y_ext;
    std::map<NodeId, Signal> d, y;
};

struct LpStats {
    std::size_t lp_count = 0;
    double avg_vars = 0.0;
    double avg_constraints = 0.0;
    std::size_t iterations = 0;
};

struct RhoResult {
    Target target;
    ExtReal value = ExtReal::neg_inf();
    std::optional<Witness> witness;
    std::size_t lp_count = 0;
    double solve_ms = 0.0;
    LpStats stats;
};

struct Report {
    std::vector<RhoResult> results;
    bool verdict = true;
    double total_ms = 0.0;
    double tolerance = 1e-6;
    BuilderMode mode = BuilderMode::general;
    bool extendibility_asserted = false;
    std::vector<Finding> warnings;
};

inline std::string target_label(const Network& net, const Target& t) { return t.omega ? "Omega" : net.name(t.node); }

namespace detail {

inline const LtiRdContract& contract_of(const VerificationProblem& p, const ContractRef& who) {
    return who.system ? p.c_tot : p.network.contract(who.node);
}

// Variable index of the d or y coordinate that a contract reads, at absolute time t.
inline std::size_t d_var(const VarLayout& L, const ContractRef& who, int t, std::size_t c) {
    return who.system ? L.d_ext(t, c) : L.d(who.node, t, c);
}
inline std::size_t y_var(const VarLayout& L, const ContractRef& who, int t, std::size_t c) {
    return who.system ? L.y_ext(t, c) : L.y(who.node, t, c);
}

// Dense coefficient row and rhs of one block row instantiated at time k.
inline std::pair<std::vector<double>, double> instantiate(const VerificationProblem& p, const VarLayout& L,
                                                          const ContractRef& who, std::size_t block,
                                                          std::size_t row, int k) {
    const LtiRdContract& c = contract_of(p, who);
    const InequalityBlock& b = c.blocks(who.kind)[block];
    std::vector<double> coef(L.n_vars(), 0.0);
    auto drow = b.coeff_d.row(row);
    for (int s = 0; s <= b.depth; ++s) {
        for (std::size_t j = 0; j < c.n_d(); ++j) {
            double a = drow[s * c.n_d() + j];
            if (a != 0.0) coef[d_var(L, who, k - b.depth + s, j)] += a;
        }
    }
    auto yrow = b.coeff_y.row(row);
    for (int s = 0; s < b.y_slots(); ++s) {
        for (std::size_t j = 0; j < c.n_y(); ++j) {
            double a = yrow[s * c.n_y() + j];
            if (a != 0.0) coef[y_var(L, who, k - b.depth + s, j)] += a;
        }
    }
    return {std::move(coef), b.rhs[row]};
}

/// Constraint set shared by several objective rows.
struct LpFamily {
    LpProblem base;
    LpMeta meta;
    std::vector<ObjectiveRef> objectives;
};

inline void add_equalities(const VerificationProblem& p, LpProblem& lp, const LpMeta& meta) {
    const Network& net = p.network;
    const VarLayout& L = meta.layout;
    std::vector<double> row(L.n_vars());
    for (int t = 0; t <= L.horizon(); ++t) {
        for (NodeId j : meta.defined_nodes) {
            const auto& cj = net.contract(j);
            for (std::size_t r = 0; r < cj.n_d(); ++r) {
                std::fill(row.begin(), row.end(), 0.0);
                row[L.d(j, t, r)] = 1.0;
                for (std::size_t e : net.graph().in_edges(j)) {
                    NodeId src = net.graph().edges()[e].src;
                    Matrix f = net.feed(j, src);
                    for (std::size_t c = 0; c < f.cols(); ++c) {
                        if (f(r, c) != 0.0) row[L.y(src, t, c)] -= f(r, c);
                    }
                }
                for (std::size_t c = 0; c < net.n_d_ext(); ++c) {
                    double e = net.ext_in(j)(r, c);
                    if (e != 0.0) row[L.d_ext(t, c)] -= e;
                }
                lp.add_eq(row, 0.0);
            }
        }
        for (std::size_t r = 0; r < net.n_y_ext(); ++r) {
            std::fill(row.begin(), row.end(), 0.0);
            row[L.y_ext(t, r)] = 1.0;
            for (NodeId w : net.output_set()) {
                const Matrix& h = net.ext_out(w);
                for (std::size_t c = 0; c < h.cols(); ++c) {
                    if (h(r, c) != 0.0) row[L.y(w, t, c)] -= h(r, c);
                }
            }
            lp.add_eq(row, 0.0);
        }
    }
}

inline LpFamily make_family(const VerificationProblem& p, const std::set<NodeId>& nodes,
                            std::vector<NodeId> defined, int horizon, std::vector<PremiseRange> premises) {
    LpFamily fam;
    fam.meta.layout = VarLayout(p.network, nodes, horizon);
    fam.meta.defined_nodes = std::move(defined);
    fam.meta.premises = std::move(premises);
    fam.base = LpProblem(fam.meta.layout.n_vars());
    fam.base.var_names = fam.meta.layout.names(p.network);
    add_equalities(p, fam.base, fam.meta);
    for (const PremiseRange& pr : fam.meta.premises) {
        const InequalityBlock& b = contract_of(p, pr.who).blocks(pr.who.kind)[pr.block];
        for (int k = pr.from; k <= pr.to; ++k) {
            for (std::size_t r = 0; r < b.rows(); ++r) {
                auto [coef, rhs] = instantiate(p, fam.meta.layout, pr.who, pr.block, r, k);
                fam.base.add_ineq(coef, rhs);
            }
        }
    }
    return fam;
}

// Every block of `who`, imposed from its own depth through `to`.
inline void push_ranges(const VerificationProblem& p, std::vector<PremiseRange>& out, const ContractRef& who, int to) {
    const auto& blocks = contract_of(p, who).blocks(who.kind);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].rows() > 0 && blocks[b].depth <= to) out.push_back({who, b, blocks[b].depth, to});
    }
}

inline ContractRef sys(BlockKind k) { return {true, 0, k}; }
inline ContractRef node_ref(NodeId j, BlockKind k) { return {false, j, k}; }

inline void add_objectives(const VerificationProblem& p, LpFamily& fam, const ContractRef& who, int time) {
    const auto& blocks = contract_of(p, who).blocks(who.kind);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].depth > time) continue;
        for (std::size_t r = 0; r < blocks[b].rows(); ++r) fam.objectives.push_back({who, b, r, time});
    }
}

// Terminal times at which some objective block is defined, up to the horizon.
inline std::set<int> terminal_times(const std::vector<InequalityBlock>& blocks, int horizon) {
    std::set<int> times;
    for (const auto& b : blocks) {
        if (b.rows() == 0) continue;
        for (int t = b.depth; t <= horizon; ++t) times.insert(t);
    }
    return times;
}

inline void validate_problem(const VerificationProblem& p) {
    const Network& net = p.network;
    if (p.c_tot.n_d() != net.n_d_ext() || p.c_tot.n_y() != net.n_y_ext()) {
        throw VerificationError("system contract must have n_d = " + std::to_string(net.n_d_ext()) +
                                " and n_y = " + std::to_string(net.n_y_ext()));
    }
    if (p.options.horizon_extension < 0) throw VerificationError("horizon extension must be nonnegative");
    for (const Finding& f : check_assumptions(net)) {
        if (f.kind == Finding::Kind::assumption2 || p.options.strict_assumptions) throw VerificationError(f.message);
    }
    if (p.options.mode == BuilderMode::cascade && !topological_order(net.graph()).ok()) {
        throw VerificationError("cascade mode requires an acyclic network");
    }
}

struct PlantController {
    NodeId plant = 0;
    NodeId controller = 1;
};

inline PlantController two_system_roles(const Network& net) {
    if (net.size() != 2) throw VerificationError("two-system builder requires exactly two nodes");
    auto e01 = net.graph().edge_index(0, 1);
    auto e10 = net.graph().edge_index(1, 0);
    if (!e01 || !e10) throw VerificationError("two-system builder requires edges in both directions");
    bool s01 = net.causality()[*e01] == Causality::strict;
    bool s10 = net.causality()[*e10] == Causality::strict;
    if (!s01 && !s10) throw VerificationError("two-system feedback loop has no strictly causal edge");
    // The plant receives the controller's output through a strictly causal edge.
    if (s10) return {0, 1};
    return {1, 0};
}

inline std::vector<LpFamily> assumption_families(const VerificationProblem& p, NodeId i) {
    const Network& net = p.network;
    const LtiRdContract& ci = net.contract(i);
    std::vector<LpFamily> out;
    if (ci.assumption_rows() == 0) return out;
    const int horizon = ci.assumption_depth() + p.options.horizon_extension;
    const bool cascade = p.options.mode == BuilderMode::cascade;
    std::set<NodeId> br = backward_reachable(net, i, EdgeFilter::all);
    std::set<NodeId> br_nsc = backward_reachable(net, i, EdgeFilter::nsc_only);
    std::set<NodeId> nodes = br;
    nodes.insert(i);
    std::vector<NodeId> defined(nodes.begin(), nodes.end());
    for (NodeId w : net.output_set()) nodes.insert(w);
    for (int t : terminal_times(ci.assumptions(), horizon)) {
        std::vector<PremiseRange> prem;
        push_ranges(p, prem, sys(BlockKind::assumption), t);
        for (NodeId j : br) {
            bool full = cascade || br_nsc.count(j);
            push_ranges(p, prem, node_ref(j, BlockKind::guarantee), full ? t : t - 1);
        }
        LpFamily fam = make_family(p, nodes, defined, t, std::move(prem));
        add_objectives(p, fam, node_ref(i, BlockKind::assumption), t);
        out.push_back(std::move(fam));
    }
    return out;
}

inline std::vector<LpFamily> guarantee_families(const VerificationProblem& p) {
    const Network& net = p.network;
    std::vector<LpFamily> out;
    if (p.c_tot.guarantee_rows() == 0) return out;
    const int horizon = p.c_tot.guarantee_depth() + p.options.horizon_extension;
    std::set<NodeId> nodes;
    for (NodeId j = 0; j < net.size(); ++j) nodes.insert(j);
    std::vector<NodeId> defined(nodes.begin(), nodes.end());
    for (int t : terminal_times(p.c_tot.guarantees(), horizon)) {
        std::vector<PremiseRange> prem;
        push_ranges(p, prem, sys(BlockKind::assumption), t);
        for (NodeId j : nodes) push_ranges(p, prem, node_ref(j, BlockKind::guarantee), t);
        LpFamily fam = make_family(p, nodes, defined, t, std::move(prem));
        add_objectives(p, fam, sys(BlockKind::guarantee), t);
        out.push_back(std::move(fam));
    }
    return out;
}

// Fixed-horizon feedback programs: premises over the whole window 0..m, objective at every l in range.
inline std::vector<std::vector<LpFamily>> two_system_families(const VerificationProblem& p, int m) {
    const Network& net = p.network;
    PlantController pc = two_system_roles(net);
    int deepest = p.c_tot.assumption_depth();
    deepest = std::max({deepest, p.c_tot.guarantee_depth()});
    for (NodeId j = 0; j < 2; ++j) {
        deepest = std::max({deepest, net.contract(j).assumption_depth(), net.contract(j).guarantee_depth()});
    }
    if (m < deepest) throw VerificationError("two-system horizon must be at least the largest contract depth");
    std::set<NodeId> nodes{0, 1};
    std::vector<NodeId> defined{0, 1};
    auto family = [&](int plant_to, int ctr_to, const ContractRef& objective) {
        std::vector<LpFamily> fams;
        std::vector<PremiseRange> prem;
        push_ranges(p, prem, sys(BlockKind::assumption), m);
        push_ranges(p, prem, node_ref(pc.plant, BlockKind::guarantee), plant_to);
        push_ranges(p, prem, node_ref(pc.controller, BlockKind::guarantee), ctr_to);
        const auto& blocks = contract_of(p, objective).blocks(objective.kind);
        bool any_rows = std::any_of(blocks.begin(), blocks.end(), [](const InequalityBlock& b) { return b.rows() > 0; });
        if (!any_rows) return fams;
        LpFamily fam = make_family(p, nodes, defined, m, std::move(prem));
        for (int l = 0; l <= m; ++l) add_objectives(p, fam, objective, l);
        fams.push_back(std::move(fam));
        return fams;
    };
    std::vector<std::vector<LpFamily>> groups(3);
    groups[pc.plant] = family(m - 1, m - 1, node_ref(pc.plant, BlockKind::assumption));
    groups[pc.controller] = family(m, m - 1, node_ref(pc.controller, BlockKind::assumption));
    groups[2] = family(m, m, sys(BlockKind::guarantee));
    return groups;
}

inline VerificationLp expand(const VerificationProblem& p, const LpFamily& fam, const ObjectiveRef& obj) {
    VerificationLp v{fam.base, fam.meta};
    v.meta.objective = obj;
    auto [coef, rhs] = instantiate(p, fam.meta.layout, obj.who, obj.block, obj.row, obj.time);
    v.lp.objective = std::move(coef);
    v.lp.objective_constant = -rhs;
    return v;
}

inline std::vector<VerificationLp> expand_all(const VerificationProblem& p, const std::vector<LpFamily>& fams) {
    std::vector<VerificationLp> out;
    for (const auto& fam : fams) {
        for (const auto& obj : fam.objectives) out.push_back(expand(p, fam, obj));
    }
    return out;
}

inline Witness decode(const Network& net, const LpMeta& meta, std::vector<double> point, std::size_t index) {
    Witness w;
    w.lp_index = index;
    w.meta = meta;
    const VarLayout& L = meta.layout;
    const int len = L.horizon() + 1;
    w.d_ext = zero_signal(len, net.n_d_ext());
    w.y_ext = zero_signal(len, net.n_y_ext());
    for (NodeId j : L.nodes()) {
        w.d[j] = zero_signal(len, net.contract(j).n_d());
        w.y[j] = zero_signal(len, net.contract(j).n_y());
    }
    for (int t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < net.n_d_ext(); ++c) w.d_ext[t][c] = point[L.d_ext(t, c)];
        for (std::size_t c = 0; c < net.n_y_ext(); ++c) w.y_ext[t][c] = point[L.y_ext(t, c)];
        for (NodeId j : L.nodes()) {
            for (std::size_t c = 0; c < net.contract(j).n_d(); ++c) w.d[j][t][c] = point[L.d(j, t, c)];
            for (std::size_t c = 0; c < net.contract(j).n_y(); ++c) w.y[j][t][c] = point[L.y(j, t, c)];
        }
    }
    w.point = std::move(point);
    return w;
}

struct Aggregate {
    ExtReal value = ExtReal::neg_inf();
    std::optional<std::size_t> argmax;
};

inline void fold(Aggregate& agg, const LpOutcome& o, std::size_t index) {
    if (agg.value.is_pos_inf()) return;
    if (o.status == LpStatus::unbounded) {
        agg.value = ExtReal::pos_inf();
        agg.argmax.reset();
    } else if (o.status == LpStatus::optimal && (agg.value.is_neg_inf() || o.value > agg.value.value())) {
        agg.value = ExtReal::finite(o.value);
        agg.argmax = index;
    }
}

inline RhoResult solve_families(const VerificationProblem& p, const Target& target,
                                const std::vector<LpFamily>& fams) {
    auto start = std::chrono::steady_clock::now();
    RhoResult res;
    res.target = target;
    Aggregate agg;
    std::optional<std::vector<double>> best_point;
    const LpFamily* best_family = nullptr;
    ObjectiveRef best_obj;
    std::size_t best_index = 0;
    std::size_t index = 0;
    double vars = 0.0, cons = 0.0;
    for (const auto& fam : fams) {
        for (const auto& obj : fam.objectives) {
            VerificationLp v = expand(p, fam, obj);
            LpOutcome o = solve(v.lp, p.options.solver);
            res.stats.iterations += o.iterations;
            vars += static_cast<double>(v.lp.n_vars);
            cons += static_cast<double>(v.lp.eq_rhs.size() + v.lp.ineq_rhs.size());
            auto before = agg.argmax;
            fold(agg, o, index);
            if (agg.argmax && agg.argmax != before) {
                best_point = std::move(o.point);
                best_family = &fam;
                best_obj = obj;
                best_index = index;
            }
            ++index;
        }
    }
    res.value = agg.value;
    res.lp_count = index;
    res.stats.lp_count = index;
    if (index > 0) {
        res.stats.avg_vars = vars / static_cast<double>(index);
        res.stats.avg_constraints = cons / static_cast<double>(index);
    }
    if (res.value.is_finite() && best_family) {
        LpMeta meta = best_family->meta;
        meta.objective = best_obj;
        res.witness = decode(p.network, meta, std::move(*best_point), best_index);
    }
    res.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return res;
}

}  // namespace detail

/// One LP per (terminal time, assumption row) of node i.
inline std::vector<VerificationLp> build_assumption_lps(const VerificationProblem& p, NodeId i) {
    detail::validate_problem(p);
    if (i >= p.network.size()) throw VerificationError("node index out of range");
    return detail::expand_all(p, detail::assumption_families(p, i));
}

/// One LP per (terminal time, guarantee row) of the system contract.
inline std::vector<VerificationLp> build_guarantee_lps(const VerificationProblem& p) {
    detail::validate_problem(p);
    return detail::expand_all(p, detail::guarantee_families(p));
}

/// Groups for the plant-controller pair at horizon m: [node 0, node 1, Omega].
inline std::vector<std::vector<VerificationLp>> build_two_system_feedback_lps(const VerificationProblem& p, int m) {
    detail::validate_problem(p);
    std::vector<std::vector<VerificationLp>> out;
    for (const auto& fams : detail::two_system_families(p, m)) out.push_back(detail::expand_all(p, fams));
    return out;
}

/// Max over LP outcomes: unbounded dominates, infeasible contributes nothing, empty gives -inf.
inline RhoResult compute_rho(const VerificationProblem& p, const Target& target, const std::vector<VerificationLp>& lps) {
    auto start = std::chrono::steady_clock::now();
    RhoResult res;
    res.target = target;
    detail::Aggregate agg;
    std::vector<LpOutcome> outcomes;
    double vars = 0.0, cons = 0.0;
    for (std::size_t k = 0; k < lps.size(); ++k) {
        outcomes.push_back(solve(lps[k].lp, p.options.solver));
        res.stats.iterations += outcomes.back().iterations;
        vars += static_cast<double>(lps[k].lp.n_vars);
        cons += static_cast<double>(lps[k].lp.eq_rhs.size() + lps[k].lp.ineq_rhs.size());
        detail::fold(agg, outcomes.back(), k);
    }
    res.value = agg.value;
    res.lp_count = res.stats.lp_count = lps.size();
    if (!lps.empty()) {
        res.stats.avg_vars = vars / static_cast<double>(lps.size());
        res.stats.avg_constraints = cons / static_cast<double>(lps.size());
    }
    if (res.value.is_finite()) {
        std::size_t k = *agg.argmax;
        res.witness = detail::decode(p.network, lps[k].meta, outcomes[k].point, k);
    }
    res.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return res;
}

/// Aggregation rule alone, for outcomes obtained elsewhere.
inline ExtReal aggregate_outcomes(const std::vector<LpOutcome>& outcomes, std::optional<std::size_t>* argmax = nullptr) {
    detail::Aggregate agg;
    for (std::size_t k = 0; k < outcomes.size(); ++k) detail::fold(agg, outcomes[k], k);
    if (argmax) *argmax = agg.argmax;
    return agg.value;
}

/// Solves all |V| + 1 groups (in parallel when options.threads != 1) and applies the verdict rule.
inline Report verify(const VerificationProblem& p) {
    auto start = std::chrono::steady_clock::now();
    detail::validate_problem(p);
    const Network& net = p.network;
    Report rep;
    rep.tolerance = p.options.tolerance;
    rep.mode = p.options.mode;
    rep.extendibility_asserted = p.options.extendibility_asserted;
    for (const Finding& f : check_assumptions(net)) rep.warnings.push_back(f);

    std::vector<Target> targets;
    for (NodeId i = 0; i < net.size(); ++i) targets.push_back({false, i});
    targets.push_back({true, 0});

    std::vector<std::vector<detail::LpFamily>> two_sys;
    if (p.options.mode == BuilderMode::two_system_feedback) {
        int m = 1;
        m = std::max({m, p.c_tot.assumption_depth(), p.c_tot.guarantee_depth()});
        for (NodeId j = 0; j < net.size() && j < 2; ++j) {
            m = std::max({m, net.contract(j).assumption_depth(), net.contract(j).guarantee_depth()});
        }
        two_sys = detail::two_system_families(p, m + p.options.horizon_extension);
    }

    rep.results.resize(targets.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t g = next.fetch_add(1);
            if (g >= targets.size()) return;
            try {
                std::vector<detail::LpFamily> fams;
                if (!two_sys.empty()) {
                    fams = std::move(two_sys[g]);
                } else if (targets[g].omega) {
                    fams = detail::guarantee_families(p);
                } else {
                    fams = detail::assumption_families(p, targets[g].node);
                }
                rep.results[g] = detail::solve_families(p, targets[g], fams);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::size_t threads = p.options.threads ? p.options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, targets.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    rep.verdict = std::all_of(rep.results.begin(), rep.results.end(),
                              [&](const RhoResult& r) { return r.value.le(p.options.tolerance); });
    rep.total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

/// Residual of the objective row on the witness, i.e. the value the LP claims.
inline double witness_objective(const VerificationProblem& p, const Witness& w) {
    const ObjectiveRef& o = w.meta.objective;
    auto [coef, rhs] = detail::instantiate(p, w.meta.layout, o.who, o.block, o.row, o.time);
    return dot(coef, w.point) - rhs;
}

/// Re-checks a witness from its decoded signals: every premise row, every interconnection
/// equation, and the objective row against rho.value.
inline bool validate_witness(const VerificationProblem& p, const RhoResult& rho, double tol = 1e-6) {
    if (!rho.witness || !rho.value.is_finite()) return false;
    const Witness& w = *rho.witness;
    const Network& net = p.network;
    const int len = w.meta.layout.horizon() + 1;
    auto signal_ok = [&](const Signal& s, std::size_t dim) {
        return s.size() == static_cast<std::size_t>(len) &&
               std::all_of(s.begin(), s.end(), [&](const auto& v) { return v.size() == dim; });
    };
    if (!signal_ok(w.d_ext, net.n_d_ext()) || !signal_ok(w.y_ext, net.n_y_ext())) return false;
    for (NodeId j : w.meta.layout.nodes()) {
        if (!w.d.count(j) || !w.y.count(j)) return false;
        if (!signal_ok(w.d.at(j), net.contract(j).n_d()) || !signal_ok(w.y.at(j), net.contract(j).n_y())) return false;
    }
    auto sig_d = [&](const ContractRef& who) -> const Signal& { return who.system ? w.d_ext : w.d.at(who.node); };
    auto sig_y = [&](const ContractRef& who) -> const Signal& { return who.system ? w.y_ext : w.y.at(who.node); };

    for (const PremiseRange& pr : w.meta.premises) {
        const LtiRdContract& c = detail::contract_of(p, pr.who);
        const InequalityBlock& b = c.blocks(pr.who.kind)[pr.block];
        const Signal& d = sig_d(pr.who);
        const Signal& y = sig_y(pr.who);
        auto d_at = [&](int t, std::size_t k) { return d[t][k]; };
        auto y_at = [&](int t, std::size_t k) { return y[t][k]; };
        for (int k = pr.from; k <= pr.to; ++k) {
            for (std::size_t r = 0; r < b.rows(); ++r) {
                double res = b.residual(r, k, c.n_d(), c.n_y(), d_at, y_at);
                if (res > tol * (1.0 + std::abs(b.rhs[r]))) return false;
            }
        }
    }
    for (int t = 0; t < len; ++t) {
        for (NodeId j : w.meta.defined_nodes) {
            std::vector<double> expect(net.contract(j).n_d(), 0.0);
            for (std::size_t e : net.graph().in_edges(j)) {
                NodeId src = net.graph().edges()[e].src;
                Matrix f = net.feed(j, src);
                for (std::size_t r = 0; r < f.rows(); ++r) expect[r] += dot(f.row(r), w.y.at(src)[t]);
            }
            for (std::size_t r = 0; r < expect.size(); ++r) {
                expect[r] += dot(net.ext_in(j).row(r), w.d_ext[t]);
                if (std::abs(w.d.at(j)[t][r] - expect[r]) > tol * (1.0 + std::abs(expect[r]))) return false;
            }
        }
        for (std::size_t r = 0; r < net.n_y_ext(); ++r) {
            double expect = 0.0;
            for (NodeId o : net.output_set()) expect += dot(net.ext_out(o).row(r), w.y.at(o)[t]);
            if (std::abs(w.y_ext[t][r] - expect) > tol * (1.0 + std::abs(expect))) return false;
        }
    }
    const ObjectiveRef& o = w.meta.objective;
    const LtiRdContract& c = detail::contract_of(p, o.who);
    const InequalityBlock& b = c.blocks(o.who.kind)[o.block];
    const Signal& d = sig_d(o.who);
    const Signal& y = sig_y(o.who);
    double value = b.residual(
        o.row, o.time, c.n_d(), c.n_y(), [&](int t, std::size_t k) { return d[t][k]; },
        [&](int t, std::size_t k) { return y[t][k]; });
    return std::abs(value - rho.value.value()) <= tol * (1.0 + std::abs(value));
}

}  // namespace rdc

#endif
