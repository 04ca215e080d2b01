#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "rdc/network.hpp"
#include "rdc/platoon.hpp"

using namespace rdc;

namespace {

Digraph seven_nodes() {
    // A B C D E F G
    std::vector<std::string> names{"A", "B", "C", "D", "E", "F", "G"};
    auto id = [&](char c) { return static_cast<NodeId>(c - 'A'); };
    std::vector<Edge> e;
    for (auto [s, d] : std::vector<std::pair<char, char>>{{'A', 'B'}, {'A', 'E'}, {'A', 'D'}, {'B', 'C'}, {'B', 'D'},
                                                          {'E', 'F'}, {'D', 'F'}, {'D', 'G'}, {'C', 'G'}, {'F', 'G'}}) {
        e.push_back({id(s), id(d)});
    }
    return Digraph(names, e);
}

std::set<NodeId> letters(const std::string& s) {
    std::set<NodeId> out;
    for (char c : s) out.insert(static_cast<NodeId>(c - 'A'));
    return out;
}

std::vector<NodeId> order_of(const std::string& s) {
    std::vector<NodeId> out;
    for (char c : s) out.push_back(static_cast<NodeId>(c - 'A'));
    return out;
}

Digraph random_graph(std::mt19937_64& gen, std::size_t n, double p) {
    std::bernoulli_distribution coin(p);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("n" + std::to_string(i));
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && coin(gen)) e.push_back({i, j});
    return Digraph(names, e);
}

// Boolean transitive closure: reach[j][i] iff a path of length >= 1 leads from j to i.
std::vector<std::vector<bool>> closure(const Digraph& g, const EdgeMask& mask = {}) {
    std::size_t n = g.size();
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (std::size_t k = 0; k < g.edges().size(); ++k)
        if (mask.empty() || mask[k]) r[g.edges()[k].src][g.edges()[k].dst] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (r[i][k] && r[k][j]) r[i][j] = true;
    return r;
}

// Scalar node contracts: y(k) = c * d(k) (feedthrough) or y(k) = d(k-1) (delay).
LtiRdContract scalar_contract(bool feedthrough, double scale = 1.0) {
    BlockBuilder g(BlockKind::guarantee, 1, 1, 1);
    g.row().y(0, 0, scale).d(feedthrough ? 0 : 1, 0, -scale).rhs(0);
    return LtiRdContract(1, 1, {}, {g.build()}, feedthrough ? "ft" : "delay");
}

}  // namespace

TEST(TopologicalOrder, SingleNode) {
    Digraph g({"x"}, {});
    TopoResult r = topological_order(g);
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(r.order, std::vector<NodeId>{0});
}

TEST(TopologicalOrder, SevenNodeGraph) {
    Digraph g = seven_nodes();
    TopoResult r = topological_order(g);
    ASSERT_TRUE(r.ok());
    EXPECT_TRUE(is_valid_topological_order(g, r.order));
    for (const char* s : {"ABCDEFG", "ABDEFCG", "AEBDFCG"}) EXPECT_TRUE(is_valid_topological_order(g, order_of(s))) << s;
    EXPECT_FALSE(is_valid_topological_order(g, order_of("BACDEFG")));
    EXPECT_FALSE(is_valid_topological_order(g, order_of("ABCDEF")));
    EXPECT_EQ(count_topological_orders(g), 11u);
}

TEST(TopologicalOrder, TwoCycleCertificate) {
    Digraph g({"1", "2"}, {{0, 1}, {1, 0}});
    TopoResult r = topological_order(g);
    ASSERT_FALSE(r.ok());
    EXPECT_EQ(r.cycle, (std::vector<Edge>{{0, 1}, {1, 0}}));
    EXPECT_EQ(count_topological_orders(g), 0u);
}

TEST(TopologicalOrder, Counts) {
    EXPECT_EQ(count_topological_orders(Digraph({"a", "b", "c"}, {{0, 1}, {1, 2}})), 1u);
    EXPECT_EQ(count_topological_orders(Digraph({"a", "b", "c"}, {})), 6u);
    std::vector<std::string> many(13, "");
    for (std::size_t i = 0; i < many.size(); ++i) many[i] = std::to_string(i);
    EXPECT_THROW(count_topological_orders(Digraph(many, {})), NetworkError);
    EXPECT_EQ(count_topological_orders(Digraph(many, {}), 13), 6227020800ull);
}

TEST(Digraph, RejectsSelfLoopsAndDuplicates) {
    EXPECT_THROW(Digraph({"a"}, {{0, 0}}), NetworkError);
    EXPECT_THROW(Digraph({"a", "b"}, {{0, 1}, {0, 1}}), NetworkError);
    EXPECT_THROW(Digraph({"a", "b"}, {{0, 2}}), NetworkError);
}

TEST(BackwardReachable, SevenNodeGraph) {
    Digraph g = seven_nodes();
    EXPECT_EQ(backward_reachable(g, 2), letters("AB"));
    EXPECT_EQ(backward_reachable(g, 5), letters("ABDE"));
    EXPECT_TRUE(backward_reachable(g, 0).empty());
}

TEST(BackwardReachable, NodeOnCycleReachesItself) {
    Digraph g({"1", "2"}, {{0, 1}, {1, 0}});
    EXPECT_EQ(backward_reachable(g, 0), (std::set<NodeId>{0, 1}));
    EXPECT_EQ(backward_reachable(g, 1), (std::set<NodeId>{0, 1}));
}

TEST(BackwardReachable, MatchesClosureOnRandomGraphs) {
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t n = 1 + trial % 10;
        Digraph g = random_graph(gen, n, 0.25);
        EdgeMask mask(g.edges().size());
        std::bernoulli_distribution coin(0.6);
        for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = coin(gen);
        auto all = closure(g), sub = closure(g, mask);
        for (NodeId i = 0; i < n; ++i) {
            std::set<NodeId> want, want_sub;
            for (NodeId j = 0; j < n; ++j) {
                if (all[j][i]) want.insert(j);
                if (sub[j][i]) want_sub.insert(j);
            }
            auto got = backward_reachable(g, i), got_sub = backward_reachable(g, i, mask);
            EXPECT_EQ(got, want);
            EXPECT_EQ(got_sub, want_sub);
            EXPECT_TRUE(std::includes(got.begin(), got.end(), got_sub.begin(), got_sub.end()));
        }
    }
}

TEST(TopologicalOrder, RandomDagsOrderEveryEdgeForward) {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 1 + trial % 10;
        std::bernoulli_distribution coin(0.3);
        std::vector<NodeId> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<Edge> e;
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                if (coin(gen)) e.push_back({perm[a], perm[b]});
        std::vector<std::string> names(n);
        for (std::size_t i = 0; i < n; ++i) names[i] = std::to_string(i);
        Digraph g(names, e);
        TopoResult r = topological_order(g);
        ASSERT_TRUE(r.ok());
        ASSERT_TRUE(is_valid_topological_order(g, r.order));
        std::set<NodeId> before;
        for (NodeId v : r.order) {
            auto br = backward_reachable(g, v);
            EXPECT_TRUE(std::includes(before.begin(), before.end(), br.begin(), br.end()));
            before.insert(v);
        }
        if (n <= 8) {
            EXPECT_GE(count_topological_orders(g), 1u);
        }
    }
}

TEST(TopologicalOrder, CyclicGraphsGiveValidCertificates) {
    std::mt19937_64 gen(5);
    int cyclic = 0;
    for (int trial = 0; trial < 200; ++trial) {
        Digraph g = random_graph(gen, 2 + trial % 8, 0.3);
        TopoResult r = topological_order(g);
        if (r.ok()) {
            EXPECT_TRUE(is_valid_topological_order(g, r.order));
            continue;
        }
        ++cyclic;
        ASSERT_FALSE(r.cycle.empty());
        for (std::size_t k = 0; k < r.cycle.size(); ++k) {
            EXPECT_TRUE(g.edge_index(r.cycle[k].src, r.cycle[k].dst).has_value());
            EXPECT_EQ(r.cycle[k].dst, r.cycle[(k + 1) % r.cycle.size()].src);
        }
    }
    EXPECT_GT(cyclic, 0);
}

TEST(Causality, DelayIsStrictFeedthroughIsNot) {
    for (bool ft : {false, true}) {
        Network net = Network::from_sources({{"a", scalar_contract(true)}, {"b", scalar_contract(ft)}}, 1,
                                            {{{std::nullopt, 0}}, {{0, 0}}}, {{1, 0}});
        auto labels = derive_edge_causality(net);
        ASSERT_EQ(labels.size(), 1u);
        EXPECT_EQ(labels[0], ft ? Causality::nonstrict : Causality::strict);
    }
}

TEST(Causality, InvariantUnderRowScaling) {
    for (double s : {0.5, 1.0, 7.0}) {
        Network net = Network::from_sources({{"a", scalar_contract(true)}, {"b", scalar_contract(true, s)}}, 1,
                                            {{{std::nullopt, 0}}, {{0, 0}}}, {{1, 0}});
        EXPECT_EQ(net.causality(0, 1), Causality::nonstrict);
    }
}

TEST(Causality, OverridesMayOnlyRelax) {
    std::vector<NetworkNode> nodes{{"a", scalar_contract(true)}, {"b", scalar_contract(false)}};
    std::vector<std::vector<SourceRef>> in{{{std::nullopt, 0}}, {{0, 0}}};
    Network relaxed = Network::from_sources(nodes, 1, in, {{1, 0}}, {{{0, 1}, Causality::nonstrict}});
    EXPECT_EQ(relaxed.causality(0, 1), Causality::nonstrict);
    EXPECT_EQ(derive_edge_causality(relaxed)[0], Causality::strict);

    std::vector<NetworkNode> ft{{"a", scalar_contract(true)}, {"b", scalar_contract(true)}};
    EXPECT_THROW(Network::from_sources(ft, 1, in, {{1, 0}}, {{{0, 1}, Causality::strict}}), NetworkError);
    EXPECT_THROW(Network::from_sources(ft, 1, in, {{1, 0}}, {{{1, 0}, Causality::strict}}), NetworkError);
}

TEST(Platoon, GraphShapeAndCausality) {
    PlatoonParams P;
    P.M = 2;
    Network net = build_platoon(P).network;
    EXPECT_EQ(net.size(), 2u);
    EXPECT_EQ(net.graph().edges().size(), 2u);
    EXPECT_EQ(net.causality(1, 0), Causality::strict);     // ctr -> phy
    EXPECT_EQ(net.causality(0, 1), Causality::nonstrict);  // phy -> ctr
    P.M = 5;
    EXPECT_EQ(build_platoon(P).network.size(), 8u);
}

TEST(Platoon, ValidAndLabeledForManySizes) {
    for (int M = 2; M <= 100; ++M) {
        PlatoonParams P;
        P.M = M;
        Network net = build_platoon(P).network;
        EXPECT_TRUE(check_assumptions(net).empty()) << M;
        std::size_t strict = 0;
        for (std::size_t k = 0; k < net.graph().edges().size(); ++k) {
            const Edge& e = net.graph().edges()[k];
            bool ctr_to_phy = net.name(e.src).rfind("ctr_", 0) == 0;
            EXPECT_EQ(net.causality()[k] == Causality::strict, ctr_to_phy) << net.name(e.src) << "->" << net.name(e.dst);
            strict += ctr_to_phy;
        }
        EXPECT_EQ(strict, static_cast<std::size_t>(M - 1));
        EXPECT_EQ(net.graph().edges().size(), static_cast<std::size_t>(2 * (M - 1) + 2 * (M - 2)));
    }
}

TEST(CheckAssumptions, AlgebraicLoop) {
    Network net = Network::from_sources({{"1", scalar_contract(true)}, {"2", scalar_contract(true)}}, 0,
                                        {{{1, 0}}, {{0, 0}}}, {{0, 0}});
    auto f = check_assumptions(net);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].kind, Finding::Kind::assumption2);
    EXPECT_EQ(f[0].cycle, (std::vector<Edge>{{0, 1}, {1, 0}}));
}

TEST(CheckAssumptions, SingleNodeClean) {
    BlockBuilder a(BlockKind::assumption, 1, 1, 1);
    a.row().d(0, 0, 1).rhs(1);
    LtiRdContract c(1, 1, {a.build()}, {});
    Network net(std::vector<NetworkNode>{{"x", c}}, {}, 1, 1, {}, {Matrix::identity(1)}, {Matrix(1, 1)}, {});
    EXPECT_TRUE(check_assumptions(net).empty());
}

TEST(CheckAssumptions, OutputDependentAssumptionOutsideW) {
    BlockBuilder a(BlockKind::assumption, 1, 1, 1);
    a.row().y(1, 0, 1).rhs(1);
    LtiRdContract c(1, 1, {a.build()}, {});
    Network net(std::vector<NetworkNode>{{"x", c}}, {}, 1, 1, {}, {Matrix::identity(1)}, {Matrix(1, 1)}, {});
    auto f = check_assumptions(net);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].kind, Finding::Kind::assumption1);
    Network in_w(std::vector<NetworkNode>{{"x", c}}, {}, 1, 1, {}, {Matrix::identity(1)}, {Matrix::identity(1)}, {0});
    EXPECT_TRUE(check_assumptions(in_w).empty());
}

TEST(NetworkValidation, Errors) {
    LtiRdContract c = scalar_contract(true);
    std::vector<NetworkNode> two{{"a", c}, {"b", c}};
    std::vector<Matrix> e{Matrix::identity(1), Matrix(1, 1)};
    std::vector<Matrix> h{Matrix::identity(1), Matrix(1, 1)};
    std::map<Edge, Matrix> f{{{0, 1}, Matrix::identity(1)}};
    // nonzero F without the edge
    EXPECT_THROW(Network(two, {}, 1, 1, f, e, h, {0}), NetworkError);
    // dangling input on b
    EXPECT_THROW(Network(two, {{0, 1}}, 1, 1, {}, e, h, {0}), NetworkError);
    // H nonzero outside W
    EXPECT_THROW(Network(two, {{0, 1}}, 1, 1, f, e, h, {}), NetworkError);
    // wrong E width
    EXPECT_THROW(Network(two, {{0, 1}}, 2, 1, f, e, h, {0}), NetworkError);
    EXPECT_NO_THROW(Network(two, {{0, 1}}, 1, 1, f, e, h, {0}));
    EXPECT_THROW(Network({{"a", c}, {"a", c}}, {}, 1, 1, {}, {Matrix::identity(1), Matrix::identity(1)}, {Matrix(1, 1), Matrix(1, 1)}, {}),
                 NetworkError);
}
