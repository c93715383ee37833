#include <gtest/gtest.h>

#include "dense_oracle.hpp"
#include "instances.hpp"

using namespace fpp;
using namespace fpp::testing;

TEST(Analysis, PathGraphHandSolved) {
    auto inst = path_instance(5);
    auto s = analyze(inst.graph, inst.model, inst.sets);
    const std::vector<double> q{0.0, 0.25, 0.5, 0.75, 1.0};
    const std::vector<double> theta{4.0, 6.0, 4.0, 2.0, 1.0};
    for (int x = 0; x < 5; ++x) {
        EXPECT_NEAR(s.q[x], q[x], 1e-12) << x;
        EXPECT_NEAR(s.theta[x], theta[x], 1e-12) << x;
    }
    EXPECT_NEAR(s.f[0], 16.0, 1e-12);
    EXPECT_NEAR(s.segments.mu_r[0], 1.0, 1e-12);
    EXPECT_NEAR(s.lengths.total, 16.0, 1e-12);
    EXPECT_NEAR(s.lengths.mean_hitting, 16.0, 1e-12);
}

TEST(Analysis, PathGraphReactiveChain) {
    auto inst = path_instance(5);
    auto s = analyze(inst.graph, inst.model, inst.sets);
    const auto &pt = s.chains.p_tilde;
    EXPECT_NEAR(pt.coeff(1, 2), 1.0, 1e-12); // 0.5 * 0.5 / 0.25
    EXPECT_EQ(pt.coeff(1, 0), 0.0);
    EXPECT_NEAR(pt.coeff(2, 3), 0.75, 1e-12);
    EXPECT_NEAR(pt.coeff(2, 1), 0.25, 1e-12);
    EXPECT_NEAR(pt.coeff(4, 4), 1.0, 0.0);
    // Nonreactive chain: end node reached from A with the exit probability.
    EXPECT_NEAR(s.chains.p_bar.coeff(0, s.chains.end_node), 0.25, 1e-12);
    EXPECT_NEAR(s.chains.p_bar.coeff(0, 1), 0.75, 1e-12);
}

TEST(Analysis, PathGraphFluxesByHand) {
    auto inst = path_instance(5);
    auto s = analyze(inst.graph, inst.model, inst.sets);
    auto at = [&](NodeId x, NodeId y) { return *inst.graph.edge_index(x, y); };
    // theta_tilde = theta q on interior nodes: (1, 1.5, 2, 1.5, 1).
    EXPECT_NEAR(s.flux.reactive[at(0, 1)], 1.0, 1e-12);
    EXPECT_NEAR(s.flux.reactive[at(1, 2)], 1.5, 1e-12);
    EXPECT_NEAR(s.flux.reactive[at(2, 1)], 0.5, 1e-12);
    EXPECT_NEAR(s.flux.reactive[at(2, 3)], 1.5, 1e-12);
    EXPECT_NEAR(s.flux.reactive[at(3, 2)], 0.5, 1e-12);
    EXPECT_NEAR(s.flux.reactive[at(3, 4)], 1.0, 1e-12);
    EXPECT_NEAR(s.flux.nonreactive[at(3, 4)], 0.0, 0.0);
    // Total flux on 3 -> 4 is theta(3) p(4|3) = 1: the unique B-entry edge.
    EXPECT_NEAR(s.flux.total[at(3, 4)], 1.0, 1e-12);
    for (std::size_t e = 0; e < inst.graph.edge_count(); ++e) {
        const auto [x, y] = inst.graph.edge(e);
        if (x > y) continue;
        auto back = inst.graph.edge_index(y, x);
        EXPECT_NEAR(s.flux.reactive[e] - (back ? s.flux.reactive[*back] : 0.0), 1.0, 1e-12) << x << "->" << y;
    }
}

TEST(Analysis, SingleEdge) {
    DirectedGraph g(2, {{0, 1}});
    auto m = uniform_walk(g);
    auto sets = ProblemSets::uniform(NodeSet(2, {0}), NodeSet(2, {1}));
    auto s = analyze(g, m, sets);
    EXPECT_EQ(s.q, (std::vector<double>{0.0, 1.0}));
    EXPECT_NEAR(s.theta[0], 1.0, 1e-15);
    EXPECT_NEAR(s.theta[1], 1.0, 1e-15);
    EXPECT_TRUE(s.validation.complement_empty);
    EXPECT_NEAR(s.flux.reactive[0], 1.0, 1e-15);
}

TEST(Analysis, FigureLastExitIsNodeTwo) {
    auto inst = figure_instance();
    auto s = analyze(inst.graph, inst.model, inst.sets);
    EXPECT_NEAR(s.segments.mu_r[0], 0.0, 1e-10);
    EXPECT_NEAR(s.segments.mu_r[1], 1.0, 1e-10);
    auto omega = mu_r_via_omega(inst.model, inst.sets, s.q);
    EXPECT_NEAR(omega[0], 0.0, 1e-10);
    EXPECT_NEAR(omega[1], 1.0, 1e-10);
}

TEST(Analysis, MatchesDenseOracle) {
    std::mt19937_64 rng(101);
    for (int i = 0; i < 15; ++i) {
        auto inst = random_discrete_instance(rng);
        auto s = analyze(inst.graph, inst.model, inst.sets);
        auto q = dense_committor(inst.model, inst.sets);
        auto th = dense_theta(inst.model, inst.sets);
        for (std::size_t x = 0; x < q.size(); ++x) {
            EXPECT_NEAR(s.q[x], q[x], 1e-10);
            EXPECT_NEAR(s.theta[x], th[x], 1e-8 * std::max(1.0, th[x]));
        }
    }
}

TEST(Analysis, RandomIdentities) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 20; ++i) {
        auto inst = random_discrete_instance(rng);
        auto s = analyze(inst.graph, inst.model, inst.sets);
        for (const auto &c : verify_identities(inst.graph, inst.model, inst.sets, s))
            EXPECT_LT(c.deviation, 1e-8) << c.name << " instance " << i;
        auto omega = mu_r_via_omega(inst.model, inst.sets, s.q);
        for (NodeId x : inst.sets.a()) EXPECT_NEAR(omega[x], s.segments.mu_r[x], 1e-10);
        for (NodeId x : inst.sets.b()) EXPECT_DOUBLE_EQ(s.segments.theta_tilde[x], s.theta[x]);
    }
}

TEST(Analysis, SourcesWithDirectRouteLieInVPlus) {
    std::mt19937_64 rng(17);
    int checked = 0;
    for (int i = 0; i < 30; ++i) {
        auto inst = random_discrete_instance(rng);
        auto reach = reachable_to_set(inst.model, inst.sets.b(), inst.sets.a());
        if (!inst.sets.a().is_subset_of(reach)) continue;
        auto s = analyze(inst.graph, inst.model, inst.sets);
        EXPECT_TRUE(inst.sets.a().is_subset_of(s.support.v_plus));
        ++checked;
    }
    EXPECT_GT(checked, 5);
}

TEST(Analysis, ExponentialTimeStats) {
    // 0 -> 1 at rate 2, 0 -> 2 at rate 1, 2 -> 0 at rate 4; A = {0}, B = {1}.
    DirectedGraph g(3, {{0, 1}, {0, 2}, {2, 0}});
    ContinuousNetwork net(g, {exponential_law(2.0), exponential_law(1.0), exponential_law(4.0)});
    auto m = embed_discrete(net);
    auto sets = ProblemSets::uniform(NodeSet(3, {0}), NodeSet(3, {1}));
    auto s = analyze(g, m, sets);
    ASSERT_TRUE(s.times);
    // Visits to 0: geometric with success 2/3, mean 1.5; to 2: 0.5.
    EXPECT_NEAR(s.theta[0], 1.5, 1e-12);
    EXPECT_NEAR(s.theta[2], 0.5, 1e-12);
    EXPECT_NEAR(s.times->total[0], 1.5 / 3.0, 1e-12);
    EXPECT_NEAR(s.times->total[2], 0.5 / 4.0, 1e-12);
    EXPECT_NEAR(s.times->total_sum, 0.5 + 0.125, 1e-12);
    // The last visit to 0 is reactive; earlier ones and node 2 are not.
    EXPECT_NEAR(s.times->reactive[0], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(s.times->nonreactive[0], 0.5 / 3.0, 1e-12);
    EXPECT_NEAR(s.times->nonreactive_sum + s.times->reactive_sum, s.times->total_sum, 1e-12);
}

TEST(Analysis, TimeStatsNeedKappa) {
    auto inst = path_instance(5);
    auto s = analyze(inst.graph, inst.model, inst.sets);
    EXPECT_FALSE(s.times);
    auto sup = v_minus_v_plus(inst.model, inst.sets, s.q);
    EXPECT_THROW(time_stats(inst.model, inst.sets, s.theta, s.segments, sup), ValidationError);
}

TEST(Analysis, MfptUndefinedWhenBUnreachable) {
    DirectedGraph g(4, {{0, 2}, {1, 3}, {3, 1}});
    auto m = uniform_walk(g);
    auto sets = ProblemSets::uniform(NodeSet(4, {0}), NodeSet(4, {2}));
    try {
        solve_mfpt(m, sets);
        FAIL() << "expected a throw";
    } catch (const ValidationError &e) {
        EXPECT_NE(std::string(e.what()).find("mfpt undefined"), std::string::npos);
    }
    EXPECT_THROW(analyze(g, m, sets), ValidationError);
}

TEST(Ranking, TieBreakByIndex) {
    EXPECT_EQ(rank_descending({1.0, 1.0, 1.0}, 10), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(rank_descending({0.1, 0.5, 0.5, 0.9}, 2), (std::vector<std::size_t>{3, 1}));
    EXPECT_TRUE(rank_descending({}, 3).empty());
}

TEST(Ranking, PathGraphReactiveFlux) {
    auto inst = path_instance(5);
    auto s = analyze(inst.graph, inst.model, inst.sets);
    auto r = rank_report(s, 3);
    const Ranking *jt = nullptr;
    for (const auto &e : r.edges)
        if (e.metric == "J_tilde") jt = &e;
    ASSERT_TRUE(jt);
    ASSERT_EQ(jt->order.size(), 3u);
    // Gross reactive flux peaks on 1 -> 2 and 2 -> 3 (1.5 each); ties by edge index.
    EXPECT_EQ(inst.graph.edge(jt->order[0]), (Edge{1, 2}));
    EXPECT_EQ(inst.graph.edge(jt->order[1]), (Edge{2, 3}));
    EXPECT_EQ(r.nodes[0].metric, "q");
    EXPECT_EQ(r.nodes[0].order[0], 4u);
}
