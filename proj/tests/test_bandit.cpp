#include <doctest.h>

#include "triplex/bandit.hpp"

#include "fixtures.hpp"

using namespace triplex;

namespace {

ExplanationTriple sized_triple(int downstream, int nodes, int node_features) {
    ExplanationTriple t;
    for (int i = 0; i < downstream; ++i) t.retained_downstream.insert(i);
    for (int v = 0; v < nodes; ++v) t.subgraph_nodes.insert(v);
    for (int c = 0; c < node_features; ++c) t.retained_node_features.insert(c);
    return t;
}

}  // namespace

TEST_CASE("arm costs favor pruning the larger component") {
    auto costs = arm_costs(sized_triple(2, 5, 2), 1.0);
    CHECK(costs.downstream == doctest::Approx(4.5));
    CHECK(costs.nodes == doctest::Approx(1.8));
    CHECK(costs.node_features == doctest::Approx(4.5));

    auto equal = arm_costs(sized_triple(3, 3, 3), 2.0);
    CHECK(equal.downstream == doctest::Approx(6.0));
    CHECK(equal.nodes == doctest::Approx(6.0));
    CHECK(equal.node_features == doctest::Approx(6.0));

    auto zero = arm_costs(sized_triple(2, 5, 2), 0.0);
    CHECK(zero.downstream == 0.0);
    CHECK(zero.nodes == 0.0);

    ExplanationTriple empty = sized_triple(0, 5, 2);
    CHECK_THROWS_AS(arm_costs(empty, 1.0), config_error);
}

TEST_CASE("requirements check is inclusive and supports a total bound") {
    ExplanationRequirements req;
    req.minima = {2, 5, 2};
    CHECK(requirements_satisfied(sized_triple(2, 5, 2), req));
    CHECK(!requirements_satisfied(sized_triple(3, 5, 2), req));
    CHECK(!requirements_satisfied(sized_triple(2, 6, 2), req));
    CHECK(requirements_satisfied(sized_triple(1, 4, 2), req));

    req.total_min = 9;
    CHECK(requirements_satisfied(sized_triple(2, 5, 2), req));
    req.total_min = 8;
    CHECK(!requirements_satisfied(sized_triple(2, 5, 2), req));

    req.total_min = 4;
    CHECK_THROWS_AS(req.validate(), config_error);
    req = {};
    req.minima.nodes = 0;
    CHECK_THROWS_AS(req.validate(), config_error);
}

TEST_CASE("arm selection explores before t_b and exploits afterwards") {
    BanditState state;
    state.t_b = 5;
    state.active = {Component::downstream, Component::nodes, Component::node_features};
    ContextVector ctx;
    Rng rng(4);

    // Exploration phase touches every arm eventually.
    std::set<Component> seen;
    for (int i = 0; i < 50; ++i) seen.insert(select_arm(state, 0, ctx, rng));
    CHECK(seen.size() == 3);

    // Post-breakpoint, the fitted oracle argmax wins deterministically.
    update_oracle(state, Component::downstream, ctx, 0.1, true);
    update_oracle(state, Component::nodes, ctx, 0.9, true);
    update_oracle(state, Component::node_features, ctx, 0.3, true);
    for (int i = 0; i < 5; ++i) CHECK(select_arm(state, 7, ctx, rng) == Component::nodes);

    // Inactive arms are excluded in both phases.
    state.active = {Component::downstream};
    CHECK(select_arm(state, 0, ctx, rng) == Component::downstream);
    CHECK(select_arm(state, 9, ctx, rng) == Component::downstream);

    state.active.clear();
    CHECK_THROWS_AS(select_arm(state, 0, ctx, rng), internal_error);
}

TEST_CASE("random policy never consults the oracle") {
    BanditState state;
    state.t_b = 0;
    state.mode = BanditMode::random_policy;
    state.active = {Component::downstream, Component::nodes};
    ContextVector ctx;
    update_oracle(state, Component::downstream, ctx, 100.0, true);
    Rng rng(1);
    std::set<Component> seen;
    for (int i = 0; i < 60; ++i) seen.insert(select_arm(state, 10, ctx, rng));
    CHECK(seen.size() == 2);
}

TEST_CASE("mab mode ranks arms by running mean reward") {
    BanditState state;
    state.t_b = 0;
    state.mode = BanditMode::mab;
    state.active = {Component::downstream, Component::nodes};
    ContextVector lo, hi;
    hi.values[3] = 1.0;
    update_oracle(state, Component::downstream, lo, 0.2, false);
    update_oracle(state, Component::downstream, hi, 0.4, false);
    update_oracle(state, Component::nodes, lo, 0.9, false);
    Rng rng(2);
    CHECK(select_arm(state, 3, lo, rng) == Component::nodes);
}

TEST_CASE("linear oracle fits and predicts") {
    LinearOracle oracle;
    CHECK(oracle.predict({}) == 0.0);

    ContextVector a;
    a.values = {0.5, 0.5, 0.5, 0.0};
    oracle.add(a, 0.5);
    CHECK(oracle.pending() == 1);
    CHECK(!oracle.fitted());
    oracle.refit();
    CHECK(oracle.fitted());
    CHECK(oracle.pending() == 0);
    // Ridge regularization keeps a single-point fit approximate.
    CHECK(oracle.predict(a) == doctest::Approx(0.5).epsilon(1e-2));

    // A clean linear relationship is recovered.
    LinearOracle lin;
    Rng rng(17);
    for (int i = 0; i < 40; ++i) {
        ContextVector c;
        for (auto& v : c.values) v = rand_unit(rng);
        lin.add(c, 2.0 * c.values[0] - c.values[3] + 0.25);
    }
    lin.refit();
    ContextVector probe;
    probe.values = {0.3, 0.6, 0.1, 0.8};
    CHECK(lin.predict(probe) == doctest::Approx(2.0 * 0.3 - 0.8 + 0.25).epsilon(1e-2));
}

TEST_CASE("appending without refit leaves predictions unchanged") {
    LinearOracle oracle;
    ContextVector a;
    a.values = {0.1, 0.2, 0.3, 0.4};
    oracle.add(a, 1.0);
    oracle.refit();
    double before = oracle.predict(a);
    ContextVector b;
    b.values = {0.9, 0.9, 0.9, 0.9};
    oracle.add(b, -5.0);
    CHECK(oracle.predict(a) == before);
    CHECK(oracle.pending() == 1);
}

TEST_CASE("run_explainer reaches the minima and reports the best rollout") {
    auto inst = fixtures::small_planted();
    ExplainerConfig cfg;
    cfg.kappa = 3;
    cfg.requirements.minima = {2, 5, 2};
    cfg.permutations = 25;
    cfg.episode.prior_permutations = 10;
    cfg.episode.n_child = 4;
    cfg.t_b = 2;
    cfg.seed = 5;

    RunLog log;
    auto result = run_explainer(inst.pipeline, inst.graph, cfg, &log);
    REQUIRE(result.rollouts.size() == 3);
    for (const auto& r : result.rollouts) {
        CHECK(r.triple.retained_downstream.size() <= 2);
        CHECK(r.triple.subgraph_nodes.size() <= 5);
        CHECK(r.triple.retained_node_features.size() <= 2);
    }
    double best = result.rollouts[0].score;
    for (const auto& r : result.rollouts) best = std::max(best, r.score);
    CHECK(result.rollouts[result.best_rollout].score == best);
    CHECK(result.best == result.rollouts[result.best_rollout].triple);
    CHECK(result.best_parts.total == doctest::Approx(best));
    CHECK(result.subgraphs_explored > 0);
    CHECK(!log.lines().empty());
}

TEST_CASE("run_explainer is deterministic per seed") {
    auto inst = fixtures::small_planted();
    ExplainerConfig cfg;
    cfg.kappa = 2;
    cfg.requirements.minima = {2, 5, 2};
    cfg.permutations = 20;
    cfg.episode.prior_permutations = 10;
    cfg.t_b = 1;
    cfg.seed = 12;

    RunLog log1, log2;
    auto r1 = run_explainer(inst.pipeline, inst.graph, cfg, &log1);
    auto r2 = run_explainer(inst.pipeline, inst.graph, cfg, &log2);
    CHECK(r1.best == r2.best);
    CHECK(r1.best_parts.total == r2.best_parts.total);
    CHECK(log1.text() == log2.text());

    cfg.seed = 13;
    RunLog log3;
    run_explainer(inst.pipeline, inst.graph, cfg, &log3);
    // Different seed, different exploration order (at minimum the log header
    // counts diverge with overwhelming likelihood; only check no crash here).
    CHECK(!log3.text().empty());
}

TEST_CASE("config validation rejects unreachable minima") {
    auto inst = fixtures::small_planted();
    ExplainerConfig cfg;
    cfg.requirements.minima = {2, inst.graph.num_nodes + 1, 2};
    CHECK_THROWS_AS(run_explainer(inst.pipeline, inst.graph, cfg), config_error);

    cfg = {};
    cfg.kappa = 0;
    CHECK_THROWS_AS(run_explainer(inst.pipeline, inst.graph, cfg), config_error);

    cfg = {};
    cfg.requirements.minima = {2, 5, 2};
    cfg.t_b = -1;
    CHECK_THROWS_AS(run_explainer(inst.pipeline, inst.graph, cfg), config_error);
}

TEST_CASE("input already at the minima yields a zero-work rollout") {
    auto inst = fixtures::small_planted();
    ExplainerConfig cfg;
    cfg.kappa = 1;
    cfg.requirements.minima = {static_cast<int>(inst.graph.num_downstream_features()),
                               inst.graph.num_nodes, inst.graph.num_node_features()};
    cfg.permutations = 20;
    auto result = run_explainer(inst.pipeline, inst.graph, cfg);
    CHECK(result.best == full_triple(inst.graph));
}

TEST_CASE("budget-limited mode stops within one pull of the budget") {
    auto inst = fixtures::small_planted();
    ExplainerConfig cfg;
    cfg.kappa = 2;
    cfg.requirements.minima = {2, 5, 2};
    cfg.requirements.budget_limited = true;
    cfg.requirements.c_o = 1.0;
    cfg.permutations = 20;
    cfg.episode.prior_permutations = 10;
    cfg.t_b = 1;
    auto result = run_explainer(inst.pipeline, inst.graph, cfg);
    int n = inst.graph.num_nodes + inst.graph.num_node_features() +
            inst.graph.num_downstream_features();
    double total_budget = n - (2 + 5 + 2);
    // No reachable state costs more than total/min-component-size.
    double max_cost = static_cast<double>(n) / 2.0;
    CHECK(result.spent_budget > 0.0);
    CHECK(result.spent_budget <= total_budget + max_cost + 1e-9);
}
