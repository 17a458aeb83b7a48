#pragma once

#include <array>

#include "triplex/mcts.hpp"
#include "triplex/metrics.hpp"

namespace triplex {

enum class BanditMode { contextual, mab, random_policy };

// Featurized bandit context: normalized retained sizes plus the most recent
// importance score.
struct ContextVector {
    std::array<double, 4> values{};  // |G'|/m, |M^c|/n, |S'^c|/n_d, last score
};

inline ContextVector make_context(const ExplanationTriple& t, const Graph& g,
                                  double last_score) {
    ContextVector ctx;
    ctx.values[0] = g.num_nodes > 0
                        ? static_cast<double>(t.subgraph_nodes.size()) / g.num_nodes
                        : 0.0;
    ctx.values[1] = g.num_node_features() > 0
                        ? static_cast<double>(t.retained_node_features.size()) /
                              g.num_node_features()
                        : 0.0;
    ctx.values[2] = g.num_downstream_features() > 0
                        ? static_cast<double>(t.retained_downstream.size()) /
                              g.num_downstream_features()
                        : 0.0;
    ctx.values[3] = last_score;
    return ctx;
}

// Ridge-regularized linear least squares on [1, context]; closed form via
// Gaussian elimination on the 5x5 normal equations.
class LinearOracle {
  public:
    explicit LinearOracle(double ridge = 1e-3) : ridge_(ridge) {}

    void add(const ContextVector& ctx, double reward) {
        history_.emplace_back(ctx, reward);
        ++pending_;
    }

    void refit() {
        constexpr int d = 5;
        std::array<std::array<double, d + 1>, d> a{};
        for (int i = 0; i < d; ++i) a[i][i] = ridge_;
        for (const auto& [ctx, y] : history_) {
            std::array<double, d> row{1.0, ctx.values[0], ctx.values[1], ctx.values[2],
                                      ctx.values[3]};
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) a[i][j] += row[i] * row[j];
                a[i][d] += row[i] * y;
            }
        }
        for (int col = 0; col < d; ++col) {
            int pivot = col;
            for (int r = col + 1; r < d; ++r)
                if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
            std::swap(a[col], a[pivot]);
            if (std::abs(a[col][col]) < 1e-300) continue;
            for (int r = 0; r < d; ++r) {
                if (r == col) continue;
                double f = a[r][col] / a[col][col];
                for (int j = col; j <= d; ++j) a[r][j] -= f * a[col][j];
            }
        }
        for (int i = 0; i < d; ++i)
            beta_[i] = std::abs(a[i][i]) < 1e-300 ? 0.0 : a[i][d] / a[i][i];
        fitted_ = true;
        pending_ = 0;
    }

    double predict(const ContextVector& ctx) const {
        if (!fitted_) return 0.0;
        return beta_[0] + beta_[1] * ctx.values[0] + beta_[2] * ctx.values[1] +
               beta_[3] * ctx.values[2] + beta_[4] * ctx.values[3];
    }

    double mean_reward() const {
        if (history_.empty()) return 0.0;
        double s = 0.0;
        for (const auto& [ctx, y] : history_) s += y;
        return s / static_cast<double>(history_.size());
    }

    bool fitted() const { return fitted_; }
    int pending() const { return pending_; }
    std::size_t observations() const { return history_.size(); }

  private:
    double ridge_;
    std::vector<std::pair<ContextVector, double>> history_;
    std::array<double, 5> beta_{};
    bool fitted_ = false;
    int pending_ = 0;
};

struct BanditState {
    std::set<Component> active;
    std::array<LinearOracle, kNumComponents> oracles;
    int t_b = 5;
    BanditMode mode = BanditMode::contextual;

    LinearOracle& oracle(Component c) { return oracles[static_cast<int>(c)]; }
    const LinearOracle& oracle(Component c) const { return oracles[static_cast<int>(c)]; }
};

// Uniform among active arms while rollout index < t_b (or always, under the
// random policy); afterwards argmax of per-arm predictions.
inline Component select_arm(const BanditState& state, int rollout_index,
                            const ContextVector& ctx, Rng& rng) {
    if (state.active.empty())
        throw internal_error("select_arm: no active arms (requirements already satisfied)");
    std::vector<Component> arms(state.active.begin(), state.active.end());
    bool explore = state.mode == BanditMode::random_policy || rollout_index < state.t_b;
    if (explore) return arms[rand_index(rng, arms.size())];
    Component best = arms.front();
    double best_pred = -std::numeric_limits<double>::infinity();
    for (Component arm : arms) {
        const auto& oracle = state.oracle(arm);
        double pred = state.mode == BanditMode::mab ? oracle.mean_reward()
                                                    : oracle.predict(ctx);
        if (pred > best_pred) {
            best_pred = pred;
            best = arm;
        }
    }
    return best;
}

inline void update_oracle(BanditState& state, Component arm, const ContextVector& ctx,
                          double reward, bool refit) {
    auto& oracle = state.oracle(arm);
    oracle.add(ctx, reward);
    if (refit) oracle.refit();
}

// Budget-limited arm pulling costs: cheaper for larger components.
struct ArmCosts {
    double downstream = 0.0;
    double nodes = 0.0;
    double node_features = 0.0;

    double of(Component c) const {
        switch (c) {
            case Component::downstream: return downstream;
            case Component::nodes: return nodes;
            case Component::node_features: return node_features;
        }
        return 0.0;
    }
};

inline ArmCosts arm_costs(const ExplanationTriple& t, double c_o) {
    double nf = static_cast<double>(t.retained_node_features.size());
    double ds = static_cast<double>(t.retained_downstream.size());
    double nodes = static_cast<double>(t.subgraph_nodes.size());
    if (nf <= 0.0 || ds <= 0.0 || nodes <= 0.0)
        throw config_error("arm_costs: zero-size component");
    double total = nf + ds + nodes;
    return {total / ds * c_o, total / nodes * c_o, total / nf * c_o};
}

struct ExplanationRequirements {
    Minima minima;
    std::optional<int> total_min;
    bool budget_limited = false;
    double c_o = 1.0;

    void validate() const {
        if (minima.downstream < 1 || minima.nodes < 1 || minima.node_features < 1)
            throw config_error("component minima must be >= 1");
        if (total_min &&
            *total_min < minima.downstream + minima.nodes + minima.node_features)
            throw config_error("total size bound below the sum of component minima");
    }
};

inline bool requirements_satisfied(const ExplanationTriple& t,
                                   const ExplanationRequirements& req) {
    for (Component c :
         {Component::downstream, Component::nodes, Component::node_features})
        if (t.size_of(c) > req.minima.of(c)) return false;
    if (req.total_min) {
        int total = t.size_of(Component::downstream) + t.size_of(Component::nodes) +
                    t.size_of(Component::node_features);
        if (total > *req.total_min) return false;
    }
    return true;
}

struct ExplainerConfig {
    int kappa = 20;
    std::array<int, kNumComponents> budgets{3, 5, 5};  // downstream, nodes, node_features
    ExplanationRequirements requirements;
    ImportanceWeights weights;
    int permutations = 100;
    EpisodeConfig episode;  // exploration_c, n_child, node order, prior permutations
    int t_b = 5;
    std::uint64_t seed = 0;
    BanditMode bandit_mode = BanditMode::contextual;
    int oracle_batch = 1;
    bool fidelity_reward = false;  // Fidelity_+ of the episode state instead of Eq-style score

    void validate(const Graph& g) const {
        if (kappa < 1) throw config_error("kappa must be >= 1");
        for (int b : budgets)
            if (b < 1) throw config_error("episode budgets must be >= 1");
        if (permutations < 1) throw config_error("permutation count must be >= 1");
        if (t_b < 0) throw config_error("t_b must be >= 0");
        if (oracle_batch < 1) throw config_error("oracle batch size must be >= 1");
        requirements.validate();
        episode.validate();
        const Minima& minima = requirements.minima;
        if (minima.nodes > g.num_nodes)
            throw config_error("node minimum exceeds graph size");
        if (minima.downstream > g.num_downstream_features())
            throw config_error("downstream minimum exceeds feature count");
        if (minima.node_features > g.num_node_features())
            throw config_error("node-feature minimum exceeds feature count");
    }
};

struct RolloutResult {
    ExplanationTriple triple;
    double score = 0.0;
};

struct ExplainResult {
    ExplanationTriple best;
    ScoreParts best_parts;
    int best_rollout = 0;
    std::vector<RolloutResult> rollouts;
    long long subgraphs_explored = 0;
    double spent_budget = 0.0;  // budget-limited mode only
};

// Top-level driver: kappa rollouts, each resetting the triple to the full
// input and alternating arm selection, one MCTS episode, reward evaluation,
// backpropagation and oracle update until the requirements hold. Search
// statistics and the reward cache persist across rollouts.
inline ExplainResult run_explainer(const PipelineModel& pipeline, const Graph& graph,
                                   const ExplainerConfig& cfg, RunLog* log = nullptr) {
    graph.validate();
    pipeline.validate();
    cfg.validate(graph);
    if (pipeline.task.type == TaskType::graph_classification) {
        ExplanationTriple root = full_triple(graph);
        if (!induced_connected(graph, root.subgraph_nodes))
            throw input_error("input graph must be connected for graph-level explanations");
    }

    std::optional<int> anchor;
    if (pipeline.task.type == TaskType::node_classification)
        anchor = pipeline.task.seed_node;

    Rng rng(cfg.seed);
    ImportanceScorer scorer(pipeline, graph, cfg.weights, cfg.permutations,
                            mix_seed(cfg.seed, 0xA11CE));
    SearchStats stats;
    EpisodeContext ep{pipeline,
                      graph,
                      stats,
                      cfg.episode,
                      cfg.requirements.minima,
                      anchor,
                      mix_seed(cfg.seed, 0xB0B)};
    ep.log = log;
    ep.rng = &rng;

    BanditState bandit;
    bandit.t_b = cfg.t_b;
    bandit.mode = cfg.bandit_mode;

    const ExplanationTriple root = full_triple(graph);
    const double total_budget =
        cfg.requirements.budget_limited
            ? static_cast<double>(graph.num_nodes + graph.num_node_features() +
                                  graph.num_downstream_features()) -
                  (cfg.requirements.total_min
                       ? *cfg.requirements.total_min
                       : cfg.requirements.minima.downstream + cfg.requirements.minima.nodes +
                             cfg.requirements.minima.node_features)
            : 0.0;

    auto episode_reward = [&](const ExplanationTriple& t) -> double {
        if (cfg.fidelity_reward) {
            std::vector<std::pair<Graph, ExplanationTriple>> sample{{graph, t}};
            return fidelity(pipeline, sample, FidelityKind::plus).aggregate;
        }
        return scorer.score(t).total;
    };

    ExplainResult result;
    double last_score = 0.0;
    double spent = 0.0;

    for (int j = 0; j < cfg.kappa; ++j) {
        if (log) {
            log->rollout_header(j, cfg.kappa, stats.state_count(Component::nodes));
            log->blank();
        }
        ExplanationTriple triple = root;
        bandit.active.clear();
        for (Component c :
             {Component::downstream, Component::nodes, Component::node_features})
            if (triple.size_of(c) > cfg.requirements.minima.of(c)) bandit.active.insert(c);

        while (!requirements_satisfied(triple, cfg.requirements) &&
               !bandit.active.empty()) {
            if (cfg.requirements.budget_limited && spent >= total_budget) break;
            ContextVector ctx = make_context(triple, graph, last_score);
            Component arm = select_arm(bandit, j, ctx, rng);
            if (log) {
                bool explore =
                    bandit.mode == BanditMode::random_policy || j < bandit.t_b;
                if (explore)
                    log->select_random(arm, j, bandit.t_b);
                else
                    log->select_oracle(arm);
            }
            if (cfg.requirements.budget_limited)
                spent += arm_costs(triple, cfg.requirements.c_o).of(arm);

            EpisodeRecord record =
                run_episode(ep, triple, arm, cfg.budgets[static_cast<int>(arm)]);
            triple = record.terminal;
            if (log) log->budget_ended(triple);

            double reward = episode_reward(triple);
            last_score = reward;
            backpropagate(stats, record, reward);

            bool need_oracle_soon =
                bandit.mode == BanditMode::contextual && j >= bandit.t_b - 1;
            bool refit = need_oracle_soon &&
                         (!bandit.oracle(arm).fitted() ||
                          bandit.oracle(arm).pending() + 1 >= cfg.oracle_batch);
            update_oracle(bandit, arm, ctx, reward, refit);
            if (log) log->oracle_refit(arm, refit);

            if (triple.size_of(arm) <= cfg.requirements.minima.of(arm))
                bandit.active.erase(arm);
        }

        double score = scorer.score(triple).total;
        result.rollouts.push_back({triple, score});
    }

    result.best_rollout = 0;
    for (std::size_t j = 1; j < result.rollouts.size(); ++j)
        if (result.rollouts[j].score > result.rollouts[result.best_rollout].score)
            result.best_rollout = static_cast<int>(j);
    result.best = result.rollouts[result.best_rollout].triple;
    result.best_parts = scorer.score(result.best);
    result.subgraphs_explored = stats.state_count(Component::nodes);
    result.spent_budget = spent;
    return result;
}

}  // namespace triplex
