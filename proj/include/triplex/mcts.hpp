#pragma once

#include <array>
#include <optional>
#include <unordered_map>

#include "triplex/log.hpp"
#include "triplex/shapley.hpp"

namespace triplex {

struct StatEntry {
    bool has_prior = false;
    double prior = 0.0;       // P(s, a)
    long long visits = 0;     // N(s, a)
    double total_reward = 0.0;  // w(s, a)

    double q() const { return total_reward / std::max<long long>(visits, 1); }
};

// (state key, action kind) -> {P, N, w}; persists across all rollouts.
class SearchStats {
  public:
    StatEntry& entry(Component kind, const std::string& key) {
        return maps_[static_cast<int>(kind)][key];
    }
    const StatEntry* find(Component kind, const std::string& key) const {
        const auto& m = maps_[static_cast<int>(kind)];
        auto it = m.find(key);
        return it == m.end() ? nullptr : &it->second;
    }
    long long state_count(Component kind) const {
        return static_cast<long long>(maps_[static_cast<int>(kind)].size());
    }

  private:
    std::array<std::unordered_map<std::string, StatEntry>, kNumComponents> maps_;
};

enum class NodeOrder { low_to_high, high_to_low };

struct Minima {
    int downstream = 2;
    int nodes = 5;
    int node_features = 2;

    int of(Component c) const {
        switch (c) {
            case Component::downstream: return downstream;
            case Component::nodes: return nodes;
            case Component::node_features: return node_features;
        }
        return 0;
    }
};

struct EpisodeConfig {
    double exploration_c = 10.0;
    int n_child = 12;
    NodeOrder node_order = NodeOrder::low_to_high;
    int prior_permutations = 100;
    bool randomize_child_order = false;

    void validate() const {
        if (exploration_c < 0.0) throw config_error("exploration constant must be >= 0");
        if (n_child < 1) throw config_error("n_child must be >= 1");
        if (prior_permutations < 1) throw config_error("prior permutation count must be >= 1");
    }
};

struct ChildCandidate {
    int action = -1;  // removed node id or feature index
    ExplanationTriple triple;
    std::string key;  // state key of the changed component
};

// Candidate prunes one step below `t` for the given component. Node removals
// are limited to the n_child lowest (Low2high) or highest degree subgraph
// nodes; feature removals consider every retained index.
inline std::vector<ChildCandidate> enumerate_children(const ExplanationTriple& t,
                                                      const Graph& g, Component kind,
                                                      const EpisodeConfig& cfg,
                                                      const Minima& minima,
                                                      std::optional<int> anchor = std::nullopt,
                                                      Rng* shuffle_rng = nullptr) {
    std::vector<ChildCandidate> children;
    if (t.size_of(kind) <= minima.of(kind)) return children;

    std::vector<int> candidates;
    if (kind == Component::nodes) {
        auto adj = undirected_adjacency(g);
        std::vector<std::pair<int, int>> degree_id;  // (induced degree, node)
        for (int v : t.subgraph_nodes) {
            int deg = 0;
            for (int w : adj[v])
                if (t.subgraph_nodes.count(w)) ++deg;
            degree_id.emplace_back(deg, v);
        }
        std::sort(degree_id.begin(), degree_id.end(),
                  [&](const auto& a, const auto& b) {
                      if (a.first != b.first)
                          return cfg.node_order == NodeOrder::low_to_high ? a.first < b.first
                                                                          : a.first > b.first;
                      return a.second < b.second;
                  });
        for (std::size_t i = 0; i < degree_id.size() && static_cast<int>(i) < cfg.n_child; ++i)
            candidates.push_back(degree_id[i].second);
    } else {
        const auto& set = t.component(kind);
        candidates.assign(set.begin(), set.end());
    }

    for (int action : candidates) {
        ChildCandidate c;
        c.action = action;
        if (kind == Component::nodes) {
            c.triple = prune_node(t, g, action, anchor);
        } else {
            c.triple = t;
            c.triple.component(kind).erase(action);
        }
        c.key = state_key(c.triple, kind);
        children.push_back(std::move(c));
    }
    if (cfg.randomize_child_order && shuffle_rng) {
        for (std::size_t i = children.size(); i > 1; --i)
            std::swap(children[i - 1], children[rand_index(*shuffle_rng, i)]);
    }
    return children;
}

// Prior P(s, a): Monte Carlo Shapley of the child component in its own game,
// holding the other two components at their current values. The component is
// always the retained set, so for node features the mirrored game with the
// retained columns as the block is used. Memoized by the child component's
// state key and reused across episodes even if the other components have
// since changed.
inline double child_prior(const PipelineModel& p, const Graph& g,
                          const ExplanationTriple& child, Component kind,
                          int prior_permutations, std::uint64_t prior_seed,
                          SearchStats& stats) {
    const std::string key = state_key(child, kind);
    StatEntry& e = stats.entry(kind, key);
    if (!e.has_prior) {
        auto game = kind == Component::node_features
                        ? build_retained_nodefeature_game(p, g, child)
                        : build_game(p, g, child, kind);
        auto est = mc_shapley(game, 0, prior_permutations,
                              mix_seed(prior_seed, hash_string(key)));
        e.prior = est.value;
        e.has_prior = true;
    }
    return e.prior;
}

// Tree policy: argmax of w/max(N,1) + c * P * sqrt(max(sum_N, 1))/(1 + N).
// Ties go to the larger prior, then the smaller canonical key.
inline const ChildCandidate& select_child(const std::vector<ChildCandidate>& children,
                                          SearchStats& stats, Component kind, double c) {
    if (children.empty()) throw internal_error("select_child: no children");
    long long sibling_visits = 0;
    for (const auto& child : children) sibling_visits += stats.entry(kind, child.key).visits;
    double sqrt_sum = std::sqrt(static_cast<double>(std::max<long long>(sibling_visits, 1)));

    const ChildCandidate* best = nullptr;
    double best_score = 0.0, best_prior = 0.0;
    for (const auto& child : children) {
        const StatEntry& e = stats.entry(kind, child.key);
        double score = e.q() + c * e.prior * sqrt_sum / (1.0 + e.visits);
        bool better = !best || score > best_score ||
                      (score == best_score &&
                       (e.prior > best_prior || (e.prior == best_prior && child.key < best->key)));
        if (better) {
            best = &child;
            best_score = score;
            best_prior = e.prior;
        }
    }
    return *best;
}

struct EpisodeRecord {
    Component kind = Component::nodes;
    std::vector<ExplanationTriple> history;  // H_0 = start, then one per prune
    ExplanationTriple terminal;
    bool hit_minimum = false;
};

struct EpisodeContext {
    const PipelineModel& pipeline;
    const Graph& graph;
    SearchStats& stats;
    EpisodeConfig config;
    Minima minima;
    std::optional<int> anchor;
    std::uint64_t prior_seed = 0;
    RunLog* log = nullptr;
    Rng* rng = nullptr;
};

// One budget-limited episode of the kind's search tree: up to `budget`
// prunes, each via enumerate_children -> child_prior -> select_child,
// stopping early when the component reaches its minimum.
inline EpisodeRecord run_episode(EpisodeContext& ctx, const ExplanationTriple& start,
                                 Component kind, int budget) {
    if (budget < 1) throw config_error("episode budget must be >= 1");
    if (start.size_of(kind) <= ctx.minima.of(kind))
        throw config_error("run_episode called with component already at its minimum");
    ctx.config.validate();

    EpisodeRecord record;
    record.kind = kind;
    record.history.push_back(start);
    ExplanationTriple current = start;

    for (int k = 1; k <= budget && current.size_of(kind) > ctx.minima.of(kind); ++k) {
        auto children = enumerate_children(current, ctx.graph, kind, ctx.config, ctx.minima,
                                           ctx.anchor, ctx.rng);
        if (children.empty()) break;
        for (const auto& child : children)
            child_prior(ctx.pipeline, ctx.graph, child.triple, kind,
                        ctx.config.prior_permutations, ctx.prior_seed, ctx.stats);
        const ChildCandidate& chosen =
            select_child(children, ctx.stats, kind, ctx.config.exploration_c);
        if (ctx.log) {
            ctx.log->playing(kind, k, budget);
            ctx.log->parent_state(current);
            ctx.log->child_state(chosen.triple);
        }
        current = chosen.triple;
        record.history.push_back(current);
        if (current.size_of(kind) <= ctx.minima.of(kind)) {
            record.hit_minimum = true;
            if (ctx.log) ctx.log->stop(kind);
            break;
        }
    }
    record.terminal = current;
    return record;
}

// Episode-end update: every visited state of the episode's kind gains one
// visit and the full episode reward.
inline void backpropagate(SearchStats& stats, const EpisodeRecord& record, double reward) {
    for (const auto& t : record.history) {
        StatEntry& e = stats.entry(record.kind, state_key(t, record.kind));
        e.visits += 1;
        e.total_reward += reward;
    }
}

}  // namespace triplex
