#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "triplex/model.hpp"

namespace triplex {

enum class ShapleyMethod { exact, monte_carlo };

struct ShapleyEstimate {
    double value = 0.0;
    double stderror = 0.0;
    int permutations = 1;
    ShapleyMethod method = ShapleyMethod::exact;
};

// Characteristic function over coalitions of opaque players. Player 0 is the
// block player by construction in the three game builders below. Coalition
// evaluations are cached; repeated queries are bit-identical and free.
class CooperativeGame {
  public:
    CooperativeGame(int num_players, std::function<double(const std::vector<bool>&)> payoff)
        : num_players_(num_players),
          payoff_(std::move(payoff)),
          cache_(std::make_shared<std::unordered_map<std::vector<bool>, double>>()),
          evals_(std::make_shared<long long>(0)) {}

    int num_players() const { return num_players_; }

    double value(const std::vector<bool>& coalition) const {
        if (static_cast<int>(coalition.size()) != num_players_)
            throw internal_error("coalition size != player count");
        auto it = cache_->find(coalition);
        if (it != cache_->end()) return it->second;
        double v = payoff_(coalition);
        ++*evals_;
        cache_->emplace(coalition, v);
        return v;
    }

    long long evaluations() const { return *evals_; }

  private:
    int num_players_;
    std::function<double(const std::vector<bool>&)> payoff_;
    std::shared_ptr<std::unordered_map<std::vector<bool>, double>> cache_;
    std::shared_ptr<long long> evals_;
};

struct ImportanceWeights {
    double lambda_subgraph = 1.0;
    double lambda_nodefeat = 1.0;
};

inline constexpr int kDefaultEnumerationCap = 16;

// Exact Shapley value by full coalition enumeration.
inline ShapleyEstimate exact_shapley(const CooperativeGame& game, int player,
                                     int cap = kDefaultEnumerationCap) {
    const int p = game.num_players();
    if (player < 0 || player >= p) throw internal_error("player out of range");
    if (p > cap)
        throw config_error("exact_shapley: " + std::to_string(p) +
                           " players exceeds enumeration cap " + std::to_string(cap) +
                           "; use mc_shapley");
    std::vector<int> others;
    for (int i = 0; i < p; ++i)
        if (i != player) others.push_back(i);

    std::vector<double> fact(p + 1, 1.0);
    for (int i = 1; i <= p; ++i) fact[i] = fact[i - 1] * i;

    double phi = 0.0;
    const std::uint64_t count = 1ULL << others.size();
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        std::vector<bool> coalition(p, false);
        int s = 0;
        for (std::size_t b = 0; b < others.size(); ++b)
            if (mask >> b & 1) {
                coalition[others[b]] = true;
                ++s;
            }
        double without = game.value(coalition);
        coalition[player] = true;
        double with = game.value(coalition);
        phi += fact[s] * fact[p - 1 - s] / fact[p] * (with - without);
    }
    return {phi, 0.0, 1, ShapleyMethod::exact};
}

// Permutation-sampling Monte Carlo estimate: average marginal contribution of
// `player` over T uniformly random player orderings. Deterministic per seed.
inline ShapleyEstimate mc_shapley(const CooperativeGame& game, int player, int T, Rng& rng) {
    const int p = game.num_players();
    if (player < 0 || player >= p) throw internal_error("player out of range");
    if (T < 1) throw config_error("mc_shapley: permutation count must be >= 1");

    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    double sum = 0.0, sumsq = 0.0;
    for (int t = 0; t < T; ++t) {
        for (int i = p - 1; i > 0; --i)
            std::swap(perm[i], perm[rand_index(rng, static_cast<std::size_t>(i) + 1)]);
        std::vector<bool> pre(p, false);
        for (int i : perm) {
            if (i == player) break;
            pre[i] = true;
        }
        double without = game.value(pre);
        pre[player] = true;
        double with = game.value(pre);
        double marginal = with - without;
        sum += marginal;
        sumsq += marginal * marginal;
    }
    double mean = sum / T;
    double se = 0.0;
    if (T > 1) {
        double var = (sumsq - T * mean * mean) / (T - 1);
        if (var > 0.0) se = std::sqrt(var / T);
    }
    return {mean, se, T, ShapleyMethod::monte_carlo};
}

inline ShapleyEstimate mc_shapley(const CooperativeGame& game, int player, int T,
                                  std::uint64_t seed) {
    Rng rng(seed);
    return mc_shapley(game, player, T, rng);
}

// Game over augmented downstream features. Player 0 is the retained set S'
// acting as a block; the singletons are the downstream features outside S'.
// The embedding is held fixed at the triple's masked state.
inline CooperativeGame build_downstream_game(const PipelineModel& p, const Graph& g,
                                             const ExplanationTriple& t) {
    t.validate(g);
    if (!g.downstream_features) throw input_error("graph carries no downstream features");
    auto emb = upstream_eval_masked(p.upstream, g, &t.subgraph_nodes,
                                    &t.retained_node_features, readout_node(p),
                                    p.structural_removal);
    std::vector<int> singles;
    for (int i = 0; i < g.num_downstream_features(); ++i)
        if (!t.retained_downstream.count(i)) singles.push_back(i);

    auto block = t.retained_downstream;
    auto observed = *g.downstream_features;
    auto baseline = p.baseline;
    auto downstream = p.downstream;
    int explained = p.explained_class;

    auto payoff = [=](const std::vector<bool>& coalition) {
        std::vector<double> x = baseline;
        if (coalition[0])
            for (int i : block) x[i] = observed[i];
        for (std::size_t k = 0; k < singles.size(); ++k)
            if (coalition[k + 1]) x[singles[k]] = observed[singles[k]];
        std::vector<double> input = x;
        input.insert(input.end(), emb.begin(), emb.end());
        return downstream_probs(downstream, input)[explained];
    };
    return CooperativeGame(1 + static_cast<int>(singles.size()), payoff);
}

// Game over computational-graph nodes. Player 0 is the masked subgraph (G')^M
// as a block; the singletons are the nodes outside G'. Coalition node unions
// need not be connected.
inline CooperativeGame build_subgraph_game(const PipelineModel& p, const Graph& g,
                                           const ExplanationTriple& t) {
    t.validate(g);
    std::vector<int> singles;
    for (int v = 0; v < g.num_nodes; ++v)
        if (!t.subgraph_nodes.count(v)) singles.push_back(v);

    auto x = blend_downstream(g, p.baseline, t.retained_downstream);
    auto payoff = [&p, &g, subgraph = t.subgraph_nodes, cols = t.retained_node_features,
                   singles, x](const std::vector<bool>& coalition) {
        std::set<int> visible;
        if (coalition[0]) visible = subgraph;
        for (std::size_t k = 0; k < singles.size(); ++k)
            if (coalition[k + 1]) visible.insert(singles[k]);
        return masked_pipeline_prob(p, g, &visible, &cols, x);
    };
    return CooperativeGame(1 + static_cast<int>(singles.size()), payoff);
}

// Game over node-feature columns. Player 0 is the block of columns already
// masked out of the triple; the singletons are the retained columns. The
// downstream input is held fixed at the triple's blended state.
inline CooperativeGame build_nodefeature_game(const PipelineModel& p, const Graph& g,
                                              const ExplanationTriple& t) {
    t.validate(g);
    std::vector<int> block, singles;
    for (int c = 0; c < g.num_node_features(); ++c)
        (t.retained_node_features.count(c) ? singles : block).push_back(c);

    auto x = blend_downstream(g, p.baseline, t.retained_downstream);
    auto payoff = [&p, &g, nodes = t.subgraph_nodes, block, singles,
                   x](const std::vector<bool>& coalition) {
        std::set<int> visible;
        if (coalition[0]) visible.insert(block.begin(), block.end());
        for (std::size_t k = 0; k < singles.size(); ++k)
            if (coalition[k + 1]) visible.insert(singles[k]);
        return masked_pipeline_prob(p, g, &nodes, &visible, x);
    };
    return CooperativeGame(1 + static_cast<int>(singles.size()), payoff);
}

// Mirror of the node-feature game with the retained columns as the block and
// the masked columns as singletons. Used where the quantity of interest is the
// value of the retained component itself (e.g. search priors), not the mask.
inline CooperativeGame build_retained_nodefeature_game(const PipelineModel& p, const Graph& g,
                                                       const ExplanationTriple& t) {
    t.validate(g);
    std::vector<int> block, singles;
    for (int c = 0; c < g.num_node_features(); ++c)
        (t.retained_node_features.count(c) ? block : singles).push_back(c);

    auto x = blend_downstream(g, p.baseline, t.retained_downstream);
    auto payoff = [&p, &g, nodes = t.subgraph_nodes, block, singles,
                   x](const std::vector<bool>& coalition) {
        std::set<int> visible;
        if (coalition[0]) visible.insert(block.begin(), block.end());
        for (std::size_t k = 0; k < singles.size(); ++k)
            if (coalition[k + 1]) visible.insert(singles[k]);
        return masked_pipeline_prob(p, g, &nodes, &visible, x);
    };
    return CooperativeGame(1 + static_cast<int>(singles.size()), payoff);
}

inline CooperativeGame build_game(const PipelineModel& p, const Graph& g,
                                  const ExplanationTriple& t, Component kind) {
    switch (kind) {
        case Component::downstream: return build_downstream_game(p, g, t);
        case Component::nodes: return build_subgraph_game(p, g, t);
        case Component::node_features: return build_nodefeature_game(p, g, t);
    }
    throw internal_error("bad component");
}

struct ScoreParts {
    double total = 0.0;
    ShapleyEstimate downstream, subgraph, nodefeat;
};

// Combined importance score phi(S') + lambda_G * phi(G') + lambda_M * phi(M),
// Monte Carlo estimated and cached by triple key. The per-triple seed is
// derived from (base seed, triple key) so cached scores are independent of
// evaluation order.
class ImportanceScorer {
  public:
    ImportanceScorer(const PipelineModel& pipeline, const Graph& graph,
                     ImportanceWeights weights, int permutations, std::uint64_t seed)
        : pipeline_(&pipeline),
          graph_(&graph),
          weights_(weights),
          permutations_(permutations),
          seed_(seed) {
        if (permutations_ < 1) throw config_error("permutation count must be >= 1");
    }

    const ScoreParts& score(const ExplanationTriple& t) {
        const std::string key = triple_key(t);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;

        ScoreParts parts;
        std::uint64_t h = hash_string(key);
        parts.downstream = mc_shapley(build_downstream_game(*pipeline_, *graph_, t), 0,
                                      permutations_, mix_seed(seed_, h ^ 0x51ULL));
        parts.subgraph = mc_shapley(build_subgraph_game(*pipeline_, *graph_, t), 0,
                                    permutations_, mix_seed(seed_, h ^ 0x52ULL));
        parts.nodefeat = mc_shapley(build_nodefeature_game(*pipeline_, *graph_, t), 0,
                                    permutations_, mix_seed(seed_, h ^ 0x53ULL));
        parts.total = parts.downstream.value + weights_.lambda_subgraph * parts.subgraph.value +
                      weights_.lambda_nodefeat * parts.nodefeat.value;
        return cache_.emplace(key, parts).first->second;
    }

    bool cached(const ExplanationTriple& t) const { return cache_.count(triple_key(t)) > 0; }
    std::size_t cache_size() const { return cache_.size(); }

  private:
    const PipelineModel* pipeline_;
    const Graph* graph_;
    ImportanceWeights weights_;
    int permutations_;
    std::uint64_t seed_;
    std::unordered_map<std::string, ScoreParts> cache_;
};

}  // namespace triplex
