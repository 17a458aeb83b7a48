#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "triplex/graph.hpp"

namespace triplex {

enum class Activation { relu, identity };
enum class Aggregation { sum, mean };
enum class Readout { sum, mean, node_select };
enum class UpstreamKind { gin, sage };
enum class DownstreamKind { linear_softmax, tree_ensemble };
enum class TaskType { graph_classification, node_classification };

struct GnnLayer {
    double eps = 0.0;  // GIN only
    std::vector<std::vector<double>> weights;  // out_dim x in_dim (x 2*in_dim for sage)
    std::vector<double> bias;                  // out_dim
    Activation activation = Activation::relu;
    Aggregation aggregation = Aggregation::sum;

    int out_dim() const { return static_cast<int>(weights.size()); }
    int weight_cols() const {
        return weights.empty() ? 0 : static_cast<int>(weights.front().size());
    }
};

struct MessagePassingModel {
    UpstreamKind kind = UpstreamKind::gin;
    std::vector<GnnLayer> layers;
    Readout readout = Readout::mean;

    int input_dim() const {
        if (layers.empty()) return 0;
        int c = layers.front().weight_cols();
        return kind == UpstreamKind::sage ? c / 2 : c;
    }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

    void validate() const {
        if (layers.empty()) throw input_error("upstream model has no layers");
        int width = input_dim();
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& l = layers[k];
            int expect = kind == UpstreamKind::sage ? 2 * width : width;
            if (l.weight_cols() != expect)
                throw input_error("layer " + std::to_string(k) + " width mismatch: expected " +
                                  std::to_string(expect) + " columns, got " +
                                  std::to_string(l.weight_cols()));
            if (static_cast<int>(l.bias.size()) != l.out_dim())
                throw input_error("layer " + std::to_string(k) + " bias size mismatch");
            width = l.out_dim();
        }
    }
};

struct TreeNode {
    // Interior: feature/threshold/left/right; leaf: left == -1 and logits set.
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> leaf_logits;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root
};

struct DownstreamModel {
    DownstreamKind kind = DownstreamKind::linear_softmax;
    int input_dim = 0;
    int num_classes = 2;
    // linear_softmax
    std::vector<std::vector<double>> weights;  // num_classes x input_dim
    std::vector<double> bias;                  // num_classes
    // tree_ensemble
    std::vector<DecisionTree> trees;

    void validate() const {
        if (num_classes < 2) throw input_error("downstream model needs >= 2 classes");
        if (kind == DownstreamKind::linear_softmax) {
            if (static_cast<int>(weights.size()) != num_classes)
                throw input_error("downstream weight rows != num_classes");
            for (const auto& row : weights)
                if (static_cast<int>(row.size()) != input_dim)
                    throw input_error("downstream weight columns != input_dim");
            if (static_cast<int>(bias.size()) != num_classes)
                throw input_error("downstream bias size != num_classes");
        } else {
            for (const auto& tree : trees)
                for (const auto& n : tree.nodes)
                    if (n.left >= 0) {
                        if (n.feature < 0 || n.feature >= input_dim)
                            throw input_error("tree split feature out of range");
                    } else if (static_cast<int>(n.leaf_logits.size()) != num_classes) {
                        throw input_error("tree leaf logit size != num_classes");
                    }
        }
    }
};

struct TaskDescriptor {
    TaskType type = TaskType::graph_classification;
    int seed_node = 0;  // node classification only
    int hops = 0;       // node classification only
};

struct PipelineModel {
    MessagePassingModel upstream;
    DownstreamModel downstream;
    std::vector<double> baseline;  // x*, length n_d
    TaskDescriptor task;
    int explained_class = 0;
    bool structural_removal = false;  // drop edges of hidden nodes at eval time

    void validate() const {
        upstream.validate();
        downstream.validate();
        if (downstream.input_dim !=
            static_cast<int>(baseline.size()) + upstream.output_dim())
            throw input_error("downstream input_dim != baseline size + embedding width");
        if (explained_class < 0 || explained_class >= downstream.num_classes)
            throw input_error("explained_class out of range");
    }
};

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

inline std::vector<double> downstream_probs(const DownstreamModel& m,
                                            const std::vector<double>& input) {
    if (static_cast<int>(input.size()) != m.input_dim)
        throw input_error("downstream input size " + std::to_string(input.size()) +
                          " != expected " + std::to_string(m.input_dim));
    std::vector<double> logits(m.num_classes, 0.0);
    if (m.kind == DownstreamKind::linear_softmax) {
        for (int c = 0; c < m.num_classes; ++c) {
            double z = m.bias[c];
            for (int i = 0; i < m.input_dim; ++i) z += m.weights[c][i] * input[i];
            logits[c] = z;
        }
    } else {
        for (const auto& tree : m.trees) {
            int cur = 0;
            while (tree.nodes[cur].left >= 0) {
                const auto& n = tree.nodes[cur];
                cur = input[n.feature] <= n.threshold ? n.left : n.right;
            }
            const auto& leaf = tree.nodes[cur].leaf_logits;
            for (int c = 0; c < m.num_classes; ++c) logits[c] += leaf[c];
        }
        if (!m.bias.empty())
            for (int c = 0; c < m.num_classes; ++c) logits[c] += m.bias[c];
    }
    return softmax(logits);
}

namespace detail {

inline double activate(double x, Activation a) {
    return a == Activation::relu ? (x > 0.0 ? x : 0.0) : x;
}

}  // namespace detail

// Forward pass with optional node/column visibility masks. `visible_nodes` /
// `visible_cols` == nullptr means everything visible. Masking zeroes the
// input features only; topology is kept unless `structural_removal` is set,
// in which case messages to and from hidden nodes are dropped.
inline std::vector<double> upstream_eval_masked(const MessagePassingModel& model,
                                                const Graph& g,
                                                const std::set<int>* visible_nodes,
                                                const std::set<int>* visible_cols,
                                                std::optional<int> select_node = std::nullopt,
                                                bool structural_removal = false) {
    model.validate();
    if (g.num_node_features() != model.input_dim())
        throw input_error("node feature width " + std::to_string(g.num_node_features()) +
                          " != model input width " + std::to_string(model.input_dim()));
    const int m = g.num_nodes;
    std::vector<std::vector<double>> h(m, std::vector<double>(model.input_dim(), 0.0));
    for (int v = 0; v < m; ++v) {
        if (visible_nodes && !visible_nodes->count(v)) continue;
        for (int c = 0; c < model.input_dim(); ++c) {
            if (visible_cols && !visible_cols->count(c)) continue;
            h[v][c] = g.node_features[v][c];
        }
    }
    auto sources = message_sources(g);
    auto hidden = [&](int v) {
        return structural_removal && visible_nodes && !visible_nodes->count(v);
    };

    for (const auto& layer : model.layers) {
        const int in = static_cast<int>(h.front().size());
        std::vector<std::vector<double>> next(m, std::vector<double>(layer.out_dim(), 0.0));
        for (int i = 0; i < m; ++i) {
            std::vector<double> agg(in, 0.0);
            int deg = 0;
            if (!hidden(i)) {
                for (int j : sources[i]) {
                    if (hidden(j)) continue;
                    for (int c = 0; c < in; ++c) agg[c] += h[j][c];
                    ++deg;
                }
            }
            if (layer.aggregation == Aggregation::mean && deg > 0)
                for (auto& v : agg) v /= deg;
            std::vector<double> pre;
            if (model.kind == UpstreamKind::gin) {
                pre.resize(in);
                for (int c = 0; c < in; ++c) pre[c] = (1.0 + layer.eps) * h[i][c] + agg[c];
            } else {
                pre.reserve(2 * in);
                pre.insert(pre.end(), h[i].begin(), h[i].end());
                pre.insert(pre.end(), agg.begin(), agg.end());
            }
            for (int o = 0; o < layer.out_dim(); ++o) {
                double z = layer.bias[o];
                for (std::size_t c = 0; c < pre.size(); ++c) z += layer.weights[o][c] * pre[c];
                next[i][o] = detail::activate(z, layer.activation);
            }
        }
        h = std::move(next);
    }

    const int D = model.output_dim();
    if (model.readout == Readout::node_select || select_node) {
        int v = select_node.value_or(0);
        if (v < 0 || v >= m) throw input_error("readout node out of range");
        return h[v];
    }
    std::vector<double> out(D, 0.0);
    for (int i = 0; i < m; ++i)
        for (int c = 0; c < D; ++c) out[c] += h[i][c];
    if (model.readout == Readout::mean && m > 0)
        for (auto& v : out) v /= m;
    return out;
}

inline std::vector<double> upstream_eval(const MessagePassingModel& model, const Graph& g,
                                         std::optional<int> select_node = std::nullopt) {
    return upstream_eval_masked(model, g, nullptr, nullptr, select_node);
}

// Downstream tabular input: retained entries at observed values, the rest at
// the baseline x*.
inline std::vector<double> blend_downstream(const Graph& g, const std::vector<double>& baseline,
                                            const std::set<int>& retained) {
    if (!g.downstream_features)
        throw input_error("graph carries no downstream features");
    const auto& x = *g.downstream_features;
    if (x.size() != baseline.size())
        throw input_error("downstream feature length != baseline length");
    std::vector<double> out = baseline;
    for (int i : retained) {
        if (i < 0 || i >= static_cast<int>(x.size()))
            throw input_error("retained downstream index out of range");
        out[i] = x[i];
    }
    return out;
}

inline std::optional<int> readout_node(const PipelineModel& p) {
    return p.task.type == TaskType::node_classification
               ? std::optional<int>(p.task.seed_node)
               : std::nullopt;
}

// Probability of the explained class for an arbitrary visibility state.
inline double masked_pipeline_prob(const PipelineModel& p, const Graph& g,
                                   const std::set<int>* visible_nodes,
                                   const std::set<int>* visible_cols,
                                   const std::vector<double>& downstream_input_prefix) {
    auto emb = upstream_eval_masked(p.upstream, g, visible_nodes, visible_cols,
                                    readout_node(p), p.structural_removal);
    std::vector<double> input = downstream_input_prefix;
    input.insert(input.end(), emb.begin(), emb.end());
    return downstream_probs(p.downstream, input)[p.explained_class];
}

inline double pipeline_eval(const PipelineModel& p, const Graph& g,
                            const ExplanationTriple& t,
                            const std::optional<std::vector<double>>& downstream_override =
                                std::nullopt) {
    t.validate(g);
    std::vector<double> x =
        downstream_override ? *downstream_override
                            : blend_downstream(g, p.baseline, t.retained_downstream);
    return masked_pipeline_prob(p, g, &t.subgraph_nodes, &t.retained_node_features, x);
}

// Raw model score on the unmasked input.
inline double raw_pipeline_prob(const PipelineModel& p, const Graph& g) {
    if (!g.downstream_features) throw input_error("graph carries no downstream features");
    return masked_pipeline_prob(p, g, nullptr, nullptr, *g.downstream_features);
}

struct Restriction {
    Graph graph;
    std::vector<int> original_ids;  // new id -> old id, ascending
    int seed_node = 0;              // new id of the restricted-to node
};

// Induced subgraph on the k-hop neighborhood of v. For k >= the layer count,
// node-select(v) on the restriction equals the full-graph evaluation exactly.
inline Restriction restrict_to_computational_graph(const Graph& g, int v, int k) {
    if (v < 0 || v >= g.num_nodes) throw input_error("seed node out of range");
    // Influence flows along message edges; traverse them in reverse.
    std::vector<std::vector<int>> back(g.num_nodes);
    for (const auto& [a, b] : g.edges) {
        back[b].push_back(a);
        if (!g.directed) back[a].push_back(b);
    }
    std::vector<int> dist(g.num_nodes, -1);
    std::queue<int> q;
    dist[v] = 0;
    q.push(v);
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        if (dist[u] == k) continue;
        for (int w : back[u])
            if (dist[w] < 0) {
                dist[w] = dist[u] + 1;
                q.push(w);
            }
    }
    Restriction r;
    std::vector<int> remap(g.num_nodes, -1);
    for (int u = 0; u < g.num_nodes; ++u)
        if (dist[u] >= 0) {
            remap[u] = static_cast<int>(r.original_ids.size());
            r.original_ids.push_back(u);
        }
    r.graph.num_nodes = static_cast<int>(r.original_ids.size());
    r.graph.directed = g.directed;
    for (const auto& [a, b] : g.edges)
        if (remap[a] >= 0 && remap[b] >= 0)
            r.graph.edges.emplace_back(remap[a], remap[b]);
    for (int old : r.original_ids) r.graph.node_features.push_back(g.node_features[old]);
    r.graph.downstream_features = g.downstream_features;
    r.graph.label = g.label;
    r.seed_node = remap[v];
    return r;
}

inline std::vector<double> compute_baseline(
    const std::vector<std::vector<double>>& downstream_vectors) {
    if (downstream_vectors.empty()) throw input_error("compute_baseline: empty dataset");
    std::vector<double> mean(downstream_vectors.front().size(), 0.0);
    for (const auto& x : downstream_vectors) {
        if (x.size() != mean.size()) throw input_error("compute_baseline: ragged dataset");
        for (std::size_t i = 0; i < x.size(); ++i) mean[i] += x[i];
    }
    for (auto& v : mean) v /= static_cast<double>(downstream_vectors.size());
    return mean;
}

struct Scaler {
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<bool> constant;  // zero-variance columns clamped to std = 1
};

inline Scaler fit_scaler(const std::vector<std::vector<double>>& data) {
    if (data.empty()) throw input_error("fit_scaler: empty dataset");
    Scaler s;
    s.mean = compute_baseline(data);
    const std::size_t d = s.mean.size();
    s.std.assign(d, 0.0);
    for (const auto& x : data)
        for (std::size_t i = 0; i < d; ++i) {
            double dv = x[i] - s.mean[i];
            s.std[i] += dv * dv;
        }
    s.constant.assign(d, false);
    for (std::size_t i = 0; i < d; ++i) {
        s.std[i] = std::sqrt(s.std[i] / static_cast<double>(data.size()));
        if (s.std[i] <= 0.0) {
            s.std[i] = 1.0;
            s.constant[i] = true;
        }
    }
    return s;
}

inline std::vector<double> apply_scaler(const Scaler& s, const std::vector<double>& x) {
    if (x.size() != s.mean.size()) throw input_error("apply_scaler: width mismatch");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - s.mean[i]) / s.std[i];
    return out;
}

}  // namespace triplex
