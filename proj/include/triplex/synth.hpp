#pragma once

#include "triplex/model.hpp"

namespace triplex {

// Barabasi-Albert preferential attachment: `attach`-clique seed, then each new
// node links to `attach` distinct existing nodes with probability proportional
// to degree. Edge count is attach*(n-attach) + attach*(attach-1)/2.
inline Graph generate_ba(int n, int attach, Rng& rng) {
    if (attach < 1 || n <= attach) throw config_error("generate_ba: need n > attach >= 1");
    Graph g;
    g.num_nodes = n;
    std::vector<int> endpoints;  // one entry per degree unit
    for (int a = 0; a < attach; ++a)
        for (int b = a + 1; b < attach; ++b) {
            g.edges.emplace_back(a, b);
            endpoints.push_back(a);
            endpoints.push_back(b);
        }
    if (attach == 1) endpoints.push_back(0);
    for (int v = attach; v < n; ++v) {
        std::set<int> targets;
        while (static_cast<int>(targets.size()) < attach)
            targets.insert(endpoints[rand_index(rng, endpoints.size())]);
        for (int u : targets) {
            g.edges.emplace_back(u, v);
            endpoints.push_back(u);
            endpoints.push_back(v);
        }
    }
    g.node_features.assign(n, {});
    return g;
}

inline Graph generate_er(int n, double p, Rng& rng) {
    if (n < 1 || p < 0.0 || p > 1.0) throw config_error("generate_er: bad parameters");
    Graph g;
    g.num_nodes = n;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (rand_unit(rng) < p) g.edges.emplace_back(a, b);
    g.node_features.assign(n, {});
    return g;
}

enum class MotifKind { house, cycle };

struct MotifSpec {
    MotifKind kind = MotifKind::house;
    int cycle_len = 5;  // cycle motif only

    int num_nodes() const { return kind == MotifKind::house ? 5 : cycle_len; }

    // Edges in motif-local ids. House: a 4-cycle 0-1-2-3 with an apex node 4
    // over the adjacent pair (0, 1).
    std::vector<std::pair<int, int>> edges() const {
        if (kind == MotifKind::house)
            return {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 4}, {1, 4}};
        if (cycle_len < 3) throw config_error("cycle motif needs length >= 3");
        std::vector<std::pair<int, int>> e;
        for (int i = 0; i < cycle_len; ++i) e.emplace_back(i, (i + 1) % cycle_len);
        return e;
    }
};

struct GroundTruth {
    std::set<int> motif_nodes;
    std::set<int> feature_cols;
    std::set<int> downstream;
};

// Appends the motif with fresh node ids and wires it to the base graph with
// `num_attach` bridge edges from distinct base nodes, so no base node touches
// the motif more than once.
inline GroundTruth plant_motif(Graph& g, const MotifSpec& spec, Rng& rng, int num_attach = 2) {
    const int base = g.num_nodes;
    if (num_attach < 1 || num_attach > base)
        throw config_error("plant_motif: bad attachment count");
    GroundTruth truth;
    g.num_nodes += spec.num_nodes();
    g.node_features.resize(g.num_nodes, {});
    for (int i = 0; i < spec.num_nodes(); ++i) truth.motif_nodes.insert(base + i);
    for (const auto& [a, b] : spec.edges()) g.edges.emplace_back(base + a, base + b);
    std::set<int> used;
    while (static_cast<int>(used.size()) < num_attach)
        used.insert(static_cast<int>(rand_index(rng, static_cast<std::size_t>(base))));
    int i = 0;
    for (int u : used)
        g.edges.emplace_back(u, base + i++ % spec.num_nodes());
    return truth;
}

// Node features: column 0 is the motif indicator, the rest uniform noise.
// Downstream features: the designated entry is pushed positive, the rest
// uniform noise.
inline void assign_features(Graph& g, GroundTruth& truth, int node_cols, int downstream_len,
                            int designated, Rng& rng) {
    if (node_cols < 1) throw config_error("assign_features: need >= 1 node feature column");
    if (designated < 0 || designated >= downstream_len)
        throw config_error("assign_features: designated index out of range");
    for (int v = 0; v < g.num_nodes; ++v) {
        g.node_features[v].assign(node_cols, 0.0);
        g.node_features[v][0] = truth.motif_nodes.count(v) ? 1.0 : 0.0;
        for (int c = 1; c < node_cols; ++c) g.node_features[v][c] = rand_unit(rng);
    }
    std::vector<double> x(downstream_len);
    for (auto& v : x) v = rand_unit(rng);
    x[designated] = 1.0 + rand_unit(rng);
    g.downstream_features = x;
    g.label = 1;
    truth.feature_cols = {0};
    truth.downstream = {designated};
}

// One-layer two-unit ReLU GIN reading the indicator column. With s denoting a
// node's indicator plus its neighborhood indicator sum, the units are
// ReLU(s - 1.5) and ReLU(s - 2.5), so their readout difference counts nodes
// with s >= 2.5: exactly the motif nodes (s >= 3) and no base node (s <= 1).
// That makes the pipeline output piecewise constant in every noise feature,
// which the perturbation certificate below checks to 1e-9.
//
// The downstream logit is emb_coeff * (E0 - E1 - |motif|) + coeff * x_desig,
// so the intact motif sits on the steep part of the sigmoid while losing any
// motif node saturates the output low. Keeping the full motif in a mid-slope
// regime keeps its coalition marginals strictly above every partial state's.
inline PipelineModel planted_pipeline(const Graph& g, const GroundTruth& truth, Rng& rng,
                                      double designated_coeff = 1.0, double emb_coeff = 4.0) {
    const int d = g.num_node_features();
    const int n_d = g.num_downstream_features();
    if (d < 1 || n_d < 1) throw config_error("planted_pipeline: features missing");

    PipelineModel p;
    GnnLayer layer;
    layer.eps = 0.0;
    layer.weights.assign(2, std::vector<double>(d, 0.0));
    layer.weights[0][0] = 1.0;
    layer.weights[1][0] = 1.0;
    layer.bias = {-1.5, -2.5};
    layer.activation = Activation::relu;
    layer.aggregation = Aggregation::sum;
    p.upstream.kind = UpstreamKind::gin;
    p.upstream.layers = {layer};
    p.upstream.readout = Readout::sum;

    p.downstream.kind = DownstreamKind::linear_softmax;
    p.downstream.input_dim = n_d + 2;
    p.downstream.num_classes = 2;
    p.downstream.weights.assign(2, std::vector<double>(n_d + 2, 0.0));
    int designated = *truth.downstream.begin();
    p.downstream.weights[1][designated] = designated_coeff;
    p.downstream.weights[1][n_d] = emb_coeff;       // E0
    p.downstream.weights[1][n_d + 1] = -emb_coeff;  // -E1
    p.downstream.bias = {0.0, -emb_coeff * static_cast<double>(truth.motif_nodes.size())};

    p.baseline.assign(n_d, 0.0);
    p.task.type = TaskType::graph_classification;
    p.explained_class = 1;

    // Certificate: 50 joint perturbations of every non-truth feature must
    // leave the output numerically unchanged.
    double ref = raw_pipeline_prob(p, g);
    for (int trial = 0; trial < 50; ++trial) {
        Graph probe = g;
        for (int v = 0; v < probe.num_nodes; ++v)
            for (int c = 0; c < d; ++c)
                if (!truth.feature_cols.count(c))
                    probe.node_features[v][c] += (rand_unit(rng) - 0.5) * 0.6;
        for (int i = 0; i < n_d; ++i)
            if (!truth.downstream.count(i))
                (*probe.downstream_features)[i] += (rand_unit(rng) - 0.5) * 0.6;
        if (std::abs(raw_pipeline_prob(p, probe) - ref) >= 1e-9)
            throw internal_error("planted_pipeline: noise-invariance certificate failed");
    }
    return p;
}

struct PlantedInstance {
    Graph graph;
    PipelineModel pipeline;
    GroundTruth truth;
};

inline PlantedInstance make_planted_instance(int base_nodes, int attach, int node_cols,
                                             int downstream_len, std::uint64_t seed,
                                             MotifSpec motif = {}) {
    Rng rng(seed);
    PlantedInstance inst;
    inst.graph = generate_ba(base_nodes, attach, rng);
    inst.truth = plant_motif(inst.graph, motif, rng);
    int designated = static_cast<int>(rand_index(rng, static_cast<std::size_t>(downstream_len)));
    assign_features(inst.graph, inst.truth, node_cols, downstream_len, designated, rng);
    inst.graph.validate();
    inst.pipeline = planted_pipeline(inst.graph, inst.truth, rng);
    return inst;
}

inline ExplanationTriple truth_triple(const PlantedInstance& inst) {
    ExplanationTriple t;
    t.subgraph_nodes = inst.truth.motif_nodes;
    t.retained_node_features = inst.truth.feature_cols;
    t.retained_downstream = inst.truth.downstream;
    return t;
}

}  // namespace triplex
