#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "triplex/bandit.hpp"
#include "triplex/synth.hpp"

namespace triplex {

using json = nlohmann::json;

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw input_error("parse error in " + path + ": " + e.what());
    }
}

inline void save_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write file: " + path);
    out << text;
}

namespace detail {

template <typename T>
T field(const json& j, const std::string& name, const std::string& where) {
    if (!j.contains(name)) throw input_error(where + ": missing field '" + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception& e) {
        throw input_error(where + ": bad field '" + name + "': " + e.what());
    }
}

template <typename T>
T field_or(const json& j, const std::string& name, const std::string& where, T fallback) {
    if (!j.contains(name)) return fallback;
    return field<T>(j, name, where);
}

inline std::set<int> int_set(const json& j, const std::string& name, const std::string& where) {
    auto v = field<std::vector<int>>(j, name, where);
    return {v.begin(), v.end()};
}

}  // namespace detail

inline json graph_to_json(const Graph& g) {
    json j;
    j["num_nodes"] = g.num_nodes;
    j["directed"] = g.directed;
    j["edges"] = json::array();
    for (const auto& [u, v] : g.edges) j["edges"].push_back({u, v});
    j["node_features"] = g.node_features;
    if (g.edge_features) j["edge_features"] = *g.edge_features;
    if (g.downstream_features) j["downstream_features"] = *g.downstream_features;
    if (g.label) j["label"] = *g.label;
    return j;
}

inline Graph graph_from_json(const json& j) {
    const std::string where = "graph";
    Graph g;
    g.num_nodes = detail::field<int>(j, "num_nodes", where);
    g.directed = detail::field_or<bool>(j, "directed", where, false);
    std::set<std::pair<int, int>> seen;
    for (const auto& e : detail::field<std::vector<std::vector<int>>>(j, "edges", where)) {
        if (e.size() != 2) throw input_error("graph: edge is not a pair");
        std::pair<int, int> p{e[0], e[1]};
        auto canon = g.directed || p.first <= p.second ? p : std::pair{p.second, p.first};
        if (seen.insert(canon).second) g.edges.push_back(p);
    }
    g.node_features =
        detail::field<std::vector<std::vector<double>>>(j, "node_features", where);
    if (j.contains("edge_features"))
        g.edge_features =
            detail::field<std::vector<std::vector<double>>>(j, "edge_features", where);
    if (j.contains("downstream_features"))
        g.downstream_features =
            detail::field<std::vector<double>>(j, "downstream_features", where);
    if (j.contains("label")) g.label = detail::field<int>(j, "label", where);
    g.validate();
    return g;
}

inline json pipeline_to_json(const PipelineModel& p) {
    json up;
    up["kind"] = p.upstream.kind == UpstreamKind::gin ? "gin" : "sage";
    up["readout"] = p.upstream.readout == Readout::sum
                        ? "sum"
                        : p.upstream.readout == Readout::mean ? "mean" : "node_select";
    up["layers"] = json::array();
    for (const auto& l : p.upstream.layers) {
        json jl;
        jl["eps"] = l.eps;
        jl["weights"] = l.weights;
        jl["bias"] = l.bias;
        jl["activation"] = l.activation == Activation::relu ? "relu" : "identity";
        jl["aggregation"] = l.aggregation == Aggregation::sum ? "sum" : "mean";
        up["layers"].push_back(jl);
    }

    json down;
    down["kind"] =
        p.downstream.kind == DownstreamKind::linear_softmax ? "linear_softmax" : "tree_ensemble";
    down["input_dim"] = p.downstream.input_dim;
    down["num_classes"] = p.downstream.num_classes;
    if (p.downstream.kind == DownstreamKind::linear_softmax) {
        down["weights"] = p.downstream.weights;
        down["bias"] = p.downstream.bias;
    } else {
        down["trees"] = json::array();
        for (const auto& tree : p.downstream.trees) {
            json jt = json::array();
            for (const auto& n : tree.nodes) {
                json jn;
                if (n.left >= 0) {
                    jn["feature"] = n.feature;
                    jn["threshold"] = n.threshold;
                    jn["left"] = n.left;
                    jn["right"] = n.right;
                } else {
                    jn["logits"] = n.leaf_logits;
                }
                jt.push_back(jn);
            }
            down["trees"].push_back(jt);
        }
        if (!p.downstream.bias.empty()) down["bias"] = p.downstream.bias;
    }

    json task;
    task["type"] = p.task.type == TaskType::graph_classification ? "graph_classification"
                                                                  : "node_classification";
    if (p.task.type == TaskType::node_classification) {
        task["seed_node"] = p.task.seed_node;
        task["hops"] = p.task.hops;
    }

    json j;
    j["upstream"] = up;
    j["downstream"] = down;
    j["baseline"] = p.baseline;
    j["task"] = task;
    j["explained_class"] = p.explained_class;
    j["structural_removal"] = p.structural_removal;
    return j;
}

inline PipelineModel pipeline_from_json(const json& j) {
    PipelineModel p;
    const json& up = j.contains("upstream") ? j.at("upstream")
                                            : throw input_error("pipeline: missing 'upstream'");
    std::string ukind = detail::field<std::string>(up, "kind", "upstream");
    if (ukind == "gin")
        p.upstream.kind = UpstreamKind::gin;
    else if (ukind == "sage")
        p.upstream.kind = UpstreamKind::sage;
    else
        throw input_error("upstream: unknown kind '" + ukind + "'");
    std::string readout = detail::field_or<std::string>(up, "readout", "upstream", "mean");
    if (readout == "sum")
        p.upstream.readout = Readout::sum;
    else if (readout == "mean")
        p.upstream.readout = Readout::mean;
    else if (readout == "node_select")
        p.upstream.readout = Readout::node_select;
    else
        throw input_error("upstream: unknown readout '" + readout + "'");
    if (!up.contains("layers")) throw input_error("upstream: missing 'layers'");
    for (const auto& jl : up.at("layers")) {
        GnnLayer l;
        l.eps = detail::field_or<double>(jl, "eps", "layer", 0.0);
        l.weights = detail::field<std::vector<std::vector<double>>>(jl, "weights", "layer");
        l.bias = detail::field<std::vector<double>>(jl, "bias", "layer");
        std::string act = detail::field_or<std::string>(jl, "activation", "layer", "relu");
        if (act == "relu")
            l.activation = Activation::relu;
        else if (act == "identity")
            l.activation = Activation::identity;
        else
            throw input_error("layer: unknown activation '" + act + "'");
        std::string agg = detail::field_or<std::string>(jl, "aggregation", "layer", "sum");
        if (agg == "sum")
            l.aggregation = Aggregation::sum;
        else if (agg == "mean")
            l.aggregation = Aggregation::mean;
        else
            throw input_error("layer: unknown aggregation '" + agg + "'");
        p.upstream.layers.push_back(std::move(l));
    }

    const json& down = j.contains("downstream")
                           ? j.at("downstream")
                           : throw input_error("pipeline: missing 'downstream'");
    std::string dkind = detail::field<std::string>(down, "kind", "downstream");
    if (dkind == "linear_softmax")
        p.downstream.kind = DownstreamKind::linear_softmax;
    else if (dkind == "tree_ensemble")
        p.downstream.kind = DownstreamKind::tree_ensemble;
    else
        throw input_error("downstream: unknown kind '" + dkind + "'");
    p.downstream.input_dim = detail::field<int>(down, "input_dim", "downstream");
    p.downstream.num_classes = detail::field<int>(down, "num_classes", "downstream");
    if (p.downstream.kind == DownstreamKind::linear_softmax) {
        p.downstream.weights =
            detail::field<std::vector<std::vector<double>>>(down, "weights", "downstream");
        p.downstream.bias = detail::field<std::vector<double>>(down, "bias", "downstream");
    } else {
        if (!down.contains("trees")) throw input_error("downstream: missing 'trees'");
        for (const auto& jt : down.at("trees")) {
            DecisionTree tree;
            for (const auto& jn : jt) {
                TreeNode n;
                if (jn.contains("logits")) {
                    n.leaf_logits = detail::field<std::vector<double>>(jn, "logits", "tree");
                } else {
                    n.feature = detail::field<int>(jn, "feature", "tree");
                    n.threshold = detail::field<double>(jn, "threshold", "tree");
                    n.left = detail::field<int>(jn, "left", "tree");
                    n.right = detail::field<int>(jn, "right", "tree");
                }
                tree.nodes.push_back(std::move(n));
            }
            p.downstream.trees.push_back(std::move(tree));
        }
        p.downstream.bias =
            detail::field_or<std::vector<double>>(down, "bias", "downstream", {});
    }

    p.baseline = detail::field<std::vector<double>>(j, "baseline", "pipeline");
    if (j.contains("task")) {
        const json& task = j.at("task");
        std::string type = detail::field<std::string>(task, "type", "task");
        if (type == "graph_classification") {
            p.task.type = TaskType::graph_classification;
        } else if (type == "node_classification") {
            p.task.type = TaskType::node_classification;
            p.task.seed_node = detail::field<int>(task, "seed_node", "task");
            p.task.hops = detail::field_or<int>(task, "hops", "task", 0);
        } else {
            throw input_error("task: unknown type '" + type + "'");
        }
    }
    p.explained_class = detail::field_or<int>(j, "explained_class", "pipeline", 0);
    p.structural_removal = detail::field_or<bool>(j, "structural_removal", "pipeline", false);
    p.validate();
    return p;
}

inline ExplainerConfig config_from_json(const json& j) {
    const std::string where = "config";
    ExplainerConfig cfg;
    cfg.kappa = detail::field_or<int>(j, "kappa", where, cfg.kappa);
    if (j.contains("budgets")) {
        auto b = detail::field<std::vector<int>>(j, "budgets", where);
        if (b.size() != 3)
            throw input_error("config: budgets must list (downstream, nodes, node_features)");
        cfg.budgets = {b[0], b[1], b[2]};
    }
    if (j.contains("minima")) {
        auto m = detail::field<std::vector<int>>(j, "minima", where);
        if (m.size() != 3)
            throw input_error("config: minima must list (downstream, nodes, node_features)");
        cfg.requirements.minima = {m[0], m[1], m[2]};
    }
    if (j.contains("total_min"))
        cfg.requirements.total_min = detail::field<int>(j, "total_min", where);
    cfg.requirements.budget_limited =
        detail::field_or<bool>(j, "budget_limited", where, false);
    cfg.requirements.c_o = detail::field_or<double>(j, "c_o", where, 1.0);
    cfg.weights.lambda_subgraph =
        detail::field_or<double>(j, "lambda_subgraph", where, 1.0);
    cfg.weights.lambda_nodefeat =
        detail::field_or<double>(j, "lambda_nodefeat", where, 1.0);
    cfg.permutations = detail::field_or<int>(j, "permutations", where, cfg.permutations);
    cfg.episode.exploration_c =
        detail::field_or<double>(j, "exploration_c", where, cfg.episode.exploration_c);
    cfg.episode.n_child = detail::field_or<int>(j, "n_child", where, cfg.episode.n_child);
    std::string order = detail::field_or<std::string>(j, "node_order", where, "low_to_high");
    if (order == "low_to_high")
        cfg.episode.node_order = NodeOrder::low_to_high;
    else if (order == "high_to_low")
        cfg.episode.node_order = NodeOrder::high_to_low;
    else
        throw input_error("config: unknown node_order '" + order + "'");
    cfg.episode.prior_permutations = detail::field_or<int>(j, "prior_permutations", where,
                                                           cfg.episode.prior_permutations);
    cfg.episode.randomize_child_order =
        detail::field_or<bool>(j, "randomize_child_order", where, false);
    cfg.t_b = detail::field_or<int>(j, "t_b", where, cfg.t_b);
    cfg.seed = detail::field_or<std::uint64_t>(j, "seed", where, 0);
    std::string mode = detail::field_or<std::string>(j, "bandit_mode", where, "contextual");
    if (mode == "contextual")
        cfg.bandit_mode = BanditMode::contextual;
    else if (mode == "mab")
        cfg.bandit_mode = BanditMode::mab;
    else if (mode == "random")
        cfg.bandit_mode = BanditMode::random_policy;
    else
        throw input_error("config: unknown bandit_mode '" + mode + "'");
    cfg.oracle_batch = detail::field_or<int>(j, "oracle_batch", where, cfg.oracle_batch);
    cfg.fidelity_reward = detail::field_or<bool>(j, "fidelity_reward", where, false);
    return cfg;
}

inline json config_to_json(const ExplainerConfig& cfg) {
    json j;
    j["kappa"] = cfg.kappa;
    j["budgets"] = cfg.budgets;
    j["minima"] = std::vector<int>{cfg.requirements.minima.downstream,
                                   cfg.requirements.minima.nodes,
                                   cfg.requirements.minima.node_features};
    if (cfg.requirements.total_min) j["total_min"] = *cfg.requirements.total_min;
    j["budget_limited"] = cfg.requirements.budget_limited;
    j["c_o"] = cfg.requirements.c_o;
    j["lambda_subgraph"] = cfg.weights.lambda_subgraph;
    j["lambda_nodefeat"] = cfg.weights.lambda_nodefeat;
    j["permutations"] = cfg.permutations;
    j["exploration_c"] = cfg.episode.exploration_c;
    j["n_child"] = cfg.episode.n_child;
    j["node_order"] =
        cfg.episode.node_order == NodeOrder::low_to_high ? "low_to_high" : "high_to_low";
    j["prior_permutations"] = cfg.episode.prior_permutations;
    j["randomize_child_order"] = cfg.episode.randomize_child_order;
    j["t_b"] = cfg.t_b;
    j["seed"] = cfg.seed;
    j["bandit_mode"] = cfg.bandit_mode == BanditMode::contextual
                           ? "contextual"
                           : cfg.bandit_mode == BanditMode::mab ? "mab" : "random";
    j["oracle_batch"] = cfg.oracle_batch;
    j["fidelity_reward"] = cfg.fidelity_reward;
    return j;
}

struct ExplanationRecord {
    std::string graph_path, pipeline_path;
    ExplanationTriple triple;
    ScoreParts parts;
    std::optional<double> fidelity_plus, fidelity_minus;
    std::vector<double> rollout_scores;
    std::uint64_t seed = 0;
};

inline json record_to_json(const ExplanationRecord& r) {
    auto estimate = [](const ShapleyEstimate& e) {
        json je;
        je["value"] = e.value;
        je["stderr"] = e.stderror;
        je["permutations"] = e.permutations;
        je["method"] = e.method == ShapleyMethod::exact ? "exact" : "monte_carlo";
        return je;
    };
    json j;
    j["graph"] = r.graph_path;
    j["pipeline"] = r.pipeline_path;
    j["retained_downstream"] =
        std::vector<int>(r.triple.retained_downstream.begin(), r.triple.retained_downstream.end());
    j["subgraph_nodes"] =
        std::vector<int>(r.triple.subgraph_nodes.begin(), r.triple.subgraph_nodes.end());
    j["retained_node_features"] = std::vector<int>(r.triple.retained_node_features.begin(),
                                                   r.triple.retained_node_features.end());
    j["score"] = r.parts.total;
    j["shapley"]["downstream"] = estimate(r.parts.downstream);
    j["shapley"]["subgraph"] = estimate(r.parts.subgraph);
    j["shapley"]["node_features"] = estimate(r.parts.nodefeat);
    if (r.fidelity_plus) j["fidelity_plus"] = *r.fidelity_plus;
    if (r.fidelity_minus) j["fidelity_minus"] = *r.fidelity_minus;
    j["rollout_scores"] = r.rollout_scores;
    j["seed"] = r.seed;
    return j;
}

// Graphviz export. Explanation nodes are enlarged; the retained feature sets
// are listed in an annotation node since highlight colors are caller-specific.
inline std::string to_dot(const Graph& g, const ExplanationTriple& t) {
    t.validate(g);
    std::ostringstream out;
    out << (g.directed ? "digraph" : "graph") << " explanation {\n";
    out << "  node [shape=circle, width=0.3];\n";
    for (int v = 0; v < g.num_nodes; ++v) {
        out << "  n" << v << " [label=\"" << v << "\"";
        if (t.subgraph_nodes.count(v)) out << ", width=0.6, penwidth=3, style=bold";
        out << "];\n";
    }
    const char* arrow = g.directed ? " -> " : " -- ";
    for (const auto& [u, v] : g.edges) {
        out << "  n" << u << arrow << "n" << v;
        if (t.subgraph_nodes.count(u) && t.subgraph_nodes.count(v)) out << " [penwidth=2]";
        out << ";\n";
    }
    auto join = [](const std::set<int>& s) {
        std::string r;
        for (int i : s) r += (r.empty() ? "" : ",") + std::to_string(i);
        return r.empty() ? std::string("-") : r;
    };
    out << "  legend [shape=box, label=\"node features: " << join(t.retained_node_features)
        << "\\ndownstream features: " << join(t.retained_downstream) << "\"];\n";
    out << "}\n";
    return out.str();
}

inline json ground_truth_to_json(const GroundTruth& truth) {
    json j;
    j["motif_nodes"] = std::vector<int>(truth.motif_nodes.begin(), truth.motif_nodes.end());
    j["feature_cols"] = std::vector<int>(truth.feature_cols.begin(), truth.feature_cols.end());
    j["downstream"] = std::vector<int>(truth.downstream.begin(), truth.downstream.end());
    return j;
}

}  // namespace triplex
