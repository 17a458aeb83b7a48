#pragma once

#include <algorithm>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "triplex/core.hpp"

namespace triplex {

// Immutable after construction/validation. All mutation produces new values.
struct Graph {
    int num_nodes = 0;
    bool directed = false;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::vector<double>> node_features;  // num_nodes x n
    std::optional<std::vector<std::vector<double>>> edge_features;
    std::optional<std::vector<double>> downstream_features;
    std::optional<int> label;

    int num_node_features() const {
        return node_features.empty() ? 0 : static_cast<int>(node_features.front().size());
    }
    int num_downstream_features() const {
        return downstream_features ? static_cast<int>(downstream_features->size()) : 0;
    }

    void validate() const {
        for (const auto& [u, v] : edges) {
            if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
                throw input_error("edge endpoint out of range: (" + std::to_string(u) + "," +
                                  std::to_string(v) + ")");
            if (u == v) throw input_error("self-loop rejected at node " + std::to_string(u));
        }
        if (static_cast<int>(node_features.size()) != num_nodes)
            throw input_error("node_features row count " + std::to_string(node_features.size()) +
                              " != num_nodes " + std::to_string(num_nodes));
        const int n = num_node_features();
        for (const auto& row : node_features)
            if (static_cast<int>(row.size()) != n)
                throw input_error("ragged node_features rows");
        if (edge_features && edge_features->size() != edges.size())
            throw input_error("edge_features row count != edge count");
    }
};

// Adjacency used for message passing: for undirected graphs every edge works
// both ways; for directed graphs node i aggregates from its in-neighbors.
inline std::vector<std::vector<int>> message_sources(const Graph& g) {
    std::vector<std::vector<int>> adj(g.num_nodes);
    for (const auto& [u, v] : g.edges) {
        adj[v].push_back(u);
        if (!g.directed) adj[u].push_back(v);
    }
    return adj;
}

// Undirected view, used for connectivity bookkeeping and k-hop traversal.
inline std::vector<std::vector<int>> undirected_adjacency(const Graph& g) {
    std::vector<std::vector<int>> adj(g.num_nodes);
    for (const auto& [u, v] : g.edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    return adj;
}

// Connected components of the subgraph induced by `nodes`, each sorted.
inline std::vector<std::vector<int>> induced_components(const Graph& g,
                                                        const std::set<int>& nodes) {
    auto adj = undirected_adjacency(g);
    std::set<int> pending = nodes;
    std::vector<std::vector<int>> comps;
    while (!pending.empty()) {
        int start = *pending.begin();
        std::vector<int> comp;
        std::queue<int> q;
        q.push(start);
        pending.erase(start);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            comp.push_back(u);
            for (int w : adj[u]) {
                auto it = pending.find(w);
                if (it != pending.end()) {
                    pending.erase(it);
                    q.push(w);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

inline bool induced_connected(const Graph& g, const std::set<int>& nodes) {
    if (nodes.empty()) return false;
    return induced_components(g, nodes).size() == 1;
}

// The (S', G', M) state: retained downstream features, connected subgraph
// node set, retained node-feature columns.
struct ExplanationTriple {
    std::set<int> retained_downstream;
    std::set<int> subgraph_nodes;
    std::set<int> retained_node_features;

    int size_of(Component c) const {
        switch (c) {
            case Component::downstream: return static_cast<int>(retained_downstream.size());
            case Component::nodes: return static_cast<int>(subgraph_nodes.size());
            case Component::node_features:
                return static_cast<int>(retained_node_features.size());
        }
        return 0;
    }

    const std::set<int>& component(Component c) const {
        switch (c) {
            case Component::downstream: return retained_downstream;
            case Component::nodes: return subgraph_nodes;
            case Component::node_features: return retained_node_features;
        }
        throw internal_error("bad component");
    }

    std::set<int>& component(Component c) {
        return const_cast<std::set<int>&>(
            static_cast<const ExplanationTriple*>(this)->component(c));
    }

    bool operator==(const ExplanationTriple&) const = default;

    void validate(const Graph& g) const {
        for (int i : retained_downstream)
            if (i < 0 || i >= g.num_downstream_features())
                throw input_error("downstream index out of range: " + std::to_string(i));
        for (int v : subgraph_nodes)
            if (v < 0 || v >= g.num_nodes)
                throw input_error("subgraph node out of range: " + std::to_string(v));
        for (int c : retained_node_features)
            if (c < 0 || c >= g.num_node_features())
                throw input_error("node-feature index out of range: " + std::to_string(c));
        if (!subgraph_nodes.empty() && !induced_connected(g, subgraph_nodes))
            throw input_error("subgraph is not connected");
    }
};

inline ExplanationTriple full_triple(const Graph& g) {
    ExplanationTriple t;
    for (int i = 0; i < g.num_downstream_features(); ++i) t.retained_downstream.insert(i);
    for (int v = 0; v < g.num_nodes; ++v) t.subgraph_nodes.insert(v);
    for (int c = 0; c < g.num_node_features(); ++c) t.retained_node_features.insert(c);
    return t;
}

// Canonical, component-scoped key for an index set. Equal sets of the same
// kind always map to the same key; kinds never collide.
inline std::string state_key(const std::set<int>& ids, Component kind) {
    std::string key;
    switch (kind) {
        case Component::downstream: key = "d:"; break;
        case Component::nodes: key = "n:"; break;
        case Component::node_features: key = "f:"; break;
    }
    bool first = true;
    for (int i : ids) {
        if (!first) key += ',';
        key += std::to_string(i);
        first = false;
    }
    return key;
}

inline std::string state_key(const ExplanationTriple& t, Component kind) {
    return state_key(t.component(kind), kind);
}

inline std::string triple_key(const ExplanationTriple& t) {
    return state_key(t, Component::downstream) + "|" + state_key(t, Component::nodes) + "|" +
           state_key(t, Component::node_features);
}

// Zero-padding: node rows outside the subgraph are zeroed, retained rows keep
// only retained feature columns. Topology, edge features and the downstream
// vector are untouched.
inline Graph apply_masks(const Graph& g, const ExplanationTriple& t) {
    t.validate(g);
    Graph out = g;
    for (int v = 0; v < g.num_nodes; ++v) {
        if (!t.subgraph_nodes.count(v)) {
            std::fill(out.node_features[v].begin(), out.node_features[v].end(), 0.0);
            continue;
        }
        for (int c = 0; c < g.num_node_features(); ++c)
            if (!t.retained_node_features.count(c)) out.node_features[v][c] = 0.0;
    }
    return out;
}

// Removes `node` from the subgraph. If removal disconnects the induced
// subgraph, graph tasks keep the largest component (ties: smallest contained
// node id); node tasks keep the component containing `anchor`.
inline ExplanationTriple prune_node(const ExplanationTriple& t, const Graph& g, int node,
                                    std::optional<int> anchor = std::nullopt) {
    if (!t.subgraph_nodes.count(node))
        throw input_error("prune_node: node " + std::to_string(node) + " not in subgraph");
    std::set<int> remaining = t.subgraph_nodes;
    remaining.erase(node);
    if (remaining.empty()) throw input_error("prune_node: removal would empty the subgraph");

    auto comps = induced_components(g, remaining);
    ExplanationTriple out = t;
    if (comps.size() == 1) {
        out.subgraph_nodes = remaining;
        return out;
    }
    const std::vector<int>* keep = nullptr;
    if (anchor) {
        for (const auto& c : comps)
            if (std::binary_search(c.begin(), c.end(), *anchor)) keep = &c;
    }
    if (!keep) {
        // Largest component, ties broken by smallest contained node id. Also
        // the fallback when the explained node itself was pruned.
        for (const auto& c : comps) {
            if (!keep || c.size() > keep->size() ||
                (c.size() == keep->size() && c.front() < keep->front()))
                keep = &c;
        }
    }
    out.subgraph_nodes = std::set<int>(keep->begin(), keep->end());
    return out;
}

}  // namespace triplex
