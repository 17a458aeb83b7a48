#pragma once

#include "triplex/model.hpp"

namespace triplex {

enum class FidelityKind { plus, minus };

struct FidelityReport {
    FidelityKind kind = FidelityKind::plus;
    double aggregate = 0.0;
    std::vector<double> per_sample;
};

// Fidelity_+ removes the explanation from the input (complement masks and the
// baseline on retained downstream entries) and measures the probability drop;
// Fidelity_- keeps only the explanation. Higher + and lower - are better.
inline FidelityReport fidelity(const PipelineModel& p,
                               const std::vector<std::pair<Graph, ExplanationTriple>>& samples,
                               FidelityKind kind) {
    if (samples.empty()) throw input_error("fidelity: empty sample set");
    FidelityReport report;
    report.kind = kind;
    for (const auto& [g, t] : samples) {
        t.validate(g);
        double full = raw_pipeline_prob(p, g);
        double masked;
        if (kind == FidelityKind::minus) {
            masked = pipeline_eval(p, g, t);
        } else {
            std::set<int> nodes, cols, downstream;
            for (int v = 0; v < g.num_nodes; ++v)
                if (!t.subgraph_nodes.count(v)) nodes.insert(v);
            for (int c = 0; c < g.num_node_features(); ++c)
                if (!t.retained_node_features.count(c)) cols.insert(c);
            for (int i = 0; i < g.num_downstream_features(); ++i)
                if (!t.retained_downstream.count(i)) downstream.insert(i);
            auto x = blend_downstream(g, p.baseline, downstream);
            masked = masked_pipeline_prob(p, g, &nodes, &cols, x);
        }
        double term = full - masked;
        report.per_sample.push_back(term);
        report.aggregate += term;
    }
    report.aggregate /= static_cast<double>(samples.size());
    return report;
}

struct RetrievalScore {
    double precision = 0.0;
    double recall = 0.0;
};

inline RetrievalScore retrieval(const std::set<int>& found, const std::set<int>& truth) {
    RetrievalScore s;
    int hits = 0;
    for (int v : found)
        if (truth.count(v)) ++hits;
    s.precision = found.empty() ? 0.0 : static_cast<double>(hits) / found.size();
    s.recall = truth.empty() ? 0.0 : static_cast<double>(hits) / truth.size();
    return s;
}

struct GroundTruthScores {
    RetrievalScore nodes, node_features, downstream;
};

inline GroundTruthScores ground_truth_scores(const ExplanationTriple& found,
                                             const ExplanationTriple& truth) {
    return {retrieval(found.subgraph_nodes, truth.subgraph_nodes),
            retrieval(found.retained_node_features, truth.retained_node_features),
            retrieval(found.retained_downstream, truth.retained_downstream)};
}

}  // namespace triplex
