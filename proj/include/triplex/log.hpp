#pragma once

#include <string>
#include <vector>

#include "triplex/graph.hpp"

namespace triplex {

// Progress log with a fixed line grammar, mirrored by the acceptance tests.
class RunLog {
  public:
    void line(const std::string& s) { lines_.push_back(s); }
    void blank() { lines_.emplace_back(); }

    void rollout_header(int rollout, int kappa, long long subgraphs_explored) {
        line("Rollout " + std::to_string(rollout) + "/" + std::to_string(kappa) + ", " +
             std::to_string(subgraphs_explored) + " subgraphs have been explored.");
    }
    void select_random(Component arm, int rollout, int t_b) {
        line(std::string("selecting game '") + arm_name(arm) + "' randomly (rollout " +
             std::to_string(rollout) + " <= " + std::to_string(t_b) + ")");
        blank();
    }
    void select_oracle(Component arm) {
        line(std::string("selecting game '") + arm_name(arm) + "' by oracle");
        blank();
    }
    void playing(Component arm, int k, int budget) {
        line(std::string("playing game '") + arm_name(arm) + "', budget " + std::to_string(k) +
             "/" + std::to_string(budget));
    }
    static std::string sizes(const ExplanationTriple& t) {
        return std::to_string(t.subgraph_nodes.size()) + " nodes, " +
               std::to_string(t.retained_node_features.size()) + " graph features, " +
               std::to_string(t.retained_downstream.size()) + " downstream features";
    }
    void parent_state(const ExplanationTriple& t) { line("parent: " + sizes(t)); }
    void child_state(const ExplanationTriple& t) {
        line("child: " + sizes(t));
        blank();
    }
    void stop(Component arm) {
        line(std::string("selected child node satisfies ") + arm_name(arm) +
             " count requirement, stopping " + arm_name(arm) + " pruning");
    }
    void budget_ended(const ExplanationTriple& t) {
        line("Budget ended with " + std::to_string(t.subgraph_nodes.size()) + " nodes, " +
             std::to_string(t.retained_node_features.size()) + " graph features, and with " +
             std::to_string(t.retained_downstream.size()) + " downstream features");
    }
    void oracle_refit(Component arm, bool refit) {
        line(std::string("Oracle for game '") + arm_name(arm) + "' is " +
             (refit ? "refit" : "not refit"));
        blank();
    }

    const std::vector<std::string>& lines() const { return lines_; }

    std::string text() const {
        std::string out;
        for (const auto& l : lines_) {
            out += l;
            out += '\n';
        }
        return out;
    }

  private:
    std::vector<std::string> lines_;
};

}  // namespace triplex
