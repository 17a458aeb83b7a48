#include <chrono>
#include <iostream>

#include <CLI11.hpp>

#include "triplex/io.hpp"

namespace {

using namespace triplex;

ExplanationTriple triple_from_record(const json& j) {
    ExplanationTriple t;
    for (int i : detail::field<std::vector<int>>(j, "retained_downstream", "record"))
        t.retained_downstream.insert(i);
    for (int v : detail::field<std::vector<int>>(j, "subgraph_nodes", "record"))
        t.subgraph_nodes.insert(v);
    for (int c : detail::field<std::vector<int>>(j, "retained_node_features", "record"))
        t.retained_node_features.insert(c);
    return t;
}

std::set<int> to_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

struct ExplainArgs {
    std::string graph_path, pipeline_path, config_path;
    std::string record_path, log_path, dot_path;
    bool with_fidelity = false;
};

int run_explain(CLI::App* cmd, const ExplainArgs& args, const ExplainerConfig& cli_cfg) {
    Graph g = graph_from_json(load_json_file(args.graph_path));
    PipelineModel p = pipeline_from_json(load_json_file(args.pipeline_path));

    ExplainerConfig cfg =
        args.config_path.empty() ? ExplainerConfig{} : config_from_json(load_json_file(args.config_path));
    auto take = [&](const char* flag, auto member) {
        if (cmd->count(flag)) member();
    };
    take("--kappa", [&] { cfg.kappa = cli_cfg.kappa; });
    take("--budgets", [&] { cfg.budgets = cli_cfg.budgets; });
    take("--minima", [&] { cfg.requirements.minima = cli_cfg.requirements.minima; });
    take("--total-min", [&] { cfg.requirements.total_min = cli_cfg.requirements.total_min; });
    take("--budget-limited",
         [&] { cfg.requirements.budget_limited = cli_cfg.requirements.budget_limited; });
    take("--c-o", [&] { cfg.requirements.c_o = cli_cfg.requirements.c_o; });
    take("--lambda-subgraph",
         [&] { cfg.weights.lambda_subgraph = cli_cfg.weights.lambda_subgraph; });
    take("--lambda-nodefeat",
         [&] { cfg.weights.lambda_nodefeat = cli_cfg.weights.lambda_nodefeat; });
    take("--permutations", [&] { cfg.permutations = cli_cfg.permutations; });
    take("--prior-permutations",
         [&] { cfg.episode.prior_permutations = cli_cfg.episode.prior_permutations; });
    take("--exploration-c", [&] { cfg.episode.exploration_c = cli_cfg.episode.exploration_c; });
    take("--n-child", [&] { cfg.episode.n_child = cli_cfg.episode.n_child; });
    take("--node-order", [&] { cfg.episode.node_order = cli_cfg.episode.node_order; });
    take("--randomize-child-order",
         [&] { cfg.episode.randomize_child_order = cli_cfg.episode.randomize_child_order; });
    take("--t-b", [&] { cfg.t_b = cli_cfg.t_b; });
    take("--seed", [&] { cfg.seed = cli_cfg.seed; });
    take("--bandit-mode", [&] { cfg.bandit_mode = cli_cfg.bandit_mode; });
    take("--oracle-batch", [&] { cfg.oracle_batch = cli_cfg.oracle_batch; });
    take("--fidelity-reward", [&] { cfg.fidelity_reward = cli_cfg.fidelity_reward; });

    RunLog log;
    auto start = std::chrono::steady_clock::now();
    ExplainResult result = run_explainer(p, g, cfg, &log);
    std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    ExplanationRecord record;
    record.graph_path = args.graph_path;
    record.pipeline_path = args.pipeline_path;
    record.triple = result.best;
    record.parts = result.best_parts;
    for (const auto& r : result.rollouts) record.rollout_scores.push_back(r.score);
    record.seed = cfg.seed;
    std::cerr << "explain: " << elapsed.count() << " s, " << result.subgraphs_explored
              << " subgraphs explored\n";
    if (args.with_fidelity) {
        std::vector<std::pair<Graph, ExplanationTriple>> sample{{g, result.best}};
        record.fidelity_plus = fidelity(p, sample, FidelityKind::plus).aggregate;
        record.fidelity_minus = fidelity(p, sample, FidelityKind::minus).aggregate;
    }

    std::string record_text = record_to_json(record).dump(2) + "\n";
    if (args.record_path.empty())
        std::cout << record_text;
    else
        save_text_file(args.record_path, record_text);
    if (!args.log_path.empty())
        save_text_file(args.log_path, log.text());
    else if (!args.record_path.empty())
        std::cout << log.text();
    if (!args.dot_path.empty()) save_text_file(args.dot_path, to_dot(g, result.best));
    return 0;
}

int run_evaluate(const std::string& graph_path, const std::string& pipeline_path,
                 const std::string& record_path, const std::string& truth_path) {
    Graph g = graph_from_json(load_json_file(graph_path));
    PipelineModel p = pipeline_from_json(load_json_file(pipeline_path));
    ExplanationTriple t = triple_from_record(load_json_file(record_path));
    t.validate(g);

    std::vector<std::pair<Graph, ExplanationTriple>> sample{{g, t}};
    json out;
    out["fidelity_plus"] = fidelity(p, sample, FidelityKind::plus).aggregate;
    out["fidelity_minus"] = fidelity(p, sample, FidelityKind::minus).aggregate;
    if (!truth_path.empty()) {
        json jt = load_json_file(truth_path);
        ExplanationTriple truth;
        truth.subgraph_nodes = detail::int_set(jt, "motif_nodes", "truth");
        truth.retained_node_features = detail::int_set(jt, "feature_cols", "truth");
        truth.retained_downstream = detail::int_set(jt, "downstream", "truth");
        auto scores = ground_truth_scores(t, truth);
        out["nodes"] = {{"precision", scores.nodes.precision}, {"recall", scores.nodes.recall}};
        out["node_features"] = {{"precision", scores.node_features.precision},
                                {"recall", scores.node_features.recall}};
        out["downstream"] = {{"precision", scores.downstream.precision},
                             {"recall", scores.downstream.recall}};
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int run_synth(int nodes, int attach, int node_cols, int downstream_len, std::uint64_t seed,
              const std::string& motif_kind, int cycle_len, const std::string& graph_out,
              const std::string& truth_out, const std::string& pipeline_out) {
    MotifSpec motif;
    if (motif_kind == "house") {
        motif.kind = MotifKind::house;
    } else if (motif_kind == "cycle") {
        motif.kind = MotifKind::cycle;
        motif.cycle_len = cycle_len;
    } else {
        throw config_error("unknown motif kind '" + motif_kind + "'");
    }
    PlantedInstance inst =
        make_planted_instance(nodes, attach, node_cols, downstream_len, seed, motif);
    save_text_file(graph_out, graph_to_json(inst.graph).dump(2) + "\n");
    if (!truth_out.empty())
        save_text_file(truth_out, ground_truth_to_json(inst.truth).dump(2) + "\n");
    if (!pipeline_out.empty())
        save_text_file(pipeline_out, pipeline_to_json(inst.pipeline).dump(2) + "\n");
    return 0;
}

int run_oracle_check(const std::string& graph_path, const std::string& pipeline_path,
                     const std::string& record_path, int permutations, std::uint64_t seed) {
    Graph g = graph_from_json(load_json_file(graph_path));
    PipelineModel p = pipeline_from_json(load_json_file(pipeline_path));
    ExplanationTriple t;
    if (!record_path.empty()) {
        t = triple_from_record(load_json_file(record_path));
    } else {
        // Default probe state: every other element retained, anchored so that
        // the node set stays connected.
        ExplanationTriple full = full_triple(g);
        t = full;
        int drop = 0;
        for (int i : full.retained_downstream)
            if (drop++ % 2) t.retained_downstream.erase(i);
        drop = 0;
        for (int c : full.retained_node_features)
            if (drop++ % 2) t.retained_node_features.erase(c);
    }
    t.validate(g);

    json out;
    bool ok = true;
    for (Component kind :
         {Component::downstream, Component::nodes, Component::node_features}) {
        auto game = build_game(p, g, t, kind);
        auto exact = exact_shapley(game, 0);
        auto mc = mc_shapley(game, 0, permutations,
                             mix_seed(seed, hash_string(arm_name(kind))));
        double err = std::abs(mc.value - exact.value);
        double z = mc.stderror > 0.0 ? err / mc.stderror : (err > 0.0 ? 1e18 : 0.0);
        json entry;
        entry["players"] = game.num_players();
        entry["exact"] = exact.value;
        entry["monte_carlo"] = mc.value;
        entry["stderr"] = mc.stderror;
        entry["abs_error"] = err;
        entry["z_score"] = z;
        out[arm_name(kind)] = entry;
        if (z > 3.0 && err > 1e-12) ok = false;
    }
    out["within_3_stderr"] = ok;
    std::cout << out.dump(2) << "\n";
    return ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilevel explanation triples for graph model pipelines"};
    app.require_subcommand(1);

    ExplainArgs ea;
    ExplainerConfig cli_cfg;
    std::vector<int> budgets{3, 5, 5}, minima{2, 5, 2};
    int total_min = 0;
    std::string node_order = "low_to_high", bandit_mode = "contextual";

    CLI::App* explain = app.add_subcommand("explain", "Search for an explanation triple");
    explain->add_option("--graph", ea.graph_path, "Graph file")->required();
    explain->add_option("--pipeline", ea.pipeline_path, "Pipeline model file")->required();
    explain->add_option("--config", ea.config_path, "Config file (flags override it)");
    explain->add_option("--record", ea.record_path, "Explanation record output path");
    explain->add_option("--log", ea.log_path, "Progress log output path");
    explain->add_option("--dot", ea.dot_path, "DOT visualization output path");
    explain->add_flag("--with-fidelity", ea.with_fidelity, "Also report fidelity+/-");
    explain->add_option("--kappa", cli_cfg.kappa, "Rollout count");
    explain->add_option("--budgets", budgets, "Episode budgets (downstream nodes node-features)")
        ->expected(3);
    explain->add_option("--minima", minima, "Component minima (downstream nodes node-features)")
        ->expected(3);
    explain->add_option("--total-min", total_min, "Total explanation size bound");
    explain->add_flag("--budget-limited", cli_cfg.requirements.budget_limited,
                      "Enable budget-limited arm costs");
    explain->add_option("--c-o", cli_cfg.requirements.c_o, "Base arm cost");
    explain->add_option("--lambda-subgraph", cli_cfg.weights.lambda_subgraph,
                        "Subgraph score weight");
    explain->add_option("--lambda-nodefeat", cli_cfg.weights.lambda_nodefeat,
                        "Node-feature score weight");
    explain->add_option("--permutations", cli_cfg.permutations, "Reward MC permutations");
    explain->add_option("--prior-permutations", cli_cfg.episode.prior_permutations,
                        "Prior MC permutations");
    explain->add_option("--exploration-c", cli_cfg.episode.exploration_c,
                        "Tree-policy exploration constant");
    explain->add_option("--n-child", cli_cfg.episode.n_child, "Node-child consideration cap");
    explain->add_option("--node-order", node_order, "Node candidate order")
        ->check(CLI::IsMember({"low_to_high", "high_to_low"}));
    explain->add_flag("--randomize-child-order", cli_cfg.episode.randomize_child_order,
                      "Shuffle child candidates");
    explain->add_option("--t-b", cli_cfg.t_b, "Exploration breakpoint");
    explain->add_option("--seed", cli_cfg.seed, "RNG seed");
    explain->add_option("--bandit-mode", bandit_mode, "Arm selection policy")
        ->check(CLI::IsMember({"contextual", "mab", "random"}));
    explain->add_option("--oracle-batch", cli_cfg.oracle_batch, "Refit oracle every k pulls");
    explain->add_flag("--fidelity-reward", cli_cfg.fidelity_reward,
                      "Use fidelity+ as the episode reward");

    std::string ev_graph, ev_pipeline, ev_record, ev_truth;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Score an explanation record");
    evaluate->add_option("--graph", ev_graph, "Graph file")->required();
    evaluate->add_option("--pipeline", ev_pipeline, "Pipeline model file")->required();
    evaluate->add_option("--record", ev_record, "Explanation record file")->required();
    evaluate->add_option("--truth", ev_truth, "Ground-truth sidecar file");

    int sy_nodes = 20, sy_attach = 2, sy_cols = 3, sy_down = 3, sy_cycle = 5;
    std::uint64_t sy_seed = 0;
    std::string sy_motif = "house", sy_graph_out, sy_truth_out, sy_pipeline_out;
    CLI::App* synth = app.add_subcommand("synth", "Generate a planted benchmark instance");
    synth->add_option("--nodes", sy_nodes, "Base graph size");
    synth->add_option("--attach", sy_attach, "Preferential attachment degree");
    synth->add_option("--node-cols", sy_cols, "Node feature columns");
    synth->add_option("--downstream-len", sy_down, "Downstream feature length");
    synth->add_option("--seed", sy_seed, "RNG seed");
    synth->add_option("--motif", sy_motif, "Motif kind")
        ->check(CLI::IsMember({"house", "cycle"}));
    synth->add_option("--cycle-len", sy_cycle, "Cycle motif length");
    synth->add_option("--graph-out", sy_graph_out, "Graph output path")->required();
    synth->add_option("--truth-out", sy_truth_out, "Ground-truth sidecar output path");
    synth->add_option("--pipeline-out", sy_pipeline_out, "Planted pipeline output path");

    std::string oc_graph, oc_pipeline, oc_record;
    int oc_perms = 2000;
    std::uint64_t oc_seed = 0;
    CLI::App* oracle = app.add_subcommand(
        "oracle-check", "Compare Monte Carlo and exact Shapley values on a small instance");
    oracle->add_option("--graph", oc_graph, "Graph file")->required();
    oracle->add_option("--pipeline", oc_pipeline, "Pipeline model file")->required();
    oracle->add_option("--record", oc_record, "Explanation record supplying the probe state");
    oracle->add_option("--permutations", oc_perms, "Monte Carlo permutations");
    oracle->add_option("--seed", oc_seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*explain) {
            cli_cfg.budgets = {budgets[0], budgets[1], budgets[2]};
            cli_cfg.requirements.minima = {minima[0], minima[1], minima[2]};
            if (explain->count("--total-min")) cli_cfg.requirements.total_min = total_min;
            cli_cfg.episode.node_order =
                node_order == "low_to_high" ? NodeOrder::low_to_high : NodeOrder::high_to_low;
            cli_cfg.bandit_mode = bandit_mode == "contextual"
                                      ? BanditMode::contextual
                                      : bandit_mode == "mab" ? BanditMode::mab
                                                             : BanditMode::random_policy;
            return run_explain(explain, ea, cli_cfg);
        }
        if (*evaluate) return run_evaluate(ev_graph, ev_pipeline, ev_record, ev_truth);
        if (*synth)
            return run_synth(sy_nodes, sy_attach, sy_cols, sy_down, sy_seed, sy_motif, sy_cycle,
                             sy_graph_out, sy_truth_out, sy_pipeline_out);
        if (*oracle)
            return run_oracle_check(oc_graph, oc_pipeline, oc_record, oc_perms, oc_seed);
    } catch (const triplex::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const triplex::input_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const triplex::internal_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
