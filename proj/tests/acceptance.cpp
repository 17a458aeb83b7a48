// Acceptance gate: one line per criterion, exit 0 only if every check holds.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "triplex/bandit.hpp"
#include "triplex/io.hpp"
#include "triplex/synth.hpp"

#include "log_grammar.hpp"

namespace {

using namespace triplex;
using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(int id, const std::string& name, bool ok, double secs,
            const std::string& detail = "") {
    std::printf("[%s] criterion %d: %s (%.1fs)%s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
                secs, detail.empty() ? "" : ("  -- " + detail).c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

template <typename F>
void run(int id, const std::string& name, double time_limit, F&& body) {
    auto start = Clock::now();
    bool ok = false;
    std::string detail;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (ok && time_limit > 0.0 && secs > time_limit) {
        ok = false;
        detail = "time limit " + std::to_string(time_limit) + "s exceeded";
    }
    report(id, name, ok, secs, detail);
}

CooperativeGame table_game(int players, const std::vector<double>& table) {
    return CooperativeGame(players, [table](const std::vector<bool>& coal) {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < coal.size(); ++i)
            if (coal[i]) idx |= 1ULL << i;
        return table[idx];
    });
}

std::vector<double> random_table(int players, Rng& rng) {
    std::vector<double> t(1ULL << players);
    for (auto& v : t) v = 2.0 * rand_unit(rng) - 1.0;
    return t;
}

// Six-node instance small enough for exact enumeration in every game.
struct SmallInstance {
    Graph graph;
    PipelineModel pipeline;
    ExplanationTriple probe;
};

SmallInstance six_node_instance() {
    Rng rng(404);
    SmallInstance s;
    s.graph.num_nodes = 6;
    s.graph.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 2}, {1, 3}, {2, 4}};
    s.graph.node_features.assign(6, std::vector<double>(2));
    for (auto& row : s.graph.node_features)
        for (auto& v : row) v = rand_unit(rng);
    s.graph.downstream_features = std::vector<double>{rand_unit(rng), rand_unit(rng),
                                                      rand_unit(rng)};

    GnnLayer l;
    l.eps = 0.2;
    l.weights.assign(2, std::vector<double>(2));
    for (auto& row : l.weights)
        for (auto& w : row) w = rand_unit(rng) - 0.5;
    l.bias = {0.1, -0.1};
    l.activation = Activation::relu;
    s.pipeline.upstream.layers = {l};
    s.pipeline.upstream.readout = Readout::sum;
    s.pipeline.downstream.input_dim = 5;
    s.pipeline.downstream.num_classes = 2;
    s.pipeline.downstream.weights.assign(2, std::vector<double>(5));
    for (auto& row : s.pipeline.downstream.weights)
        for (auto& w : row) w = rand_unit(rng) - 0.5;
    s.pipeline.downstream.bias = {0.0, 0.1};
    s.pipeline.baseline = {0.0, 0.0, 0.0};
    s.pipeline.explained_class = 1;
    s.pipeline.validate();

    s.probe.retained_downstream = {0, 1};
    s.probe.subgraph_nodes = {1, 2, 3};
    s.probe.retained_node_features = {0};
    return s;
}

ExplainerConfig bench_config(std::uint64_t seed) {
    ExplainerConfig cfg;
    cfg.kappa = 10;
    cfg.permutations = 100;
    cfg.episode.prior_permutations = 100;
    cfg.t_b = 5;
    cfg.seed = seed;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

json record_json(const ExplainResult& r, std::uint64_t seed) {
    ExplanationRecord rec;
    rec.triple = r.best;
    rec.parts = r.best_parts;
    for (const auto& roll : r.rollouts) rec.rollout_scores.push_back(roll.score);
    rec.seed = seed;
    return record_to_json(rec);
}

}  // namespace

int main() {
    run(1, "Shapley axioms on random games", 5.0, [](std::string& detail) {
        Rng rng(101);
        for (int trial = 0; trial < 100; ++trial) {
            int p = 2 + static_cast<int>(rand_index(rng, 5));  // 2..6 players
            auto ut = random_table(p, rng);
            auto wt = random_table(p, rng);
            auto u = table_game(p, ut);

            std::vector<double> phi_u(p);
            double sum = 0.0;
            for (int i = 0; i < p; ++i) sum += phi_u[i] = exact_shapley(u, i).value;
            if (std::abs(sum - (ut.back() - ut.front())) > 1e-9) {
                detail = "efficiency violated at trial " + std::to_string(trial);
                return false;
            }

            double a = 2.0 * rand_unit(rng) - 1.0, b = 2.0 * rand_unit(rng) - 1.0;
            std::vector<double> combo(ut.size());
            for (std::size_t k = 0; k < ut.size(); ++k) combo[k] = a * ut[k] + b * wt[k];
            auto w = table_game(p, wt);
            auto mix = table_game(p, combo);
            int probe = static_cast<int>(rand_index(rng, p));
            double lhs = exact_shapley(mix, probe).value;
            double rhs = a * phi_u[probe] + b * exact_shapley(w, probe).value;
            if (std::abs(lhs - rhs) > 1e-9) {
                detail = "linearity violated at trial " + std::to_string(trial);
                return false;
            }

            // Dummy: extend with a player whose marginal is the constant c.
            double c = 2.0 * rand_unit(rng) - 1.0;
            std::vector<double> dt(ut.size() * 2);
            for (std::size_t k = 0; k < ut.size(); ++k) {
                dt[k] = ut[k];
                dt[k + ut.size()] = ut[k] + c;
            }
            if (std::abs(exact_shapley(table_game(p + 1, dt), p).value - c) > 1e-9) {
                detail = "dummy axiom violated at trial " + std::to_string(trial);
                return false;
            }

            // Symmetry: symmetrize the table over players 0 and 1.
            std::vector<double> st(ut.size());
            for (std::size_t k = 0; k < ut.size(); ++k) {
                std::size_t swapped = (k & ~3ULL) | ((k & 1) << 1) | ((k >> 1) & 1);
                st[k] = 0.5 * (ut[k] + ut[swapped]);
            }
            auto sym = table_game(p, st);
            if (std::abs(exact_shapley(sym, 0).value - exact_shapley(sym, 1).value) > 1e-9) {
                detail = "symmetry violated at trial " + std::to_string(trial);
                return false;
            }
        }
        return true;
    });

    run(2, "exact fixture and Monte Carlo agreement", 120.0, [](std::string& detail) {
        // Hand-solved 3-player fixture.
        std::vector<double> t = {0, 1, 2, 4, 0, 1, 2, 5};
        auto fixture = table_game(3, t);
        double e0 = exact_shapley(fixture, 0).value;
        double e1 = exact_shapley(fixture, 1).value;
        double e2 = exact_shapley(fixture, 2).value;
        if (std::abs(e0 - 11.0 / 6.0) > 1e-12 || std::abs(e1 - 17.0 / 6.0) > 1e-12 ||
            std::abs(e2 - 1.0 / 3.0) > 1e-12) {
            detail = "fixture mismatch";
            return false;
        }

        auto inst = six_node_instance();
        for (Component kind :
             {Component::downstream, Component::nodes, Component::node_features}) {
            auto game = build_game(inst.pipeline, inst.graph, inst.probe, kind);
            double exact = exact_shapley(game, 0).value;
            int within = 0;
            double max_err = 0.0;
            for (std::uint64_t seed = 0; seed < 40; ++seed) {
                auto mc = mc_shapley(game, 0, 2000, mix_seed(seed, 0xACC));
                double err = std::abs(mc.value - exact);
                max_err = std::max(max_err, err);
                if (err <= 3.0 * mc.stderror || err <= 1e-12) ++within;
            }
            if (within < 38 || max_err > 0.05) {
                detail = std::string(arm_name(kind)) + " game: " + std::to_string(within) +
                         "/40 within 3*stderr, max err " + std::to_string(max_err);
                return false;
            }
        }
        return true;
    });

    run(3, "message-passing hand check", 0.0, [](std::string& detail) {
        Graph g;
        g.num_nodes = 3;
        g.edges = {{0, 1}, {1, 2}};
        g.node_features = {{1.0}, {2.0}, {3.0}};
        MessagePassingModel m;
        m.kind = UpstreamKind::gin;
        GnnLayer l;
        l.eps = 0.0;
        l.weights = {{1.0}};
        l.bias = {0.0};
        l.activation = Activation::identity;
        m.layers = {l};
        m.readout = Readout::node_select;
        double n0 = upstream_eval(m, g, 0)[0];
        double n1 = upstream_eval(m, g, 1)[0];
        double n2 = upstream_eval(m, g, 2)[0];
        m.readout = Readout::sum;
        double s = upstream_eval(m, g)[0];
        if (n0 != 3.0 || n1 != 6.0 || n2 != 5.0 || s != 14.0) {
            detail = "got " + std::to_string(n0) + "," + std::to_string(n1) + "," +
                     std::to_string(n2) + " sum " + std::to_string(s);
            return false;
        }
        return true;
    });

    run(4, "computational-graph locality", 0.0, [](std::string& detail) {
        Rng rng(77);
        for (int trial = 0; trial < 50; ++trial) {
            Graph g = generate_er(12, 0.25, rng);
            for (auto& row : g.node_features) {
                row.resize(2);
                for (auto& v : row) v = rand_unit(rng);
            }
            MessagePassingModel m;
            for (int k = 0; k < 2; ++k) {
                GnnLayer l;
                l.eps = 0.4;
                l.weights.assign(2, std::vector<double>(2));
                for (auto& row : l.weights)
                    for (auto& w : row) w = rand_unit(rng) - 0.5;
                l.bias = {rand_unit(rng), rand_unit(rng)};
                m.layers.push_back(l);
            }
            m.readout = Readout::node_select;
            int v = static_cast<int>(rand_index(rng, 12));
            auto r = restrict_to_computational_graph(g, v, 2);
            auto full = upstream_eval(m, g, v);
            auto local = upstream_eval(m, r.graph, r.seed_node);
            if (full != local) {
                detail = "mismatch at trial " + std::to_string(trial);
                return false;
            }
        }
        return true;
    });

    run(5, "structured log reproduction", 180.0, [](std::string& detail) {
        auto inst = make_planted_instance(37, 2, 3, 3, 7);  // 42 nodes, 3 cols, 3 downstream
        ExplainerConfig cfg;
        cfg.kappa = 25;
        cfg.budgets = {3, 5, 5};
        cfg.requirements.minima = {2, 5, 2};
        cfg.t_b = 5;
        cfg.permutations = 100;
        cfg.episode.prior_permutations = 100;
        cfg.seed = 7;

        RunLog log;
        run_explainer(inst.pipeline, inst.graph, cfg, &log);
        auto parsed = loggrammar::parse_log(log.lines());
        if (!parsed.ok) {
            detail = parsed.error;
            return false;
        }
        if (parsed.rollouts != 25) {
            detail = "expected 25 rollout headers";
            return false;
        }

        // Downstream episodes prune once and stop; node episodes either use
        // the full budget of 5 prunes or end at the minimum with a stop.
        static const std::regex playing(R"(playing game '(\w+)', budget (\d+)/(\d+))");
        static const std::regex stop_line(R"(selected child node satisfies (\w+) .*)");
        int ds_plays = 0, ds_stops = 0;
        std::string cur_arm;
        int cur_max = 0;
        bool ended_with_stop = false;
        auto flush = [&](std::string& why) {
            if (cur_arm == "nodes" && cur_max != 5 && !ended_with_stop) {
                why = "node episode with " + std::to_string(cur_max) + " prunes and no stop";
                return false;
            }
            return true;
        };
        for (const auto& line : log.lines()) {
            std::smatch m;
            if (std::regex_match(line, m, playing)) {
                int k = std::stoi(m[2]);
                if (m[1] == cur_arm && k == cur_max + 1) {
                    cur_max = k;
                } else {
                    if (!flush(detail)) return false;
                    cur_arm = m[1];
                    cur_max = k;
                    ended_with_stop = false;
                    if (k != 1) {
                        detail = "episode starting at budget counter " + std::to_string(k);
                        return false;
                    }
                }
                if (m[1] == "downstream") {
                    ++ds_plays;
                    if (k != 1) {
                        detail = "downstream episode with more than one prune";
                        return false;
                    }
                }
            } else if (std::regex_match(line, m, stop_line)) {
                ended_with_stop = true;
                if (m[1] == "downstream") ++ds_stops;
            }
        }
        if (!flush(detail)) return false;
        if (ds_plays == 0 || ds_plays != ds_stops) {
            detail = "downstream plays " + std::to_string(ds_plays) + " vs stops " +
                     std::to_string(ds_stops);
            return false;
        }
        bool saw_terminal = false;
        for (const auto& t : parsed.terminal_states)
            if (t == std::array<long, 3>{5, 2, 2}) saw_terminal = true;
        if (!saw_terminal) {
            detail = "no terminal state '5 nodes, 2 graph features, 2 downstream features'";
            return false;
        }
        return true;
    });

    run(6, "planted-motif recovery", 3000.0, [](std::string& detail) {
        int prec_ok = 0, ds_ok = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto start = Clock::now();
            auto inst = make_planted_instance(20, 2, 3, 3, seed);
            auto res = run_explainer(inst.pipeline, inst.graph, bench_config(seed));
            double secs = std::chrono::duration<double>(Clock::now() - start).count();
            if (secs > 300.0) {
                detail = "seed " + std::to_string(seed) + " exceeded 5 min";
                return false;
            }
            auto scores = ground_truth_scores(res.best, truth_triple(inst));
            if (scores.nodes.precision >= 0.8) ++prec_ok;
            int designated = *inst.truth.downstream.begin();
            if (res.best.retained_downstream.count(designated)) ++ds_ok;
        }
        detail = "precision>=0.8 in " + std::to_string(prec_ok) +
                 "/10, designated retained in " + std::to_string(ds_ok) + "/10";
        return prec_ok >= 8 && ds_ok >= 8;
    });

    run(7, "fidelity identities", 0.0, [](std::string& detail) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto inst = make_planted_instance(8, 2, 2, 3, seed);
            std::vector<std::pair<Graph, ExplanationTriple>> full_sample{
                {inst.graph, full_triple(inst.graph)}};
            std::vector<std::pair<Graph, ExplanationTriple>> empty_sample{
                {inst.graph, ExplanationTriple{}}};
            double minus = fidelity(inst.pipeline, full_sample, FidelityKind::minus).aggregate;
            double plus = fidelity(inst.pipeline, empty_sample, FidelityKind::plus).aggregate;
            if (minus != 0.0 || plus != 0.0) {
                detail = "seed " + std::to_string(seed) + ": minus " + std::to_string(minus) +
                         ", plus " + std::to_string(plus);
                return false;
            }
        }
        return true;
    });

    run(8, "byte-identical determinism", 0.0, [](std::string& detail) {
        // In-process: identical records and logs on two fixtures.
        for (std::uint64_t seed : {3ULL, 9ULL}) {
            auto inst = make_planted_instance(seed == 3 ? 6 : 20, 2, 2, 3, seed);
            ExplainerConfig cfg = bench_config(seed);
            cfg.kappa = 4;
            cfg.permutations = 40;
            cfg.episode.prior_permutations = 40;
            cfg.t_b = 2;
            RunLog log_a, log_b;
            auto a = run_explainer(inst.pipeline, inst.graph, cfg, &log_a);
            auto b = run_explainer(inst.pipeline, inst.graph, cfg, &log_b);
            if (record_json(a, cfg.seed).dump() != record_json(b, cfg.seed).dump() ||
                log_a.text() != log_b.text()) {
                detail = "in-process records differ at seed " + std::to_string(seed);
                return false;
            }
        }

        // Through the CLI, bytes on disk included.
        const std::string dir = "acceptance_tmp";
        if (std::system(("rm -rf " + dir + " && mkdir -p " + dir).c_str()) != 0) {
            detail = "could not prepare " + dir;
            return false;
        }
        const std::string cli = CLI_BINARY;
        for (int pass = 0; pass < 2; ++pass) {
            // Identical relative paths from per-pass working directories keep
            // the embedded input paths identical across the two records.
            std::string p = dir + "/" + std::to_string(pass);
            std::string prefix = "mkdir -p " + p + " && cd " + p + " && " + cli;
            std::string synth = prefix + " synth --nodes 12 --attach 2 --node-cols 2" +
                                " --downstream-len 3 --seed 5 --graph-out g.json" +
                                " --pipeline-out p.json --truth-out t.json 2>/dev/null";
            std::string explain = prefix + " explain --graph g.json --pipeline p.json" +
                                  " --kappa 4 --permutations 40 --prior-permutations 40" +
                                  " --t-b 2 --seed 5 --record r.json --log l.txt" +
                                  " --dot d.dot 2>/dev/null";
            if (std::system(synth.c_str()) != 0 || std::system(explain.c_str()) != 0) {
                detail = "CLI invocation failed";
                return false;
            }
        }
        for (const char* name : {"g.json", "p.json", "t.json", "r.json", "l.txt", "d.dot"}) {
            auto one = read_file(dir + "/0/" + name);
            auto two = read_file(dir + "/1/" + name);
            if (one.empty() || one != two) {
                detail = std::string("artifact ") + name + " differs between runs";
                return false;
            }
        }
        return true;
    });

    run(9, "degenerate subgraph-only mode", 0.0, [](std::string& detail) {
        auto inst = make_planted_instance(20, 2, 3, 3, 2);
        ExplainerConfig cfg = bench_config(2);
        cfg.kappa = 6;
        cfg.requirements.minima.downstream = inst.graph.num_downstream_features();
        cfg.requirements.minima.node_features = inst.graph.num_node_features();
        auto res = run_explainer(inst.pipeline, inst.graph, cfg);
        auto full = full_triple(inst.graph);
        if (res.best.retained_downstream != full.retained_downstream ||
            res.best.retained_node_features != full.retained_node_features) {
            detail = "feature arms were not inert";
            return false;
        }
        auto est = res.best_parts.subgraph;
        auto fresh = mc_shapley(build_subgraph_game(inst.pipeline, inst.graph, res.best), 0,
                                cfg.permutations, 0xFEEDULL);
        double gap = std::abs(fresh.value - est.value);
        double bound = 3.0 * std::sqrt(est.stderror * est.stderror +
                                       fresh.stderror * fresh.stderror);
        detail = "gap " + std::to_string(gap) + " vs bound " + std::to_string(bound);
        return gap <= bound + 1e-12;
    });

    std::printf("%d/9 criteria passed\n", 9 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
