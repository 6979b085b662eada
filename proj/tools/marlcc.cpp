// marlcc: experiment driver for the cooperative-credit MARL simulator.
//
// Subcommands: train, evaluate, ablate, shapley, plot, report.
// Exit codes: 0 success, 2 usage/config error, 3 runtime error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "marlcc/checkpoint.hpp"
#include "marlcc/config.hpp"
#include "marlcc/error.hpp"
#include "marlcc/io.hpp"
#include "marlcc/metrics.hpp"
#include "marlcc/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace marlcc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

fs::path resolve_output_dir(const std::string& from_config, const std::string& override_dir) {
    if (!override_dir.empty()) return override_dir;
    if (const char* env_dir = std::getenv("MARLCC_OUT"); env_dir && *env_dir) return env_dir;
    return from_config;
}

void write_manifest(const fs::path& dir, const config::ExperimentConfig& cfg,
                    std::uint64_t seed) {
    json manifest;
    manifest["config_hash"] = config::config_hash(cfg);
    manifest["seed"] = seed;
    manifest["artifact_version"] = "1.0.0";
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    manifest["timestamp_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(now).count();
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::vector<env::EpisodeRow> rows;
    std::string error;
};

// One worker per seed; workers share nothing and write disjoint directories.
std::vector<SeedOutcome> run_seeds(const config::ExperimentConfig& cfg, const fs::path& out_root,
                                   int workers) {
    std::vector<SeedOutcome> outcomes(cfg.seeds.size());
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex next_mutex;
    const std::string hash = config::config_hash(cfg);

    auto work = [&]() {
        while (true) {
            std::size_t idx;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= cfg.seeds.size()) return;
                idx = next++;
            }
            const std::uint64_t seed = cfg.seeds[idx];
            SeedOutcome& outcome = outcomes[idx];
            outcome.seed = seed;
            try {
                const fs::path seed_dir = out_root / ("seed_" + std::to_string(seed));
                fs::create_directories(seed_dir);
                write_manifest(seed_dir, cfg, seed);
                auto agents = env::make_agents(cfg.run, seed);
                const fs::path ckpt_dir = seed_dir / "checkpoints";
                const auto record =
                    env::run_training(cfg.run, cfg.training, seed, agents, &ckpt_dir, hash);
                io::write_episode_csv(seed_dir / "episodes.csv", record.rows,
                                      cfg.run.scenario.n_agents);
                outcome.rows = record.rows;
            } catch (const std::exception& e) {
                outcome.error = e.what();
            }
        }
    };
    const int n_workers =
        std::max(1, std::min<int>(workers, static_cast<int>(cfg.seeds.size())));
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    return outcomes;
}

json summary_json(const config::ExperimentConfig& cfg,
                  const std::vector<SeedOutcome>& outcomes) {
    json summary;
    summary["config_hash"] = config::config_hash(cfg);
    summary["n_agents"] = cfg.run.scenario.n_agents;
    json per_seed = json::array();
    for (const auto& o : outcomes) {
        json s;
        s["seed"] = o.seed;
        json train_rewards = json::array();
        json eval_rewards = json::array();
        for (const auto& r : o.rows) {
            (r.eval ? eval_rewards : train_rewards).push_back(r.reward);
        }
        s["episode_rewards"] = train_rewards;
        s["eval_rewards"] = eval_rewards;
        per_seed.push_back(std::move(s));
    }
    summary["seeds"] = per_seed;
    return summary;
}

int cmd_train(const std::string& config_path, std::int64_t seed_override,
              const std::string& out_override, int workers) {
    config::ExperimentConfig cfg = config::load(config_path);
    if (seed_override >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
    const fs::path out_root = resolve_output_dir(cfg.output_dir, out_override);
    fs::create_directories(out_root);
    const auto outcomes = run_seeds(cfg, out_root, workers);
    for (const auto& o : outcomes) {
        if (!o.error.empty()) {
            throw Error("seed " + std::to_string(o.seed) + " failed: " + o.error);
        }
    }
    std::ofstream out(out_root / "summary.json");
    out << summary_json(cfg, outcomes).dump(2) << "\n";
    std::cout << "trained " << outcomes.size() << " seed(s) -> " << out_root.string() << "\n";
    return kExitOk;
}

json metric_report(const config::ExperimentConfig& cfg, std::vector<env::AgentRuntime>& agents,
                   int episodes, bool with_stability) {
    const int n = cfg.run.scenario.n_agents;
    json report;
    std::vector<double> rewards;
    std::vector<double> entropies;
    std::vector<double> lambdas;
    std::vector<std::vector<double>> phi_steps(n);
    std::vector<double> r_steps;
    std::vector<double> control_errors;
    long delivered = 0;
    double reward_total = 0.0;
    int collision_episodes = 0;

    for (int j = 0; j < episodes; ++j) {
        env::RunSettings s = cfg.run;
        s.scenario.seed = derive_seed(1000000, j);
        env::WorldState world = env::reset(s.scenario, s.belief);
        env::EpisodeOptions opts;
        opts.learn = false;
        opts.explore = false;
        opts.record_steps = true;

        // track positions for the control-error metric
        std::vector<std::vector<Eigen::Vector2d>> traj(n);
        env::EpisodeLog log = env::run_episode(world, agents, s, opts);
        rewards.push_back(log.cumulative_reward);
        entropies.push_back(log.mean_entropy);
        lambdas.push_back(log.mean_lambda2);
        reward_total += log.cumulative_reward;
        delivered += log.msgs_delivered;
        if (log.collision_count > 0) ++collision_episodes;
        for (const auto& st : log.steps) {
            r_steps.push_back(st.global_reward);
            for (int i = 0; i < n; ++i) phi_steps[i].push_back(st.phi[i]);
        }
    }

    // control error: deterministic platoon rollout against the
    // constant-headway reference behind each predecessor
    if (cfg.run.scenario.kind == env::ScenarioKind::Platoon && n >= 2 && episodes > 0) {
        const auto positions = env::eval_positions(cfg.run, agents, derive_seed(1000000, 0));
        for (int i = 1; i < n; ++i) {
            std::vector<Eigen::Vector2d> actual, reference;
            for (const auto& row : positions) {
                actual.push_back(row[i]);
                reference.push_back(row[i - 1] -
                                    Eigen::Vector2d(cfg.run.scenario.reward.headway_target,
                                                    0.0));
            }
            if (!actual.empty()) {
                control_errors.push_back(metrics::control_error_rms(actual, reference));
            }
        }
    }

    report["schema"] = "marlcc-metric-report-v1";
    report["cumulative_reward"] = rewards;
    const auto conv = metrics::convergence_speed(rewards);
    report["convergence_episodes"] = conv ? json(*conv) : json(nullptr);
    report["converged"] = conv.has_value();
    report["policy_entropy"] = entropies;
    report["lambda2"] = lambdas;
    if (!control_errors.empty()) {
        double rms = 0.0;
        for (double e : control_errors) rms += e * e;
        report["control_error_rms"] = std::sqrt(rms / control_errors.size());
    } else {
        report["control_error_rms"] = nullptr;
    }
    const auto eff = metrics::credit_assignment_efficiency(phi_steps, r_steps);
    json per_agent = json::array();
    for (const auto& c : eff.per_agent) per_agent.push_back(c.defined ? json(c.value) : json(nullptr));
    report["eta_ca"] = {{"per_agent", per_agent},
                        {"mean", eff.mean.defined ? json(eff.mean.value) : json(nullptr)}};
    report["message_efficiency"] =
        delivered > 0 ? json(reward_total / static_cast<double>(delivered)) : json(nullptr);
    report["collision_episode_fraction"] =
        episodes > 0 ? json(static_cast<double>(collision_episodes) / episodes) : json(nullptr);
    if (with_stability && episodes > 0) {
        report["stability_index"] = env::closed_loop_stability(
            cfg.run, agents, derive_seed(1000000, 0), std::min(cfg.run.scenario.horizon, 200));
    } else {
        report["stability_index"] = nullptr;
    }
    return report;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& config_path,
                 int episodes, const std::string& out_path) {
    config::ExperimentConfig cfg = config::load(config_path);
    const auto loaded = learner::load_checkpoint(checkpoint_path);
    if (static_cast<int>(loaded.agents.size()) != cfg.run.scenario.n_agents) {
        throw ConfigError("checkpoint has " + std::to_string(loaded.agents.size()) +
                          " agents but the config expects " +
                          std::to_string(cfg.run.scenario.n_agents));
    }
    auto agents = env::make_agents(cfg.run, cfg.seeds.front());
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto& ck = loaded.agents[i];
        const auto want_actor = agents[i].policy.mean_net.layer_sizes();
        const auto have_actor = ck.policy.mean_net.layer_sizes();
        if (want_actor != have_actor) {
            auto fmt = [](const std::vector<int>& v) {
                std::string s = "[";
                for (std::size_t k = 0; k < v.size(); ++k) {
                    if (k) s += ",";
                    s += std::to_string(v[k]);
                }
                return s + "]";
            };
            throw ConfigError("checkpoint/config network shape mismatch: checkpoint actor " +
                              fmt(have_actor) + " vs config " + fmt(want_actor));
        }
        agents[i].policy = ck.policy;
        agents[i].critic = ck.critic;
        agents[i].critic_steps = ck.critic_steps;
        agents[i].policy_steps = ck.policy_steps;
    }
    const json report = metric_report(cfg, agents, episodes, episodes > 0);
    if (out_path.empty() || out_path == "-") {
        std::cout << report.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot write " + out_path);
        out << report.dump(2) << "\n";
        std::cout << "report -> " << out_path << "\n";
    }
    return kExitOk;
}

int cmd_ablate(const std::string& config_path, std::vector<std::string> variant_names,
               const std::string& out_override, int workers) {
    config::ExperimentConfig cfg = config::load(config_path);
    if (variant_names.empty()) {
        variant_names = {"full", "no_linearization", "raw_observations", "uniform_credit"};
    }
    const fs::path out_root = resolve_output_dir(cfg.output_dir, out_override) / "ablate";
    fs::create_directories(out_root);

    struct VariantResult {
        std::string name;
        std::vector<std::uint64_t> seeds;
        std::vector<double> final_mean;  // final-100-episode mean reward per seed
        std::vector<double> convergence; // convergence episode or -1
    };
    std::vector<VariantResult> results;

    for (const auto& vname : variant_names) {
        const env::Variant variant = env::variant_from_name(vname);
        config::ExperimentConfig vcfg = cfg;
        vcfg.run = env::apply_variant(cfg.run, variant);
        const auto outcomes = run_seeds(vcfg, out_root / vname, workers);
        VariantResult vr;
        vr.name = vname;
        for (const auto& o : outcomes) {
            if (!o.error.empty()) {
                throw Error("variant " + vname + " seed " + std::to_string(o.seed) +
                            " failed: " + o.error);
            }
            std::vector<double> train_rewards;
            for (const auto& r : o.rows) {
                if (!r.eval) train_rewards.push_back(r.reward);
            }
            const int tail = std::min<int>(100, static_cast<int>(train_rewards.size()));
            double mean = 0.0;
            for (int k = 0; k < tail; ++k) {
                mean += train_rewards[train_rewards.size() - 1 - k];
            }
            vr.seeds.push_back(o.seed);
            vr.final_mean.push_back(tail > 0 ? mean / tail : 0.0);
            const auto conv = metrics::convergence_speed(train_rewards);
            vr.convergence.push_back(conv ? *conv : -1.0);
        }
        results.push_back(std::move(vr));
    }

    // comparison CSV: variant x seed rows
    {
        std::ofstream out(out_root / "comparison.csv");
        out << "variant,seed,final_100_mean_reward,convergence_episode\n";
        for (const auto& vr : results) {
            for (std::size_t k = 0; k < vr.seeds.size(); ++k) {
                out << vr.name << ',' << vr.seeds[k] << ','
                    << io::format_double(vr.final_mean[k]) << ','
                    << io::format_double(vr.convergence[k]) << "\n";
            }
        }
    }
    // Wilcoxon signed-rank: full vs each other variant (paired over seeds)
    json tests = json::object();
    const VariantResult* full = nullptr;
    for (const auto& vr : results) {
        if (vr.name == "full") full = &vr;
    }
    if (full) {
        for (const auto& vr : results) {
            if (vr.name == "full") continue;
            const auto t = metrics::wilcoxon_signed_rank(full->final_mean, vr.final_mean);
            tests[vr.name] = {{"statistic", t.defined ? json(t.statistic) : json(nullptr)},
                              {"p_value", t.defined ? json(t.p_value) : json(nullptr)},
                              {"defined", t.defined}};
        }
    }
    std::ofstream tout(out_root / "tests.json");
    tout << tests.dump(2) << "\n";
    std::cout << "ablation -> " << out_root.string() << "\n";
    return kExitOk;
}

int cmd_shapley(const std::string& game_path, const std::string& method, int samples,
                std::uint64_t seed) {
    std::ifstream in(game_path);
    if (!in) throw ConfigError("cannot open game file " + game_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("game file is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.contains("n") || !doc["n"].is_number_integer()) {
        throw ConfigError("game file needs an integer field 'n'");
    }
    const int n = doc["n"].get<int>();
    if (n < 1 || n > credit::kExactHardCap) {
        throw ConfigError("game size n must be in 1.." +
                          std::to_string(credit::kExactHardCap));
    }
    if (!doc.contains("values") || !doc["values"].is_object()) {
        throw ConfigError("game file needs an object field 'values' (bitmask -> value)");
    }
    std::vector<double> values(std::size_t{1} << n);
    std::vector<char> present(std::size_t{1} << n, 0);
    for (const auto& [key, value] : doc["values"].items()) {
        std::size_t pos = 0;
        unsigned long mask = 0;
        try {
            mask = std::stoul(key, &pos);
        } catch (const std::exception&) {
            throw ConfigError("subset key '" + key + "' is not a bitmask integer");
        }
        if (pos != key.size() || mask >= values.size()) {
            throw ConfigError("subset key '" + key + "' is out of range for n=" +
                              std::to_string(n));
        }
        if (!value.is_number()) throw ConfigError("value for subset '" + key + "' must be a number");
        values[mask] = value.get<double>();
        present[mask] = 1;
    }
    std::vector<std::string> missing;
    for (std::size_t m = 0; m < present.size(); ++m) {
        if (!present[m]) missing.push_back(std::to_string(m));
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t k = 0; k < missing.size() && k < 16; ++k) {
            if (k) list += ", ";
            list += missing[k];
        }
        if (missing.size() > 16) list += ", ...";
        throw ConfigError("game is missing " + std::to_string(missing.size()) +
                          " subset value(s): bitmasks " + list);
    }

    credit::CoalitionGame game(n, [&values](credit::CoalitionMask m) { return values[m]; });
    credit::ShapleyAllocation alloc;
    if (method == "exact") {
        alloc = credit::shapley_exact(game);
    } else if (method == "mc") {
        if (samples < 1) throw ConfigError("--samples must be >= 1 for the mc method");
        Rng rng(seed);
        alloc = credit::shapley_mc(game, samples, rng);
    } else {
        throw ConfigError("--method must be 'exact' or 'mc'");
    }
    json out;
    out["phi"] = alloc.phi;
    out["method"] = credit::method_name(alloc.method);
    if (alloc.method == credit::AllocationMethod::MonteCarlo) out["samples"] = alloc.mc_samples;
    out["standard_errors"] = alloc.standard_errors;
    out["oracle_calls"] = alloc.oracle_calls;
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& out_path,
             int smooth_window, const std::string& column, const std::string& kind_filter) {
    std::vector<io::PlotSeries> series;
    for (const auto& p : csv_paths) {
        const io::CsvTable table = io::read_csv(p);
        const int col = table.column(column);
        if (col < 0) {
            throw ConfigError("file " + p + " has no column '" + column + "'");
        }
        const int kind_col = table.column("kind");
        io::PlotSeries s;
        s.label = fs::path(p).stem().string();
        int row_index = 1;
        for (const auto& row : table.rows) {
            ++row_index;
            if (static_cast<int>(row.size()) <= col) {
                throw ConfigError("file " + p + " row " + std::to_string(row_index) +
                                  " is short");
            }
            if (kind_col >= 0 && !kind_filter.empty() && row[kind_col] != kind_filter) continue;
            try {
                s.values.push_back(std::stod(row[col]));
            } catch (const std::exception&) {
                throw ConfigError("file " + p + " row " + std::to_string(row_index) +
                                  ": '" + row[col] + "' is not a number");
            }
        }
        series.push_back(std::move(s));
    }
    const std::string svg = io::render_svg(series, smooth_window, "episode", column);
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write " + out_path);
    out << svg;
    std::cout << "plot -> " << out_path << "\n";
    return kExitOk;
}

int cmd_report(const std::string& episodes_csv, const std::string& out_path) {
    const io::CsvTable table = io::read_csv(episodes_csv);
    const int reward_col = table.column("reward");
    const int kind_col = table.column("kind");
    const int delivered_col = table.column("msgs_delivered");
    const int entropy_col = table.column("mean_entropy");
    const int lambda_col = table.column("mean_lambda2");
    if (reward_col < 0) throw ConfigError(episodes_csv + " has no 'reward' column");

    std::vector<double> train_rewards, eval_rewards, entropy, lambda2;
    std::vector<std::vector<double>> phi;
    std::vector<int> phi_cols;
    for (int i = 0;; ++i) {
        const int c = table.column("phi_sum_" + std::to_string(i));
        if (c < 0) break;
        phi_cols.push_back(c);
    }
    phi.resize(phi_cols.size());
    double reward_total = 0.0;
    long delivered = 0;
    for (const auto& row : table.rows) {
        const bool eval = kind_col >= 0 && row[kind_col] == "eval";
        const double r = std::stod(row[reward_col]);
        if (eval) {
            eval_rewards.push_back(r);
        } else {
            train_rewards.push_back(r);
            reward_total += r;
            if (delivered_col >= 0) delivered += std::stol(row[delivered_col]);
            if (entropy_col >= 0) entropy.push_back(std::stod(row[entropy_col]));
            if (lambda_col >= 0) lambda2.push_back(std::stod(row[lambda_col]));
            for (std::size_t k = 0; k < phi_cols.size(); ++k) {
                phi[k].push_back(std::stod(row[phi_cols[k]]));
            }
        }
    }
    json report;
    report["schema"] = "marlcc-metric-report-v1";
    report["cumulative_reward"] = train_rewards;
    report["eval_reward"] = eval_rewards;
    const auto conv = metrics::convergence_speed(train_rewards);
    report["convergence_episodes"] = conv ? json(*conv) : json(nullptr);
    report["converged"] = conv.has_value();
    report["policy_entropy"] = entropy;
    report["lambda2"] = lambda2;
    const auto eff = metrics::credit_assignment_efficiency(phi, train_rewards);
    json per_agent = json::array();
    for (const auto& c : eff.per_agent) {
        per_agent.push_back(c.defined ? json(c.value) : json(nullptr));
    }
    report["eta_ca"] = {{"per_agent", per_agent},
                        {"mean", eff.mean.defined ? json(eff.mean.value) : json(nullptr)}};
    report["message_efficiency"] =
        delivered > 0 ? json(reward_total / static_cast<double>(delivered)) : json(nullptr);
    report["control_error_rms"] = nullptr;
    report["stability_index"] = nullptr;
    report["collision_episode_fraction"] = nullptr;

    if (out_path.empty() || out_path == "-") {
        std::cout << report.dump(2) << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot write " + out_path);
        out << report.dump(2) << "\n";
        std::cout << "report -> " << out_path << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"marlcc: cooperative-credit multi-agent RL simulator"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "run training per config for each seed");
    std::string train_config;
    std::int64_t train_seed = -1;
    std::string train_out;
    int train_workers = static_cast<int>(std::thread::hardware_concurrency());
    train->add_option("config", train_config, "experiment config JSON")->required();
    train->add_option("--seed", train_seed, "override the config's seed list with one seed");
    train->add_option("--out", train_out, "output directory (overrides config and MARLCC_OUT)");
    train->add_option("--workers", train_workers, "parallel seed workers");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "deterministic evaluation of a checkpoint");
    std::string eval_ckpt, eval_config, eval_out;
    int eval_episodes = 10;
    evaluate->add_option("checkpoint", eval_ckpt, "checkpoint directory")->required();
    evaluate->add_option("config", eval_config, "experiment config JSON")->required();
    evaluate->add_option("--episodes", eval_episodes, "number of evaluation episodes");
    evaluate->add_option("--out", eval_out, "write the metric report here ('-' = stdout)");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run the ablation variants and compare");
    std::string ablate_config, ablate_out;
    std::vector<std::string> ablate_variants;
    int ablate_workers = static_cast<int>(std::thread::hardware_concurrency());
    ablate->add_option("config", ablate_config, "experiment config JSON")->required();
    ablate->add_option("--variants", ablate_variants,
                       "subset of {full,no_linearization,raw_observations,uniform_credit}");
    ablate->add_option("--out", ablate_out, "output directory");
    ablate->add_option("--workers", ablate_workers, "parallel seed workers");

    // shapley
    auto* shapley = app.add_subcommand("shapley", "allocate a coalition game from JSON");
    std::string game_path, shapley_method = "exact";
    int shapley_samples = 1000;
    std::uint64_t shapley_seed = 1;
    shapley->add_option("game", game_path, "game JSON {n, values: {bitmask: value}}")
        ->required();
    shapley->add_option("--method", shapley_method, "exact or mc");
    shapley->add_option("--samples", shapley_samples, "Monte-Carlo permutations");
    shapley->add_option("--seed", shapley_seed, "Monte-Carlo seed");

    // plot
    auto* plot = app.add_subcommand("plot", "render reward curves from CSV logs to SVG");
    std::vector<std::string> plot_csvs;
    std::string plot_out = "plot.svg";
    std::string plot_column = "reward";
    std::string plot_kind = "train";
    int plot_smooth = 1;
    plot->add_option("csv", plot_csvs, "episode CSV log(s)")->required();
    plot->add_option("--out", plot_out, "output SVG path");
    plot->add_option("--column", plot_column, "CSV column to plot");
    plot->add_option("--kind", plot_kind, "episode kind filter (train/eval; empty = all)");
    plot->add_option("--smooth", plot_smooth, "moving-average window");

    // report
    auto* report = app.add_subcommand("report", "summarize an episodes.csv into a metric report");
    std::string report_csv, report_out;
    report->add_option("csv", report_csv, "episodes.csv from a training run")->required();
    report->add_option("--out", report_out, "write the report here ('-' = stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*train) return cmd_train(train_config, train_seed, train_out, train_workers);
        if (*evaluate) return cmd_evaluate(eval_ckpt, eval_config, eval_episodes, eval_out);
        if (*ablate) return cmd_ablate(ablate_config, ablate_variants, ablate_out,
                                       ablate_workers);
        if (*shapley) return cmd_shapley(game_path, shapley_method, shapley_samples,
                                         shapley_seed);
        if (*plot) return cmd_plot(plot_csvs, plot_out, plot_smooth, plot_column, plot_kind);
        if (*report) return cmd_report(report_csv, report_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
