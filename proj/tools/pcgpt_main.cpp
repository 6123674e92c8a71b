// pcgpt: level-editing pipeline driver. Subcommands cover dataset generation,
// training, conditioned generation, evaluation sweeps, and inspection utils.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcgpt/config.hpp"
#include "pcgpt/eval.hpp"
#include "pcgpt/generate.hpp"
#include "pcgpt/model.hpp"
#include "pcgpt/solver.hpp"
#include "pcgpt/train.hpp"
#include "pcgpt/trajectory.hpp"

namespace fs = std::filesystem;
using namespace pcgpt;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDims = 4;

struct GlobalOpts {
    std::string config_path;
    std::optional<uint64_t> seed_override;
};

RunConfig load_config(const GlobalOpts& g) {
    if (g.config_path.empty()) throw ConfigError("--config is required for this subcommand");
    RunConfig cfg = load_run_config(g.config_path);
    if (g.seed_override) {
        cfg.dataset.master_seed = *g.seed_override;
        cfg.training.seed = *g.seed_override;
        cfg.generation.seed = *g.seed_override;
        cfg.eval.seed = *g.seed_override;
    }
    return cfg;
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

DatasetBuildConfig dataset_build_config(const RunConfig& cfg) {
    DatasetBuildConfig b;
    b.n_maps = cfg.dataset.n_maps;
    b.epsilons = cfg.dataset.epsilons;
    b.max_steps = cfg.dataset.max_steps;
    b.master_seed = cfg.dataset.master_seed;
    b.config_hash = cfg.hash();
    b.env = cfg.env;
    b.goal = cfg.goal;
    b.weights = cfg.reward;
    return b;
}

int cmd_gen_dataset(const GlobalOpts& g, const std::string& out_override) {
    const RunConfig cfg = load_config(g);
    const std::string out = out_override.empty() ? cfg.paths.dataset : out_override;
    ensure_parent_dir(out);
    const DatasetBuildConfig b = dataset_build_config(cfg);
    std::cerr << "generating " << b.n_maps << " trajectories (seed " << b.master_seed << ")\n";
    const Dataset dataset = build_dataset(b);
    write_dataset(out, dataset);
    int successes = 0;
    for (const auto& t : dataset.trajectories) successes += t.success ? 1 : 0;
    std::cerr << "wrote " << out << " (" << successes << "/" << b.n_maps << " successful)\n";
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& dataset_override,
              const std::string& ckpt_override, const std::string& loss_override) {
    const RunConfig cfg = load_config(g);
    const std::string dataset_path =
        dataset_override.empty() ? cfg.paths.dataset : dataset_override;
    const std::string ckpt_path = ckpt_override.empty() ? cfg.paths.checkpoint : ckpt_override;
    const std::string loss_path = loss_override.empty() ? cfg.paths.loss_log : loss_override;

    const Dataset dataset = load_dataset(dataset_path);
    if (dataset.meta.width != cfg.env.width || dataset.meta.height != cfg.env.height)
        throw DimensionError("dataset grid dims disagree with the configured environment");

    ensure_parent_dir(ckpt_path);
    ensure_parent_dir(loss_path);
    std::ofstream loss_log(loss_path, std::ios::binary);
    if (!loss_log) throw IoError("cannot open loss log " + loss_path);
    loss_log << "step,loss,lr\n";

    const int total = cfg.training.epochs * cfg.training.steps_per_epoch;
    std::cerr << "training " << total << " steps, batch " << cfg.training.batch_size << "\n";
    const auto model = train_model<float>(
        cfg, dataset.trajectories, nullptr, [&](const TrainStepLog& s) {
            char loss_buf[40], lr_buf[40];
            std::snprintf(loss_buf, sizeof(loss_buf), "%.9g", s.loss);
            std::snprintf(lr_buf, sizeof(lr_buf), "%.9g", s.lr);
            loss_log << s.step << ',' << loss_buf << ',' << lr_buf << '\n';
            if ((s.step + 1) % 100 == 0 || s.step + 1 == total)
                std::cerr << "step " << (s.step + 1) << "/" << total << " loss " << s.loss << "\n";
        });
    if (!loss_log) throw IoError("loss log write failed");
    model.save(ckpt_path);
    std::cerr << "wrote " << ckpt_path << " (" << model.param_count() << " params)\n";
    return 0;
}

double resolve_target_rtg(const RunConfig& cfg, const std::string& dataset_path,
                          const std::optional<double>& override_rtg) {
    if (override_rtg) return *override_rtg;
    if (!cfg.generation.target_rtg_auto) return cfg.generation.target_rtg;
    const Dataset dataset = load_dataset(dataset_path);
    return default_target_rtg(dataset.trajectories);
}

int cmd_generate(const GlobalOpts& g, const std::string& ckpt_override,
                 const std::string& map_path, const std::string& dataset_override,
                 const std::string& out_path, std::optional<double> target_rtg,
                 std::optional<double> fraction, std::optional<int> max_steps) {
    const RunConfig cfg = load_config(g);
    const std::string ckpt_path = ckpt_override.empty() ? cfg.paths.checkpoint : ckpt_override;
    const auto model = PcgptModel<float>::load(ckpt_path);
    if (model.cfg.width != cfg.env.width || model.cfg.height != cfg.env.height)
        throw DimensionError("checkpoint grid dims disagree with the configured environment");

    const LevelMap initial = map_path.empty()
                                 ? random_map(derive_seed(cfg.generation.seed, 0), cfg.env)
                                 : load_map_file(map_path);

    const std::string dataset_path =
        dataset_override.empty() ? cfg.paths.dataset : dataset_override;
    GenerationConfig gen = cfg.generation_config(resolve_target_rtg(cfg, dataset_path, target_rtg));
    if (fraction) gen.change_budget_fraction = *fraction;
    if (max_steps) gen.max_steps = *max_steps;

    const GenerationResult result = generate(model, initial, cfg.goal, cfg.reward, gen);

    nlohmann::json out = {{"success", result.success},
                          {"steps_used", result.steps_used},
                          {"changes_used", result.changes_used},
                          {"total_reward", result.total_reward},
                          {"target_rtg", gen.target_rtg},
                          {"change_budget_fraction", gen.change_budget_fraction},
                          {"final_map", encode_int_grid(result.final_map)},
                          {"conditioning_rtg", result.conditioning_rtg},
                          {"trajectory",
                           trajectory_to_json(result.trajectory, cfg.env.width, cfg.env.height)}};
    std::cout << out.dump() << "\n";
    std::cout << render_ascii(result.final_map) << "\n";
    if (!out_path.empty()) {
        ensure_parent_dir(out_path);
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw IoError("cannot open " + out_path);
        f << out.dump() << '\n';
    }
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& ckpt_override,
             const std::string& dataset_override, const std::string& out_dir_override,
             bool check_mode) {
    const RunConfig cfg = load_config(g);
    const std::string ckpt_path = ckpt_override.empty() ? cfg.paths.checkpoint : ckpt_override;
    const std::string dataset_path =
        dataset_override.empty() ? cfg.paths.dataset : dataset_override;
    const std::string out_dir = out_dir_override.empty() ? cfg.paths.out_dir : out_dir_override;

    const auto model = PcgptModel<float>::load(ckpt_path);
    if (model.cfg.width != cfg.env.width || model.cfg.height != cfg.env.height)
        throw DimensionError("checkpoint grid dims disagree with the configured environment");

    const double target_rtg = resolve_target_rtg(cfg, dataset_path, std::nullopt);
    const EvalPool pool = build_eval_pool(cfg.eval.pool_size, cfg.eval.groups, cfg.eval.seed,
                                          cfg.env);
    std::cerr << "eval pool " << pool.maps.size() << " maps, target rtg " << target_rtg << "\n";

    const EditMethod pcgpt_method = [&](const LevelMap& map, int id, double fraction) {
        GenerationConfig gen = cfg.generation_config(target_rtg);
        gen.change_budget_fraction = fraction;
        gen.seed = derive_seed(cfg.eval.seed, 0x9c000000ull + static_cast<uint64_t>(id));
        return generate(model, map, cfg.goal, cfg.reward, gen);
    };
    const EditMethod random_method = [&](const LevelMap& map, int id, double fraction) {
        return baseline_random_edit(map, cfg.goal, cfg.reward, cfg.generation.max_steps, fraction,
                                    derive_seed(cfg.eval.seed, 0x4a000000ull + static_cast<uint64_t>(id)));
    };
    const EditMethod behavior_method = [&](const LevelMap& map, int id, double fraction) {
        const double eps =
            cfg.eval.baseline_epsilons[static_cast<size_t>(id) % cfg.eval.baseline_epsilons.size()];
        return baseline_behavior_policy(map, cfg.goal, cfg.reward, cfg.generation.max_steps,
                                        fraction, eps,
                                        derive_seed(cfg.eval.seed, 0xb7000000ull + static_cast<uint64_t>(id)));
    };

    std::cerr << "sweeping pcgpt over " << cfg.eval.fractions.size() << " fractions\n";
    const SweepResult pcgpt_sweep = sweep(pcgpt_method, pool, cfg.eval.fractions, cfg.goal);
    std::cerr << "running baselines at fraction 1.0\n";
    const SweepResult random_sweep = sweep(random_method, pool, {1.0}, cfg.goal);
    const SweepResult behavior_sweep = sweep(behavior_method, pool, {1.0}, cfg.goal);

    fs::create_directories(out_dir);
    const std::vector<MethodRecords> all = {
        {"pcgpt", pcgpt_sweep.records, pcgpt_sweep.points},
        {"random_edit", random_sweep.records, random_sweep.points},
        {"behavior_policy", behavior_sweep.records, behavior_sweep.points},
    };
    write_records_csv(out_dir + "/records.csv", all);
    write_sweep_csv(out_dir + "/sweep.csv", all);
    write_summary_csv(out_dir + "/summary.csv", all);
    std::cerr << "wrote " << out_dir << "/{records,sweep,summary}.csv\n";

    // Threshold checks are the same gates the acceptance suite enforces.
    const std::vector<ThresholdCheck> checks = evaluate_thresholds(
        pcgpt_sweep, cfg.eval.fractions, random_sweep, behavior_sweep, pool.maps.size());
    bool all_ok = true;
    for (const ThresholdCheck& c : checks) {
        std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
        all_ok = all_ok && c.pass;
    }
    if (check_mode && !all_ok) return 1;
    return 0;
}

int cmd_solve(const std::string& map_path, const std::string& algo, int node_limit,
              bool witness) {
    const LevelMap map = load_map_file(map_path);
    const SolveResult result =
        algo == "bfs" ? solve_bfs(map, node_limit) : solve_astar(map, node_limit);
    std::cout << result.to_string() << "\n";
    if (witness && result.kind == SolveResult::Kind::Solved)
        std::cout << (result.witness.empty() ? "(empty)" : result.witness) << "\n";
    return 0;
}

int cmd_render(const std::string& map_path) {
    std::cout << render_ascii(load_map_file(map_path)) << "\n";
    return 0;
}

int cmd_inspect(const std::string& ckpt_path) {
    std::cout << num::checkpoint_header_json(ckpt_path).dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pcgpt: return-conditioned transformer level editing for Sokoban"};
    app.require_subcommand(1);

    GlobalOpts global;
    app.add_option("--config", global.config_path, "run-config file (key = value lines)");
    uint64_t seed_flag = 0;
    auto* seed_opt = app.add_option("--seed", seed_flag, "override every stage seed");

    std::string ds_out;
    auto* gen_dataset = app.add_subcommand("gen-dataset", "generate the offline dataset");
    gen_dataset->add_option("--out", ds_out, "output JSONL path (default paths.dataset)");

    std::string train_ds, train_ckpt, train_loss;
    auto* train = app.add_subcommand("train", "train the model on a dataset");
    train->add_option("--dataset", train_ds, "dataset path (default paths.dataset)");
    train->add_option("--out", train_ckpt, "checkpoint path (default paths.checkpoint)");
    train->add_option("--loss-log", train_loss, "loss CSV path (default paths.loss_log)");

    std::string gen_ckpt, gen_map, gen_ds, gen_out;
    double gen_rtg = 0.0, gen_fraction = 0.0;
    int gen_max_steps = 0;
    auto* gen = app.add_subcommand("generate", "generate a level from a random or given map");
    gen->add_option("--checkpoint", gen_ckpt, "checkpoint path (default paths.checkpoint)");
    gen->add_option("--map", gen_map, "initial map JSON (default: seeded random map)");
    gen->add_option("--dataset", gen_ds, "dataset for auto target rtg (default paths.dataset)");
    gen->add_option("--out", gen_out, "also write the result JSON here");
    auto* rtg_opt = gen->add_option("--target-rtg", gen_rtg, "conditioning return override");
    auto* frac_opt = gen->add_option("--fraction", gen_fraction, "change budget fraction");
    auto* steps_opt = gen->add_option("--max-steps", gen_max_steps, "step budget override");

    std::string eval_ckpt, eval_ds, eval_out;
    bool eval_check = false;
    auto* eval_cmd = app.add_subcommand("eval", "run the evaluation sweep and baselines");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path (default paths.checkpoint)");
    eval_cmd->add_option("--dataset", eval_ds, "dataset for auto target rtg");
    eval_cmd->add_option("--out-dir", eval_out, "report directory (default paths.out_dir)");
    eval_cmd->add_flag("--check", eval_check, "nonzero exit if a threshold check fails");

    std::string solve_map, solve_algo = "astar";
    int solve_limit = 5000;
    bool solve_witness = false;
    auto* solve_cmd = app.add_subcommand("solve", "solve a map file");
    solve_cmd->add_option("--map", solve_map, "map JSON path")->required();
    solve_cmd->add_option("--algo", solve_algo, "bfs or astar")
        ->check(CLI::IsMember({"bfs", "astar"}));
    solve_cmd->add_option("--node-limit", solve_limit, "expansion budget");
    solve_cmd->add_flag("--witness", solve_witness, "print the move sequence when solved");

    std::string render_map;
    auto* render_cmd = app.add_subcommand("render", "render a map file as ASCII");
    render_cmd->add_option("--map", render_map, "map JSON path")->required();

    std::string inspect_ckpt;
    auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "print a checkpoint header");
    inspect_cmd->add_option("--checkpoint", inspect_ckpt, "checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (seed_opt->count() > 0) global.seed_override = seed_flag;

    try {
        if (gen_dataset->parsed()) return cmd_gen_dataset(global, ds_out);
        if (train->parsed()) return cmd_train(global, train_ds, train_ckpt, train_loss);
        if (gen->parsed())
            return cmd_generate(global, gen_ckpt, gen_map, gen_ds, gen_out,
                                rtg_opt->count() ? std::optional<double>(gen_rtg) : std::nullopt,
                                frac_opt->count() ? std::optional<double>(gen_fraction)
                                                  : std::nullopt,
                                steps_opt->count() ? std::optional<int>(gen_max_steps)
                                                   : std::nullopt);
        if (eval_cmd->parsed()) return cmd_eval(global, eval_ckpt, eval_ds, eval_out, eval_check);
        if (solve_cmd->parsed())
            return cmd_solve(solve_map, solve_algo, solve_limit, solve_witness);
        if (render_cmd->parsed()) return cmd_render(render_map);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect_ckpt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return kExitDims;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
