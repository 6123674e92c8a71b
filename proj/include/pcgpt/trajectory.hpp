#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcgpt/analysis.hpp"
#include "pcgpt/common.hpp"
#include "pcgpt/reward.hpp"
#include "pcgpt/sokoban.hpp"

namespace pcgpt {

struct TrajectoryStep {
    LevelMap state;     // map before the edit
    EditAction action;  // edit applied to it
    double reward = 0.0;
    double rtg = 0.0;
};

/// One roll-out of the editing policy. steps[t+1].state is always
/// apply_edit(steps[t].state, steps[t].action), and rtg obeys
/// rtg[t] = reward[t] + rtg[t+1].
struct Trajectory {
    std::vector<TrajectoryStep> steps;
    LevelMap terminal_state;
    bool success = false;

    int length() const { return static_cast<int>(steps.size()); }
    double initial_rtg() const { return steps.empty() ? 0.0 : steps.front().rtg; }
};

/// Greedy-with-noise repair policy: with probability epsilon a uniformly
/// random edit, otherwise the edit whose one-step lookahead potential is
/// highest. Ties break in (y, x, item) scan order. The solver contributes to
/// a candidate's score only when the edited map is structurally valid (the
/// stats gate), so most candidates are cheap.
inline EditAction behavior_policy_propose(const LevelMap& map, const MapStats& stats,
                                          const GoalSpec& goal, const RewardWeights& weights,
                                          Rng& rng, double epsilon,
                                          SolveCache* cache = nullptr) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::invalid_argument("behavior_policy_propose: epsilon outside [0,1]");
    if (epsilon > 0.0 && rng.uniform() < epsilon) {
        const Tile item = tile_from_code(rng.uniform_int(kTileCount));
        const int x = rng.uniform_int(map.width);
        const int y = rng.uniform_int(map.height);
        return {item, x, y};
    }

    const double current_potential = potential(stats, weights, goal);
    double best_score = -std::numeric_limits<double>::infinity();
    EditAction best{Tile::Empty, 0, 0};
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            for (int code = 0; code < kTileCount; ++code) {
                const Tile item = static_cast<Tile>(code);
                double score = 0.0;
                if (map.at(x, y) == item) {
                    score = current_potential;  // no_action leaves the map as-is
                } else {
                    auto [next, changed] = apply_edit(map, {item, x, y});
                    (void)changed;
                    const MapStats next_stats = map_stats(next, goal, cache);
                    score = potential(next_stats, weights, goal);
                }
                if (score > best_score) {
                    best_score = score;
                    best = {item, x, y};
                }
            }
        }
    }
    return best;
}

/// Rolls the behavior policy from a seeded random map until the goal holds or
/// the step budget runs out.
inline Trajectory generate_trajectory(uint64_t seed, const EnvConfig& env, const GoalSpec& goal,
                                      const RewardWeights& weights, double epsilon,
                                      int max_steps) {
    if (max_steps < 1) throw std::invalid_argument("generate_trajectory: max_steps must be >= 1");
    LevelMap map = random_map(derive_seed(seed, 0), env);
    Rng rng = Rng::child(seed, 1);
    SolveCache cache;

    Trajectory traj;
    MapStats stats = map_stats(map, goal, &cache);
    std::vector<double> rewards;
    for (int t = 0; t < max_steps; ++t) {
        if (is_goal(stats, goal)) break;
        const EditAction action =
            behavior_policy_propose(map, stats, goal, weights, rng, epsilon, &cache);
        auto [next, changed] = apply_edit(map, action);
        (void)changed;
        const MapStats next_stats = map_stats(next, goal, &cache);
        const double reward = step_reward(stats, next_stats, weights, goal);
        traj.steps.push_back({std::move(map), action, reward, 0.0});
        rewards.push_back(reward);
        map = std::move(next);
        stats = next_stats;
    }
    traj.terminal_state = std::move(map);
    traj.success = is_goal(stats, goal);
    const std::vector<double> rtg = compute_rtg(rewards);
    for (size_t i = 0; i < rtg.size(); ++i) traj.steps[i].rtg = rtg[i];
    return traj;
}

// ---------------------------------------------------------------------------
// Dataset serialization: JSON Lines, one trajectory per line, preceded by a
// metadata line. Keys are emitted in sorted order so reruns are byte-identical.
// ---------------------------------------------------------------------------

struct DatasetMeta {
    std::string config_hash;
    uint64_t master_seed = 0;
    int n_trajectories = 0;
    int n_success = 0;
    int width = 5;
    int height = 5;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Trajectory> trajectories;
};

inline nlohmann::json trajectory_to_json(const Trajectory& traj, int width, int height) {
    nlohmann::json steps = nlohmann::json::array();
    for (const TrajectoryStep& s : traj.steps) {
        steps.push_back({{"state", encode_int_grid(s.state)},
                         {"item", static_cast<int>(s.action.item)},
                         {"x", s.action.x},
                         {"y", s.action.y},
                         {"reward", s.reward},
                         {"rtg", s.rtg}});
    }
    return {{"version", 1},
            {"width", width},
            {"height", height},
            {"steps", std::move(steps)},
            {"success", traj.success}};
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();
    Trajectory traj;
    traj.success = j.at("success").get<bool>();
    LevelMap current(width, height);
    bool have_state = false;
    for (const auto& js : j.at("steps")) {
        TrajectoryStep step;
        step.state = decode_int_grid(js.at("state").get<std::vector<int>>(), width, height);
        step.action = {tile_from_code(js.at("item").get<int>()), js.at("x").get<int>(),
                       js.at("y").get<int>()};
        step.reward = js.at("reward").get<double>();
        step.rtg = js.at("rtg").get<double>();
        current = apply_edit(step.state, step.action).first;
        have_state = true;
        traj.steps.push_back(std::move(step));
    }
    traj.terminal_state = have_state ? current : LevelMap(width, height);
    return traj;
}

inline void write_dataset(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_dataset: cannot open " + path);
    const nlohmann::json meta = {{"config_hash", dataset.meta.config_hash},
                                 {"master_seed", dataset.meta.master_seed},
                                 {"n_trajectories", dataset.meta.n_trajectories},
                                 {"n_success", dataset.meta.n_success},
                                 {"version", 1},
                                 {"width", dataset.meta.width},
                                 {"height", dataset.meta.height}};
    out << meta.dump() << '\n';
    for (const Trajectory& traj : dataset.trajectories)
        out << trajectory_to_json(traj, dataset.meta.width, dataset.meta.height).dump() << '\n';
    if (!out) throw IoError("write_dataset: write failed for " + path);
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_dataset: cannot open " + path);
    Dataset dataset;
    std::string line;
    if (!std::getline(in, line)) throw IoError("load_dataset: empty file " + path);
    {
        const nlohmann::json meta = nlohmann::json::parse(line);
        dataset.meta.config_hash = meta.at("config_hash").get<std::string>();
        dataset.meta.master_seed = meta.at("master_seed").get<uint64_t>();
        dataset.meta.n_trajectories = meta.at("n_trajectories").get<int>();
        dataset.meta.n_success = meta.value("n_success", 0);
        dataset.meta.width = meta.at("width").get<int>();
        dataset.meta.height = meta.at("height").get<int>();
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        dataset.trajectories.push_back(trajectory_from_json(nlohmann::json::parse(line)));
    }
    if (static_cast<int>(dataset.trajectories.size()) != dataset.meta.n_trajectories)
        throw IoError("load_dataset: trajectory count mismatch in " + path);
    return dataset;
}

struct DatasetBuildConfig {
    int n_maps = 3000;
    std::vector<double> epsilons = {0.1, 0.3, 0.5};
    int max_steps = 50;
    uint64_t master_seed = 1;
    std::string config_hash;
    EnvConfig env;
    GoalSpec goal;
    RewardWeights weights;
};

/// Generates the offline dataset. Trajectory i is a pure function of
/// (master_seed, i), with epsilon cycling through the configured mixture, so
/// rebuilding with the same config is byte-identical.
inline Dataset build_dataset(const DatasetBuildConfig& cfg) {
    if (cfg.n_maps < 1) throw std::invalid_argument("build_dataset: n_maps must be >= 1");
    if (cfg.epsilons.empty()) throw std::invalid_argument("build_dataset: empty epsilon list");
    Dataset dataset;
    dataset.meta.config_hash = cfg.config_hash;
    dataset.meta.master_seed = cfg.master_seed;
    dataset.meta.n_trajectories = cfg.n_maps;
    dataset.meta.width = cfg.env.width;
    dataset.meta.height = cfg.env.height;
    dataset.trajectories.reserve(static_cast<size_t>(cfg.n_maps));
    for (int i = 0; i < cfg.n_maps; ++i) {
        const double epsilon = cfg.epsilons[static_cast<size_t>(i) % cfg.epsilons.size()];
        dataset.trajectories.push_back(generate_trajectory(
            derive_seed(cfg.master_seed, static_cast<uint64_t>(i)), cfg.env, cfg.goal,
            cfg.weights, epsilon, cfg.max_steps));
        if (dataset.trajectories.back().success) ++dataset.meta.n_success;
    }
    return dataset;
}

inline void build_dataset_file(const std::string& path, const DatasetBuildConfig& cfg) {
    write_dataset(path, build_dataset(cfg));
}

// ---------------------------------------------------------------------------
// Training windows
// ---------------------------------------------------------------------------

/// A fixed-length slice of a trajectory. Slots past real_length repeat the
/// last real step's modalities and are excluded from the loss mask.
struct TrainingWindow {
    int K = 0;
    int real_length = 0;
    std::vector<double> rtg;               // K values
    std::vector<std::vector<int>> states;  // K integer grids
    std::vector<EditAction> actions;       // K actions
    std::vector<uint8_t> mask;             // K flags, true on real slots
};

inline TrainingWindow sample_window(const Trajectory& traj, int start, int K) {
    const int len = traj.length();
    if (start < 0 || start >= len)
        throw std::invalid_argument("sample_window: start outside trajectory");
    if (K < 1) throw std::invalid_argument("sample_window: K must be >= 1");
    TrainingWindow w;
    w.K = K;
    w.real_length = std::min(K, len - start);
    w.rtg.resize(static_cast<size_t>(K));
    w.states.resize(static_cast<size_t>(K));
    w.actions.resize(static_cast<size_t>(K));
    w.mask.assign(static_cast<size_t>(K), 0);
    for (int k = 0; k < K; ++k) {
        const int src = start + std::min(k, w.real_length - 1);
        const TrajectoryStep& step = traj.steps[static_cast<size_t>(src)];
        w.rtg[static_cast<size_t>(k)] = step.rtg;
        w.states[static_cast<size_t>(k)] = encode_int_grid(step.state);
        w.actions[static_cast<size_t>(k)] = step.action;
        w.mask[static_cast<size_t>(k)] = k < w.real_length ? 1 : 0;
    }
    return w;
}

/// Uniformly random (trajectory, start) pairs. Zero-length trajectories are
/// skipped; at least one sampleable trajectory is required.
inline std::vector<TrainingWindow> sample_batch(const std::vector<Trajectory>& trajectories,
                                                int batch_size, int K, Rng& rng) {
    std::vector<int> usable;
    for (size_t i = 0; i < trajectories.size(); ++i)
        if (!trajectories[i].steps.empty()) usable.push_back(static_cast<int>(i));
    if (usable.empty()) throw std::invalid_argument("sample_batch: no non-empty trajectories");
    std::vector<TrainingWindow> batch;
    batch.reserve(static_cast<size_t>(batch_size));
    for (int b = 0; b < batch_size; ++b) {
        const Trajectory& traj =
            trajectories[static_cast<size_t>(usable[static_cast<size_t>(rng.uniform_int(
                static_cast<int>(usable.size())))])];
        const int start = rng.uniform_int(traj.length());
        batch.push_back(sample_window(traj, start, K));
    }
    return batch;
}

}  // namespace pcgpt
