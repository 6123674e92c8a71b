#pragma once

#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcgpt/common.hpp"
#include "pcgpt/generate.hpp"
#include "pcgpt/model.hpp"
#include "pcgpt/reward.hpp"
#include "pcgpt/sokoban.hpp"
#include "pcgpt/trajectory.hpp"

namespace pcgpt {

/// Whole-pipeline run configuration, loaded from a flat `section.key = value`
/// text file. Unknown keys are errors so hyperparameter typos fail loudly.
struct RunConfig {
    EnvConfig env;
    GoalSpec goal;
    RewardWeights reward;

    struct DatasetCfg {
        int n_maps = 3000;
        std::vector<double> epsilons = {0.1, 0.3, 0.5};
        int max_steps = 50;
        uint64_t master_seed = 1;
    } dataset;

    ModelConfig model;  // width/height copied from env at load

    struct TrainingCfg {
        int epochs = 30;
        int steps_per_epoch = 500;
        int batch_size = 64;
        double lr_base = 1e-4;
        double weight_decay = 1e-4;
        int warmup_steps = 1000;
        uint64_t seed = 1;
    } training;

    struct GenerationCfg {
        bool target_rtg_auto = true;  // dataset maximum over successes
        double target_rtg = 0.0;      // used when not auto
        int max_steps = 50;
        DecodeMode decode = DecodeMode::Greedy;
        double temperature = 1.0;
        uint64_t seed = 1;
    } generation;

    struct EvalCfg {
        int pool_size = 500;
        int groups = 10;
        std::vector<double> fractions = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                         0.6, 0.7, 0.8, 0.9, 1.0};
        std::vector<double> baseline_epsilons = {0.1, 0.3, 0.5};
        uint64_t seed = 1;
    } eval;

    struct PathsCfg {
        std::string dataset = "out/dataset.jsonl";
        std::string checkpoint = "out/model.ckpt";
        std::string loss_log = "out/loss.csv";
        std::string out_dir = "out";
    } paths;

    void validate() const {
        double prob_sum = 0.0;
        for (double p : env.tile_probs) {
            if (p < 0) throw ConfigError("env.tile_probs: negative entry");
            prob_sum += p;
        }
        if (std::abs(prob_sum - 1.0) > 1e-9) throw ConfigError("env.tile_probs: must sum to 1");
        if (env.width < 1 || env.height < 1) throw ConfigError("env: bad grid dims");
        if (goal.min_solution_length < 1) throw ConfigError("goal.min_solution_length must be >= 1");
        if (goal.solver_node_limit < 1) throw ConfigError("goal.solver_node_limit must be >= 1");
        if (reward.box_count_min > reward.box_count_max || reward.box_count_min < 0)
            throw ConfigError("reward: empty box count range");
        if (reward.w_player < 0 || reward.w_box_target_balance < 0 || reward.w_region < 0 ||
            reward.w_solution < 0)
            throw ConfigError("reward: negative weight");
        if (dataset.n_maps < 1) throw ConfigError("dataset.n_maps must be >= 1");
        if (dataset.epsilons.empty()) throw ConfigError("dataset.epsilons must be non-empty");
        for (double e : dataset.epsilons)
            if (e < 0 || e > 1) throw ConfigError("dataset.epsilons: entry outside [0,1]");
        if (dataset.max_steps < 1) throw ConfigError("dataset.max_steps must be >= 1");
        model.validate();
        if (model.width != env.width || model.height != env.height ||
            model.item_vocab != kTileCount)
            throw ConfigError("model vocab/grid dims disagree with the environment");
        if (training.epochs < 1 || training.steps_per_epoch < 1 || training.batch_size < 1)
            throw ConfigError("training: epochs/steps/batch must be >= 1");
        if (training.lr_base <= 0) throw ConfigError("training.lr_base must be positive");
        if (training.weight_decay < 0) throw ConfigError("training.weight_decay must be >= 0");
        if (training.warmup_steps < 1) throw ConfigError("training.warmup_steps must be >= 1");
        if (generation.max_steps < 1) throw ConfigError("generation.max_steps must be >= 1");
        if (generation.decode == DecodeMode::Sample && generation.temperature <= 0)
            throw ConfigError("generation: sampling temperature must be positive");
        if (eval.pool_size < 1 || eval.groups < 1 || eval.pool_size % eval.groups != 0)
            throw ConfigError("eval: pool_size must divide into groups");
        for (double f : eval.fractions)
            if (f < 0 || f > 1) throw ConfigError("eval.fractions: entry outside [0,1]");
        if (eval.fractions.empty()) throw ConfigError("eval.fractions must be non-empty");
        for (double e : eval.baseline_epsilons)
            if (e < 0 || e > 1) throw ConfigError("eval.baseline_epsilons: entry outside [0,1]");
        if (eval.baseline_epsilons.empty())
            throw ConfigError("eval.baseline_epsilons must be non-empty");
    }

    GenerationConfig generation_config(double target_rtg) const {
        GenerationConfig g;
        g.target_rtg = target_rtg;
        g.max_steps = generation.max_steps;
        g.decode = generation.decode;
        g.temperature = generation.temperature;
        g.seed = generation.seed;
        return g;
    }

    /// Canonical serialization; also the basis of the config hash recorded in
    /// dataset files.
    std::string canonical_text() const;
    std::string hash() const {
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a(canonical_text())));
        return buf;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (...) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return static_cast<int>(x);
    } catch (...) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

inline uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (...) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(parse_double(key, trim(part)));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    using namespace detail;
    for (const auto& [key, value] : kv) {
        if (key == "env.width") cfg.env.width = parse_int(key, value);
        else if (key == "env.height") cfg.env.height = parse_int(key, value);
        else if (key == "env.tile_probs") {
            const auto list = parse_double_list(key, value);
            if (list.size() != kTileCount) throw ConfigError(key + ": need 5 probabilities");
            for (size_t i = 0; i < list.size(); ++i) cfg.env.tile_probs[i] = list[i];
        } else if (key == "goal.min_solution_length") cfg.goal.min_solution_length = parse_int(key, value);
        else if (key == "goal.solver_node_limit") cfg.goal.solver_node_limit = parse_int(key, value);
        else if (key == "goal.require_single_region") cfg.goal.require_single_region = parse_bool(key, value);
        else if (key == "reward.w_player") cfg.reward.w_player = parse_double(key, value);
        else if (key == "reward.w_box_target_balance") cfg.reward.w_box_target_balance = parse_double(key, value);
        else if (key == "reward.w_region") cfg.reward.w_region = parse_double(key, value);
        else if (key == "reward.w_solution") cfg.reward.w_solution = parse_double(key, value);
        else if (key == "reward.box_count_min") cfg.reward.box_count_min = parse_int(key, value);
        else if (key == "reward.box_count_max") cfg.reward.box_count_max = parse_int(key, value);
        else if (key == "dataset.n_maps") cfg.dataset.n_maps = parse_int(key, value);
        else if (key == "dataset.epsilons") cfg.dataset.epsilons = parse_double_list(key, value);
        else if (key == "dataset.max_steps") cfg.dataset.max_steps = parse_int(key, value);
        else if (key == "dataset.master_seed") cfg.dataset.master_seed = parse_u64(key, value);
        else if (key == "model.context_steps") cfg.model.context_steps = parse_int(key, value);
        else if (key == "model.d_model") cfg.model.d_model = parse_int(key, value);
        else if (key == "model.n_layers") cfg.model.n_layers = parse_int(key, value);
        else if (key == "model.n_heads") cfg.model.n_heads = parse_int(key, value);
        else if (key == "model.d_ff") cfg.model.d_ff = parse_int(key, value);
        else if (key == "model.dropout") cfg.model.dropout = parse_double(key, value);
        else if (key == "training.epochs") cfg.training.epochs = parse_int(key, value);
        else if (key == "training.steps_per_epoch") cfg.training.steps_per_epoch = parse_int(key, value);
        else if (key == "training.batch_size") cfg.training.batch_size = parse_int(key, value);
        else if (key == "training.lr_base") cfg.training.lr_base = parse_double(key, value);
        else if (key == "training.weight_decay") cfg.training.weight_decay = parse_double(key, value);
        else if (key == "training.warmup_steps") cfg.training.warmup_steps = parse_int(key, value);
        else if (key == "training.seed") cfg.training.seed = parse_u64(key, value);
        else if (key == "generation.target_rtg") {
            if (value == "auto") {
                cfg.generation.target_rtg_auto = true;
            } else {
                cfg.generation.target_rtg_auto = false;
                cfg.generation.target_rtg = parse_double(key, value);
            }
        } else if (key == "generation.max_steps") cfg.generation.max_steps = parse_int(key, value);
        else if (key == "generation.decode") {
            if (value == "greedy") {
                cfg.generation.decode = DecodeMode::Greedy;
            } else if (value.rfind("sample:", 0) == 0) {
                cfg.generation.decode = DecodeMode::Sample;
                cfg.generation.temperature = parse_double(key, value.substr(7));
            } else {
                throw ConfigError(key + ": expected 'greedy' or 'sample:<temperature>'");
            }
        } else if (key == "generation.seed") cfg.generation.seed = parse_u64(key, value);
        else if (key == "eval.pool_size") cfg.eval.pool_size = parse_int(key, value);
        else if (key == "eval.groups") cfg.eval.groups = parse_int(key, value);
        else if (key == "eval.fractions") cfg.eval.fractions = parse_double_list(key, value);
        else if (key == "eval.baseline_epsilons") cfg.eval.baseline_epsilons = parse_double_list(key, value);
        else if (key == "eval.seed") cfg.eval.seed = parse_u64(key, value);
        else if (key == "paths.dataset") cfg.paths.dataset = value;
        else if (key == "paths.checkpoint") cfg.paths.checkpoint = value;
        else if (key == "paths.loss_log") cfg.paths.loss_log = value;
        else if (key == "paths.out_dir") cfg.paths.out_dir = value;
        else throw ConfigError("unknown config key '" + key + "'");
    }
    cfg.model.item_vocab = kTileCount;
    cfg.model.width = cfg.env.width;
    cfg.model.height = cfg.env.height;
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        if (kv.count(key))
            throw ConfigError(path + ":" + std::to_string(line_no) + ": duplicate key " + key);
        kv[key] = value;
    }
    return parse_run_config(kv);
}

inline std::string RunConfig::canonical_text() const {
    std::ostringstream out;
    out.precision(17);
    auto list = [](const std::vector<double>& v) {
        std::ostringstream s;
        s.precision(17);
        for (size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
        return s.str();
    };
    out << "dataset.epsilons=" << list(dataset.epsilons) << '\n';
    out << "dataset.master_seed=" << dataset.master_seed << '\n';
    out << "dataset.max_steps=" << dataset.max_steps << '\n';
    out << "dataset.n_maps=" << dataset.n_maps << '\n';
    out << "env.height=" << env.height << '\n';
    out << "env.tile_probs="
        << list(std::vector<double>(env.tile_probs.begin(), env.tile_probs.end())) << '\n';
    out << "env.width=" << env.width << '\n';
    out << "eval.baseline_epsilons=" << list(eval.baseline_epsilons) << '\n';
    out << "eval.fractions=" << list(eval.fractions) << '\n';
    out << "eval.groups=" << eval.groups << '\n';
    out << "eval.pool_size=" << eval.pool_size << '\n';
    out << "eval.seed=" << eval.seed << '\n';
    out << "generation.decode=" << (generation.decode == DecodeMode::Greedy ? "greedy" : "sample")
        << '\n';
    out << "generation.max_steps=" << generation.max_steps << '\n';
    out << "generation.seed=" << generation.seed << '\n';
    out << "generation.target_rtg="
        << (generation.target_rtg_auto ? std::string("auto") : std::to_string(generation.target_rtg))
        << '\n';
    out << "generation.temperature=" << generation.temperature << '\n';
    out << "goal.min_solution_length=" << goal.min_solution_length << '\n';
    out << "goal.require_single_region=" << (goal.require_single_region ? 1 : 0) << '\n';
    out << "goal.solver_node_limit=" << goal.solver_node_limit << '\n';
    out << "model.context_steps=" << model.context_steps << '\n';
    out << "model.d_ff=" << model.d_ff << '\n';
    out << "model.d_model=" << model.d_model << '\n';
    out << "model.dropout=" << model.dropout << '\n';
    out << "model.n_heads=" << model.n_heads << '\n';
    out << "model.n_layers=" << model.n_layers << '\n';
    out << "reward.box_count_max=" << reward.box_count_max << '\n';
    out << "reward.box_count_min=" << reward.box_count_min << '\n';
    out << "reward.w_box_target_balance=" << reward.w_box_target_balance << '\n';
    out << "reward.w_player=" << reward.w_player << '\n';
    out << "reward.w_region=" << reward.w_region << '\n';
    out << "reward.w_solution=" << reward.w_solution << '\n';
    out << "training.batch_size=" << training.batch_size << '\n';
    out << "training.epochs=" << training.epochs << '\n';
    out << "training.lr_base=" << training.lr_base << '\n';
    out << "training.seed=" << training.seed << '\n';
    out << "training.steps_per_epoch=" << training.steps_per_epoch << '\n';
    out << "training.warmup_steps=" << training.warmup_steps << '\n';
    out << "training.weight_decay=" << training.weight_decay << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Map files: {"width": W, "height": H, "tiles": [W*H ints]}
// ---------------------------------------------------------------------------

inline LevelMap load_map_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open map file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("map file " + path + ": " + e.what());
    }
    return decode_int_grid(j.at("tiles").get<std::vector<int>>(), j.at("width").get<int>(),
                           j.at("height").get<int>());
}

inline void save_map_file(const std::string& path, const LevelMap& map) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open map file " + path);
    const nlohmann::json j = {
        {"width", map.width}, {"height", map.height}, {"tiles", encode_int_grid(map)}};
    out << j.dump() << '\n';
    if (!out) throw IoError("write failed for map file " + path);
}

}  // namespace pcgpt
