#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pcgpt/analysis.hpp"
#include "pcgpt/generate.hpp"
#include "pcgpt/sokoban.hpp"
#include "pcgpt/trajectory.hpp"

namespace pcgpt {

/// Per-map evaluation row (Table-style metrics).
struct EvalRecord {
    int map_id = 0;
    int group_id = 0;
    double change_fraction = 0.0;
    bool success = false;
    int solution_length = 0;  // 0 unless the final map solved
    double total_reward = 0.0;
    int steps = 0;
    int changes = 0;
};

struct SweepPoint {
    double fraction = 0.0;
    double success_rate = 0.0;        // over the whole pool
    double group_std = 0.0;           // spread of per-group success rates
    std::vector<double> group_rates;  // one per group
};

struct TableSummary {
    int n_success = 0;
    double mean_solution_length = 0.0;
    double mean_total_reward = 0.0;
    double mean_steps = 0.0;
    double mean_changes = 0.0;
};

/// Seeded pool of random initial maps split into equal groups. Every method
/// under test is evaluated on these identical maps.
struct EvalPool {
    std::vector<LevelMap> maps;
    int n_groups = 1;

    int group_size() const { return static_cast<int>(maps.size()) / n_groups; }
    int group_of(int map_id) const { return map_id / group_size(); }
};

inline EvalPool build_eval_pool(int n_maps, int n_groups, uint64_t seed, const EnvConfig& env) {
    if (n_maps < 1 || n_groups < 1 || n_maps % n_groups != 0)
        throw std::invalid_argument("build_eval_pool: n_maps must divide evenly into n_groups");
    EvalPool pool;
    pool.n_groups = n_groups;
    pool.maps.reserve(static_cast<size_t>(n_maps));
    for (int i = 0; i < n_maps; ++i)
        pool.maps.push_back(random_map(derive_seed(seed, static_cast<uint64_t>(i)), env));
    return pool;
}

/// A method maps (initial map, map_id, change fraction) to a finished run.
using EditMethod = std::function<GenerationResult(const LevelMap&, int, double)>;

inline EvalRecord make_record(const GenerationResult& run, const EvalPool& pool, int map_id,
                              double fraction, const GoalSpec& goal) {
    EvalRecord rec;
    rec.map_id = map_id;
    rec.group_id = pool.group_of(map_id);
    rec.change_fraction = fraction;
    rec.success = run.success;
    SolveCache cache;
    const MapStats stats = map_stats(run.final_map, goal, &cache);
    rec.solution_length =
        stats.solution.kind == SolveResult::Kind::Solved ? stats.solution.length : 0;
    rec.total_reward = run.total_reward;
    rec.steps = run.steps_used;
    rec.changes = run.changes_used;
    return rec;
}

struct SweepResult {
    std::vector<EvalRecord> records;  // ordered by (fraction index, map_id)
    std::vector<SweepPoint> points;   // one per fraction
};

/// Runs a method over every pool map at every change fraction and aggregates
/// per-group success rates.
inline SweepResult sweep(const EditMethod& method, const EvalPool& pool,
                         const std::vector<double>& fractions, const GoalSpec& goal) {
    for (double f : fractions)
        if (f < 0.0 || f > 1.0) throw std::invalid_argument("sweep: fraction outside [0,1]");
    SweepResult out;
    for (double fraction : fractions) {
        std::vector<int> group_success(static_cast<size_t>(pool.n_groups), 0);
        int total_success = 0;
        for (int id = 0; id < static_cast<int>(pool.maps.size()); ++id) {
            const GenerationResult run = method(pool.maps[static_cast<size_t>(id)], id, fraction);
            const EvalRecord rec = make_record(run, pool, id, fraction, goal);
            if (rec.success) {
                ++group_success[static_cast<size_t>(rec.group_id)];
                ++total_success;
            }
            out.records.push_back(rec);
        }
        SweepPoint point;
        point.fraction = fraction;
        point.success_rate = static_cast<double>(total_success) / pool.maps.size();
        double mean = 0.0;
        for (int g = 0; g < pool.n_groups; ++g) {
            const double rate = static_cast<double>(group_success[static_cast<size_t>(g)]) /
                                pool.group_size();
            point.group_rates.push_back(rate);
            mean += rate;
        }
        mean /= pool.n_groups;
        double var = 0.0;
        for (double r : point.group_rates) var += (r - mean) * (r - mean);
        point.group_std = std::sqrt(var / pool.n_groups);
        out.points.push_back(std::move(point));
    }
    return out;
}

/// Means of the four reported metrics over successful records only.
inline TableSummary summarize_table(const std::vector<EvalRecord>& records) {
    TableSummary s;
    for (const EvalRecord& r : records) {
        if (!r.success) continue;
        ++s.n_success;
        s.mean_solution_length += r.solution_length;
        s.mean_total_reward += r.total_reward;
        s.mean_steps += r.steps;
        s.mean_changes += r.changes;
    }
    if (s.n_success == 0)
        throw std::invalid_argument("summarize_table: no successful records");
    s.mean_solution_length /= s.n_success;
    s.mean_total_reward /= s.n_success;
    s.mean_steps /= s.n_success;
    s.mean_changes /= s.n_success;
    return s;
}

/// Control baseline: uniformly random edits under the same budgets and
/// stopping criteria as the model.
inline GenerationResult baseline_random_edit(const LevelMap& map, const GoalSpec& goal,
                                             const RewardWeights& weights, int max_steps,
                                             double change_fraction, uint64_t seed) {
    Rng rng(seed);
    return run_editor(map, goal, weights, max_steps, change_fraction, /*target_rtg=*/0.0,
                      [&rng, &map](const LevelMap&, const MapStats&, int) {
                          return EditAction{tile_from_code(rng.uniform_int(kTileCount)),
                                            rng.uniform_int(map.width),
                                            rng.uniform_int(map.height)};
                      });
}

/// Comparator baseline: the dataset's greedy-with-noise repair policy run
/// under evaluation budgets.
inline GenerationResult baseline_behavior_policy(const LevelMap& map, const GoalSpec& goal,
                                                 const RewardWeights& weights, int max_steps,
                                                 double change_fraction, double epsilon,
                                                 uint64_t seed) {
    Rng rng(seed);
    auto cache = std::make_shared<SolveCache>();
    return run_editor(map, goal, weights, max_steps, change_fraction, /*target_rtg=*/0.0,
                      [&rng, &goal, &weights, epsilon, cache](const LevelMap& m,
                                                              const MapStats& stats, int) {
                          return behavior_policy_propose(m, stats, goal, weights, rng, epsilon,
                                                         cache.get());
                      });
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("spearman: need two equal-length series");
    auto ranks = [](const std::vector<double>& v) {
        const size_t n = v.size();
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), size_t{0});
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n, 0.0);
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> rx = ranks(xs);
    const std::vector<double> ry = ranks(ys);
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0, vx = 0, vy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

// ---------------------------------------------------------------------------
// Threshold checks over a finished evaluation run. Shared by `eval --check`
// and the acceptance suite so the gates cannot drift apart.
// ---------------------------------------------------------------------------

struct ThresholdCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// pcgpt_sweep must cover `fractions` in order; random/behavior sweeps hold a
/// single fraction-1.0 pass over the same pool.
inline std::vector<ThresholdCheck> evaluate_thresholds(const SweepResult& pcgpt_sweep,
                                                       const std::vector<double>& fractions,
                                                       const SweepResult& random_full,
                                                       const SweepResult& behavior_full,
                                                       size_t pool_size) {
    std::vector<ThresholdCheck> checks;
    char buf[160];

    const SweepPoint& model_full = pcgpt_sweep.points.back();
    const SweepPoint& rand_point = random_full.points.at(0);
    std::snprintf(buf, sizeof(buf), "pcgpt %.3f vs random %.3f", model_full.success_rate,
                  rand_point.success_rate);
    checks.push_back({"success-rate margin >= 0.20 at fraction 1.0",
                      model_full.success_rate - rand_point.success_rate >= 0.20, buf});

    const size_t off = pcgpt_sweep.records.size() - pool_size;  // last fraction's records
    double model_steps = 0, behavior_steps = 0;
    int intersection = 0;
    for (size_t i = 0; i < pool_size; ++i) {
        const EvalRecord& a = pcgpt_sweep.records[off + i];
        const EvalRecord& b = behavior_full.records.at(i);
        if (a.success && b.success) {
            model_steps += a.steps;
            behavior_steps += b.steps;
            ++intersection;
        }
    }
    if (intersection == 0 || behavior_steps == 0) {
        checks.push_back({"mean-steps ratio < 0.5 on success intersection", false,
                          "empty success intersection"});
    } else {
        const double ratio = model_steps / behavior_steps;
        std::snprintf(buf, sizeof(buf), "ratio %.3f over %d maps", ratio, intersection);
        checks.push_back({"mean-steps ratio < 0.5 on success intersection", ratio < 0.5, buf});
    }

    std::vector<double> rates;
    for (const SweepPoint& p : pcgpt_sweep.points) rates.push_back(p.success_rate);
    const double rho = spearman(fractions, rates);
    std::snprintf(buf, sizeof(buf), "spearman %.3f", rho);
    checks.push_back({"fraction/success-rate spearman >= 0.9", rho >= 0.9, buf});
    return checks;
}

// ---------------------------------------------------------------------------
// CSV reports. Columns are fixed; floats use %.9g so reruns are byte-stable.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}
}  // namespace detail

struct MethodRecords {
    std::string method;
    std::vector<EvalRecord> records;
    std::vector<SweepPoint> points;
};

inline void write_records_csv(const std::string& path, const std::vector<MethodRecords>& all) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_records_csv: cannot open " + path);
    out << "method,map_id,group_id,change_fraction,success,solution_length,total_reward,steps,"
           "changes\n";
    for (const auto& m : all)
        for (const EvalRecord& r : m.records)
            out << m.method << ',' << r.map_id << ',' << r.group_id << ','
                << detail::fmt_double(r.change_fraction) << ',' << (r.success ? 1 : 0) << ','
                << r.solution_length << ',' << detail::fmt_double(r.total_reward) << ',' << r.steps
                << ',' << r.changes << '\n';
    if (!out) throw IoError("write_records_csv: write failed");
}

inline void write_sweep_csv(const std::string& path, const std::vector<MethodRecords>& all) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_sweep_csv: cannot open " + path);
    out << "method,change_fraction,success_rate,group_std\n";
    for (const auto& m : all)
        for (const SweepPoint& p : m.points)
            out << m.method << ',' << detail::fmt_double(p.fraction) << ','
                << detail::fmt_double(p.success_rate) << ',' << detail::fmt_double(p.group_std)
                << '\n';
    if (!out) throw IoError("write_sweep_csv: write failed");
}

inline void write_summary_csv(const std::string& path, const std::vector<MethodRecords>& all) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_summary_csv: cannot open " + path);
    out << "method,n_success,mean_solution_length,mean_total_reward,mean_steps,mean_changes\n";
    for (const auto& m : all) {
        int successes = 0;
        for (const EvalRecord& r : m.records)
            if (r.success) ++successes;
        if (successes == 0) {
            out << m.method << ",0,,,,\n";
            continue;
        }
        const TableSummary s = summarize_table(m.records);
        out << m.method << ',' << s.n_success << ',' << detail::fmt_double(s.mean_solution_length)
            << ',' << detail::fmt_double(s.mean_total_reward) << ','
            << detail::fmt_double(s.mean_steps) << ',' << detail::fmt_double(s.mean_changes)
            << '\n';
    }
    if (!out) throw IoError("write_summary_csv: write failed");
}

}  // namespace pcgpt
