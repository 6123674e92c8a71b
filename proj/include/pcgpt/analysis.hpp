#pragma once

#include <string>
#include <unordered_map>

#include "pcgpt/sokoban.hpp"
#include "pcgpt/solver.hpp"

namespace pcgpt {

/// Structural summary of a map plus the solver verdict (when attempted).
struct MapStats {
    int player_count = 0;
    int box_count = 0;
    int target_count = 0;
    int region_count = 0;
    SolveResult solution;

    bool structurally_valid() const {
        return player_count == 1 && box_count == target_count && box_count >= 1 &&
               region_count == 1;
    }
};

/// Memo for solver verdicts keyed by tile content. Solving dominates the cost
/// of candidate scoring; identical maps recur while a policy explores. One
/// cache instance must only ever see one GoalSpec (the key ignores it).
class SolveCache {
public:
    explicit SolveCache(size_t max_entries = 1 << 18) : max_entries_(max_entries) {}

    const SolveResult* find(const std::string& key) const {
        auto it = cache_.find(key);
        return it == cache_.end() ? nullptr : &it->second;
    }

    void insert(const std::string& key, const SolveResult& result) {
        if (cache_.size() >= max_entries_) cache_.clear();
        cache_.emplace(key, result);
    }

private:
    size_t max_entries_;
    std::unordered_map<std::string, SolveResult> cache_;
};

/// Scans counts and regions; runs the solver only when the map is a plausible
/// level (one player, balanced boxes/targets, one region) since anything else
/// can never satisfy the goal.
inline MapStats map_stats(const LevelMap& map, const GoalSpec& goal, SolveCache* cache = nullptr) {
    MapStats stats;
    for (Tile t : map.tiles) {
        switch (t) {
            case Tile::Player: ++stats.player_count; break;
            case Tile::Box: ++stats.box_count; break;
            case Tile::Target: ++stats.target_count; break;
            default: break;
        }
    }
    stats.region_count = region_count(map);
    if (stats.structurally_valid()) {
        if (cache) {
            const std::string key = map_key(map);
            if (const SolveResult* hit = cache->find(key)) {
                stats.solution = *hit;
            } else {
                stats.solution = solve_astar(map, goal.solver_node_limit);
                cache->insert(key, stats.solution);
            }
        } else {
            stats.solution = solve_astar(map, goal.solver_node_limit);
        }
    }
    return stats;
}

/// Stopping predicate: balanced playable level whose optimal solution is at
/// least X moves.
inline bool is_goal(const MapStats& stats, const GoalSpec& goal) {
    if (stats.player_count != 1) return false;
    if (stats.box_count != stats.target_count || stats.box_count < 1) return false;
    if (goal.require_single_region && stats.region_count != 1) return false;
    return stats.solution.solved_with(goal.min_solution_length);
}

}  // namespace pcgpt
