#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "pcgpt/analysis.hpp"

namespace pcgpt {

/// Per-unit weights of the shaped reward's potential function.
struct RewardWeights {
    double w_player = 3.0;
    double w_box_target_balance = 2.0;
    double w_region = 5.0;
    double w_solution = 1.0;
    int box_count_min = 1;
    int box_count_max = 3;
};

/// Potential of a map: penalties for structural defects plus a bounded bonus
/// for solution length. Rewards are differences of this, so trajectory totals
/// depend only on the endpoints.
inline double potential(const MapStats& stats, const RewardWeights& w, const GoalSpec& goal) {
    const int balance_gap = std::abs(stats.box_count - stats.target_count);
    int range_gap = 0;
    if (stats.box_count < w.box_count_min) range_gap = w.box_count_min - stats.box_count;
    if (stats.box_count > w.box_count_max) range_gap = stats.box_count - w.box_count_max;
    const int extra_regions = std::max(0, stats.region_count - 1);
    const int solved_len =
        stats.solution.kind == SolveResult::Kind::Solved ? stats.solution.length : 0;

    return -w.w_player * std::abs(stats.player_count - 1) -
           w.w_box_target_balance * (balance_gap + range_gap) - w.w_region * extra_regions +
           w.w_solution * std::min(solved_len, goal.min_solution_length);
}

inline double step_reward(const MapStats& prev, const MapStats& next, const RewardWeights& w,
                          const GoalSpec& goal) {
    return potential(next, w, goal) - potential(prev, w, goal);
}

/// Return-to-go sequence: output[t] is the sum of rewards from t to the end.
inline std::vector<double> compute_rtg(const std::vector<double>& rewards) {
    std::vector<double> rtg(rewards.size(), 0.0);
    double tail = 0.0;
    for (size_t i = rewards.size(); i-- > 0;) {
        tail = rewards[i] + tail;
        rtg[i] = tail;
    }
    return rtg;
}

/// One inference-time update of the conditioning return.
inline double decrement_rtg(double rtg, double reward) { return rtg - reward; }

}  // namespace pcgpt
