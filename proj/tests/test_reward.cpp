#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pcgpt/common.hpp"
#include "pcgpt/reward.hpp"

using namespace pcgpt;

namespace {

MapStats make_stats(int players, int boxes, int targets, int regions, SolveResult solution) {
    MapStats s;
    s.player_count = players;
    s.box_count = boxes;
    s.target_count = targets;
    s.region_count = regions;
    s.solution = solution;
    return s;
}

}  // namespace

TEST(Potential, GoalMapHitsMaximum) {
    const GoalSpec goal;
    const RewardWeights w;
    const MapStats stats = make_stats(1, 2, 2, 1, SolveResult::solved(18, "", 0));
    EXPECT_DOUBLE_EQ(potential(stats, w, goal), w.w_solution * goal.min_solution_length);

    // Longer solutions do not score beyond the cap.
    const MapStats longer = make_stats(1, 2, 2, 1, SolveResult::solved(30, "", 0));
    EXPECT_DOUBLE_EQ(potential(longer, w, goal), potential(stats, w, goal));
}

TEST(Potential, AllWallMap) {
    const GoalSpec goal;
    const RewardWeights w;
    // players=0 costs w_player, box count 0 sits one unit below the [1,3]
    // range, everything else contributes nothing.
    const MapStats stats = make_stats(0, 0, 0, 0, SolveResult::not_attempted());
    EXPECT_DOUBLE_EQ(potential(stats, w, goal), -5.0);
}

TEST(Potential, MatchesHandComputedFixture) {
    const GoalSpec goal;
    const RewardWeights w;
    LevelMap map = parse_ascii(
        "@.#..\n"
        "..#..\n"
        ".....\n"
        "..$..\n"
        "....*");
    const MapStats stats = map_stats(map, goal);
    // Independent recount: 1 player, 1 box, 1 target, one region, and the
    // solver runs because the structural gate holds.
    EXPECT_EQ(stats.player_count, 1);
    EXPECT_EQ(stats.box_count, 1);
    EXPECT_EQ(stats.target_count, 1);
    EXPECT_EQ(stats.region_count, 1);
    ASSERT_EQ(stats.solution.kind, SolveResult::Kind::Solved);
    const double expected = 0.0 - 0.0 - 0.0 + 1.0 * std::min(stats.solution.length, 18);
    EXPECT_DOUBLE_EQ(potential(stats, w, goal), expected);
}

TEST(Potential, UnbalancedAndFragmentedPenalties) {
    const GoalSpec goal;
    const RewardWeights w;
    // 2 players, 4 boxes vs 1 target, 3 regions, no solve attempt:
    // -3*1 - 2*(3 + 1) - 5*2 = -21.
    const MapStats stats = make_stats(2, 4, 1, 3, SolveResult::not_attempted());
    EXPECT_DOUBLE_EQ(potential(stats, w, goal), -21.0);
}

TEST(StepReward, NoActionIsZero) {
    const GoalSpec goal;
    const RewardWeights w;
    const MapStats stats = make_stats(1, 2, 2, 1, SolveResult::solved(5, "", 0));
    EXPECT_DOUBLE_EQ(step_reward(stats, stats, w, goal), 0.0);
}

TEST(StepReward, RegionMergeScoresWRegion) {
    const GoalSpec goal;
    const RewardWeights w;
    const MapStats before = make_stats(1, 2, 2, 2, SolveResult::not_attempted());
    const MapStats after = make_stats(1, 2, 2, 1, SolveResult::not_attempted());
    EXPECT_DOUBLE_EQ(step_reward(before, after, w, goal), w.w_region);
}

TEST(StepReward, TelescopesOverChains) {
    const GoalSpec goal;
    const RewardWeights w;
    Rng rng(3);
    std::vector<MapStats> chain;
    for (int i = 0; i < 20; ++i)
        chain.push_back(make_stats(rng.uniform_int(3), rng.uniform_int(5), rng.uniform_int(5),
                                   1 + rng.uniform_int(3), SolveResult::not_attempted()));
    double total = 0.0;
    for (size_t i = 0; i + 1 < chain.size(); ++i)
        total += step_reward(chain[i], chain[i + 1], w, goal);
    EXPECT_DOUBLE_EQ(total, potential(chain.back(), w, goal) - potential(chain.front(), w, goal));
}

TEST(ComputeRtg, Examples) {
    EXPECT_TRUE(compute_rtg({}).empty());
    const std::vector<double> rtg = compute_rtg({1, 2, 3});
    ASSERT_EQ(rtg.size(), 3u);
    EXPECT_DOUBLE_EQ(rtg[0], 6);
    EXPECT_DOUBLE_EQ(rtg[1], 5);
    EXPECT_DOUBLE_EQ(rtg[2], 3);
}

TEST(ComputeRtg, DefiningRecurrence) {
    Rng rng(5);
    std::vector<double> rewards;
    for (int i = 0; i < 100; ++i) rewards.push_back(rng.uniform() * 20 - 10);
    const std::vector<double> rtg = compute_rtg(rewards);
    for (size_t t = 0; t + 1 < rtg.size(); ++t) EXPECT_NEAR(rtg[t] - rtg[t + 1], rewards[t], 1e-9);
    EXPECT_DOUBLE_EQ(rtg.back(), rewards.back());
}

TEST(DecrementRtg, Examples) {
    EXPECT_DOUBLE_EQ(decrement_rtg(10, 3), 7);
    EXPECT_DOUBLE_EQ(decrement_rtg(-2.5, 0), -2.5);
}

TEST(DecrementRtg, FoldReproducesComputeRtg) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> rewards;
        const int n = 1 + rng.uniform_int(60);
        for (int i = 0; i < n; ++i) rewards.push_back(rng.uniform() * 40 - 20);
        const std::vector<double> rtg = compute_rtg(rewards);
        double running = rtg[0];
        for (int t = 0; t + 1 < n; ++t) {
            running = decrement_rtg(running, rewards[static_cast<size_t>(t)]);
            EXPECT_NEAR(running, rtg[static_cast<size_t>(t) + 1], 1e-9);
        }
    }
}
