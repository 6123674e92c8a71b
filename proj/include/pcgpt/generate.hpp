#pragma once

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcgpt/analysis.hpp"
#include "pcgpt/model.hpp"
#include "pcgpt/reward.hpp"
#include "pcgpt/sokoban.hpp"
#include "pcgpt/trajectory.hpp"

namespace pcgpt {

enum class DecodeMode { Greedy, Sample };

struct GenerationConfig {
    double target_rtg = 0.0;
    int max_steps = 50;
    double change_budget_fraction = 1.0;
    DecodeMode decode = DecodeMode::Greedy;
    double temperature = 1.0;
    uint64_t seed = 0;

    void validate() const {
        if (max_steps < 1) throw ConfigError("generation: max_steps must be >= 1");
        if (change_budget_fraction < 0.0 || change_budget_fraction > 1.0)
            throw ConfigError("generation: change fraction outside [0,1]");
        if (decode == DecodeMode::Sample && temperature <= 0.0)
            throw ConfigError("generation: sampling temperature must be positive");
    }
};

struct GenerationResult {
    LevelMap final_map;
    bool success = false;
    int steps_used = 0;
    int changes_used = 0;
    double total_reward = 0.0;
    Trajectory trajectory;                 // audit record in dataset schema
    std::vector<double> conditioning_rtg;  // target-decremented sequence, one per step + residual
};

namespace detail {

template <class S>
int argmax_lowest(const S* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

template <class S>
int sample_softmax(const S* v, int n, double temperature, Rng& rng) {
    std::vector<double> p(static_cast<size_t>(n));
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(v[i]) / temperature);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        p[static_cast<size_t>(i)] = std::exp(static_cast<double>(v[i]) / temperature - mx);
        sum += p[static_cast<size_t>(i)];
    }
    const double u = rng.uniform() * sum;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += p[static_cast<size_t>(i)];
        if (u < acc) return i;
    }
    return n - 1;
}

struct NoopObserver {
    void operator()(const LevelMap&, const EditAction&, double, double) const {}
};

}  // namespace detail

/// Turns the three head logit rows for one position into an edit.
template <class S>
EditAction decode_action(const S* item_logits, int item_n, const S* x_logits, int x_n,
                         const S* y_logits, int y_n, DecodeMode mode, double temperature,
                         Rng& rng) {
    auto check_finite = [](const S* v, int n) {
        for (int i = 0; i < n; ++i)
            if (!std::isfinite(static_cast<double>(v[i])))
                throw std::invalid_argument("decode_action: non-finite logits");
    };
    check_finite(item_logits, item_n);
    check_finite(x_logits, x_n);
    check_finite(y_logits, y_n);

    if (mode == DecodeMode::Greedy) {
        return {tile_from_code(detail::argmax_lowest(item_logits, item_n)),
                detail::argmax_lowest(x_logits, x_n), detail::argmax_lowest(y_logits, y_n)};
    }
    return {tile_from_code(detail::sample_softmax(item_logits, item_n, temperature, rng)),
            detail::sample_softmax(x_logits, x_n, temperature, rng),
            detail::sample_softmax(y_logits, y_n, temperature, rng)};
}

/// Shared editing loop for the model and the baseline policies. Checks the
/// stopping criteria before every step (an already-satisfying map uses zero
/// steps), enforces the change budget by recording over-budget changed-tile
/// edits as no_actions, and keeps reward/return bookkeeping plus the audit
/// trajectory.
///
/// propose(map, stats, step_index) -> EditAction proposes the next edit;
/// on_executed(map_before, executed_action, reward, rtg_before) observes each
/// executed step (after budget enforcement).
template <class ProposeFn, class ObserverFn = detail::NoopObserver>
GenerationResult run_editor(const LevelMap& initial_map, const GoalSpec& goal,
                            const RewardWeights& weights, int max_steps,
                            double change_budget_fraction, double target_rtg, ProposeFn&& propose,
                            ObserverFn&& on_executed = ObserverFn{}) {
    const int change_budget =
        static_cast<int>(std::floor(change_budget_fraction * initial_map.cell_count()));
    SolveCache cache;

    GenerationResult result;
    LevelMap map = initial_map;
    MapStats stats = map_stats(map, goal, &cache);
    double rtg = target_rtg;
    std::vector<double> rewards;

    while (true) {
        if (is_goal(stats, goal)) {
            result.success = true;
            break;
        }
        if (result.steps_used >= max_steps) break;

        EditAction action = propose(map, stats, result.steps_used);
        if (!map.in_bounds(action.x, action.y))
            throw std::invalid_argument("run_editor: policy proposed an out-of-range edit");
        const bool would_change = map.at(action.x, action.y) != action.item;
        if (would_change && result.changes_used >= change_budget)
            action.item = map.at(action.x, action.y);  // forced no_action

        auto [next, changed] = apply_edit(map, action);
        const MapStats next_stats = map_stats(next, goal, &cache);
        const double reward = step_reward(stats, next_stats, weights, goal);

        on_executed(map, action, reward, rtg);
        result.trajectory.steps.push_back({map, action, reward, 0.0});
        rewards.push_back(reward);
        result.conditioning_rtg.push_back(rtg);
        rtg = decrement_rtg(rtg, reward);
        if (changed) ++result.changes_used;
        ++result.steps_used;
        map = std::move(next);
        stats = next_stats;
    }
    result.conditioning_rtg.push_back(rtg);  // terminal residual

    result.final_map = map;
    result.trajectory.terminal_state = std::move(map);
    result.trajectory.success = result.success;
    const std::vector<double> rtg_seq = compute_rtg(rewards);
    for (size_t i = 0; i < rtg_seq.size(); ++i) result.trajectory.steps[i].rtg = rtg_seq[i];
    for (double r : rewards) result.total_reward += r;
    return result;
}

/// Autoregressive generation: keeps a sliding window over the most recent
/// min(t+1, K) timesteps, hides the current step's action slot behind the
/// learned mask embedding, decodes an edit, applies it, and decrements the
/// conditioning return by the realized reward. Dropout stays off throughout.
template <class S>
GenerationResult generate(const PcgptModel<S>& model, const LevelMap& initial_map,
                          const GoalSpec& goal, const RewardWeights& weights,
                          const GenerationConfig& gen_cfg) {
    gen_cfg.validate();
    if (model.cfg.width != initial_map.width || model.cfg.height != initial_map.height)
        throw DimensionError("generate: checkpoint grid dims do not match the map");

    const int K = model.cfg.context_steps;
    struct HistoryStep {
        double rtg;
        std::vector<int> state;
        EditAction action;
    };
    std::deque<HistoryStep> history;  // most recent K-1 completed steps
    Rng decode_rng(gen_cfg.seed);
    double current_rtg = gen_cfg.target_rtg;

    auto propose = [&](const LevelMap& map, const MapStats& stats, int step) -> EditAction {
        (void)stats;
        (void)step;
        const int m = static_cast<int>(history.size()) + 1;
        ModelInput in;
        in.B = 1;
        in.K = K;
        auto push_slot = [&](double slot_rtg, const std::vector<int>& state,
                             const EditAction& act) {
            in.rtg.push_back(slot_rtg);
            in.states.insert(in.states.end(), state.begin(), state.end());
            in.act_item.push_back(static_cast<int>(act.item));
            in.act_x.push_back(act.x);
            in.act_y.push_back(act.y);
            in.loss_mask.push_back(1);
        };
        // rtg for the queried step is the caller's running conditioning value,
        // observed via the last history entry's bookkeeping below.
        for (const HistoryStep& h : history) push_slot(h.rtg, h.state, h.action);
        const std::vector<int> current_state = encode_int_grid(map);
        const EditAction dummy{Tile::Empty, 0, 0};  // hidden by the query mask
        push_slot(current_rtg, current_state, dummy);
        for (int k = m; k < K; ++k) push_slot(current_rtg, current_state, dummy);  // padding

        num::NoGradGuard no_grad;
        const ModelOutput<S> out = model.forward(in, false, nullptr);
        const int q = m - 1;
        const S* item_row =
            out.item_logits.value().data() + static_cast<size_t>(q) * model.cfg.item_vocab;
        const S* x_row = out.x_logits.value().data() + static_cast<size_t>(q) * model.cfg.width;
        const S* y_row = out.y_logits.value().data() + static_cast<size_t>(q) * model.cfg.height;
        return decode_action(item_row, model.cfg.item_vocab, x_row, model.cfg.width, y_row,
                             model.cfg.height, gen_cfg.decode, gen_cfg.temperature, decode_rng);
    };

    auto on_executed = [&](const LevelMap& map_before, const EditAction& executed, double reward,
                           double rtg_before) {
        history.push_back({rtg_before, encode_int_grid(map_before), executed});
        while (static_cast<int>(history.size()) > K - 1) history.pop_front();
        current_rtg = decrement_rtg(rtg_before, reward);
    };

    return run_editor(initial_map, goal, weights, gen_cfg.max_steps,
                      gen_cfg.change_budget_fraction, gen_cfg.target_rtg, propose, on_executed);
}

/// Conditioning default: the highest initial return-to-go among successful
/// dataset trajectories.
inline double default_target_rtg(const std::vector<Trajectory>& trajectories) {
    bool found = false;
    double best = 0.0;
    for (const Trajectory& t : trajectories) {
        if (!t.success || t.steps.empty()) continue;
        if (!found || t.steps.front().rtg > best) best = t.steps.front().rtg;
        found = true;
    }
    if (!found)
        throw std::invalid_argument("default_target_rtg: no successful trajectory in dataset");
    return best;
}

}  // namespace pcgpt
