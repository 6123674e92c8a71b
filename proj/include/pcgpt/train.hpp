#pragma once

#include <functional>
#include <vector>

#include "pcgpt/config.hpp"
#include "pcgpt/model.hpp"
#include "pcgpt/optim.hpp"
#include "pcgpt/trajectory.hpp"

namespace pcgpt {

struct TrainStepLog {
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
};

/// Full training run: AdamW with linear warmup on uniformly sampled padded
/// windows. Deterministic for a fixed config and dataset.
template <class S = float>
PcgptModel<S> train_model(const RunConfig& cfg, const std::vector<Trajectory>& trajectories,
                          std::vector<TrainStepLog>* log = nullptr,
                          const std::function<void(const TrainStepLog&)>& on_step = {}) {
    auto model = PcgptModel<S>::init(cfg.model, cfg.training.seed);
    auto params = model.params();
    num::AdamWConfig ocfg;
    ocfg.lr_base = cfg.training.lr_base;
    ocfg.weight_decay = cfg.training.weight_decay;
    num::AdamW<S> opt(ocfg);

    Rng batch_rng = Rng::child(cfg.training.seed, 101);
    Rng dropout_rng = Rng::child(cfg.training.seed, 102);

    const int total_steps = cfg.training.epochs * cfg.training.steps_per_epoch;
    for (int step = 0; step < total_steps; ++step) {
        const double mult = num::lr_multiplier(step, cfg.training.warmup_steps);
        const auto batch = sample_batch(trajectories, cfg.training.batch_size,
                                        cfg.model.context_steps, batch_rng);
        const ModelInput in = input_from_windows(batch, cfg.model);
        auto loss = model.loss(model.forward(in, true, &dropout_rng), in);
        num::backward(loss);
        opt.step(params, mult);

        const TrainStepLog entry{step, static_cast<double>(loss.item()),
                                 cfg.training.lr_base * mult};
        if (log) log->push_back(entry);
        if (on_step) on_step(entry);
    }
    return model;
}

}  // namespace pcgpt
