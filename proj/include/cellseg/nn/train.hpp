#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cellseg/nn/optim.hpp"

namespace cellseg::nn {

// Shared hyperparameters for both training stages (Adam + cross-entropy).
struct TrainSpec {
    int epochs = 100;
    double learning_rate = 1e-4;
    int batch_size = 4;
    std::string checkpoint_path;
    std::uint64_t rng_seed = 0;

    // Throws UsageError on non-positive epochs / learning rate / batch size.
    void validate() const;
};

// One training example: input (C,H,W), per-pixel class target (H,W).
struct TrainSample {
    Tensor input;
    Tensor target;
};

// Minibatch loop: shuffles every epoch, runs forward/backward/Adam, records the
// mean loss per epoch. Throws DivergenceError as soon as a batch loss is
// non-finite. `forward` maps a (B,C,H,W) input Var to (B,K,H,W) logits.
std::vector<double> run_training(const std::vector<TrainSample>& samples, const TrainSpec& spec,
                                 const std::vector<Var>& params,
                                 const std::function<Var(const Var&)>& forward, Rng& rng);

}  // namespace cellseg::nn
