#include "cellseg/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cellseg/errors.hpp"

namespace cellseg::nn {

void TrainSpec::validate() const {
    if (epochs < 1) throw UsageError("TrainSpec: epochs must be >= 1, got " + std::to_string(epochs));
    if (!(learning_rate > 0.0)) throw UsageError("TrainSpec: learning_rate must be positive");
    if (batch_size < 1) throw UsageError("TrainSpec: batch_size must be >= 1");
}

std::vector<double> run_training(const std::vector<TrainSample>& samples, const TrainSpec& spec,
                                 const std::vector<Var>& params,
                                 const std::function<Var(const Var&)>& forward, Rng& rng) {
    spec.validate();
    if (samples.empty()) throw DataError("run_training: empty dataset");

    Adam optim(params);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(spec.epochs));
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        // Fisher-Yates on the shared stream keeps runs reproducible per seed.
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
        }
        double epoch_loss = 0.0;
        long seen = 0;
        for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
            std::size_t bsz = std::min<std::size_t>(spec.batch_size, order.size() - start);
            const Tensor& in0 = samples[order[start]].input;
            Tensor batch({static_cast<int>(bsz), in0.dim(0), in0.dim(1), in0.dim(2)});
            Tensor labels({static_cast<int>(bsz), in0.dim(1), in0.dim(2)});
            for (std::size_t i = 0; i < bsz; ++i) {
                const TrainSample& s = samples[order[start + i]];
                std::copy(s.input.data.begin(), s.input.data.end(),
                          batch.data.begin() + static_cast<long>(i) * s.input.numel());
                std::copy(s.target.data.begin(), s.target.data.end(),
                          labels.data.begin() + static_cast<long>(i) * s.target.numel());
            }
            optim.zero_grad();
            Var loss = softmax_cross_entropy(forward(make_input(std::move(batch))), labels);
            double loss_value = loss->value.data[0];
            if (!std::isfinite(loss_value)) {
                throw DivergenceError("training loss became non-finite at epoch " +
                                      std::to_string(epoch + 1));
            }
            backward(loss);
            optim.step(spec.learning_rate);
            epoch_loss += loss_value * static_cast<double>(bsz);
            seen += static_cast<long>(bsz);
        }
        history.push_back(epoch_loss / static_cast<double>(seen));
    }
    return history;
}

}  // namespace cellseg::nn
