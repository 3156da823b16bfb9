#pragma once

#include <vector>

#include "cellseg/nn/layers.hpp"

namespace cellseg::nn {

// Adam with the standard bias-corrected moment estimates.
class Adam {
public:
    explicit Adam(std::vector<Var> params, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    void zero_grad();
    void step(double learning_rate);

private:
    std::vector<Var> params_;
    std::vector<Tensor> m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace cellseg::nn
