#pragma once

#include <string>
#include <vector>

#include "cellseg/nn/autograd.hpp"

namespace cellseg::nn {

struct NamedParam {
    std::string name;
    Var var;
};

// 2D convolution with owned weight/bias, He-normal initialized.
struct Conv2dLayer {
    Var w, b;
    int stride = 1, pad = 0, dilation = 1;

    Conv2dLayer() = default;
    Conv2dLayer(int in_ch, int out_ch, int kernel, int stride, int pad, int dilation, Rng& rng);

    Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad, dilation); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct LinearLayer {
    Var w, b;

    LinearLayer() = default;
    LinearLayer(int in_features, int out_features, Rng& rng);

    Var operator()(const Var& x) const { return linear(x, w, b); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Squeeze-excitation style gate: sigmoid(fc2(relu(fc1(global_avg_pool(x)))))
// applied per channel.
struct ChannelAttention {
    LinearLayer fc1, fc2;

    ChannelAttention() = default;
    ChannelAttention(int channels, int reduction, Rng& rng);

    Var operator()(const Var& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

}  // namespace cellseg::nn
