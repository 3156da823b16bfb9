#include "cellseg/nn/layers.hpp"

#include <cmath>

#include "cellseg/errors.hpp"

namespace cellseg::nn {

Conv2dLayer::Conv2dLayer(int in_ch, int out_ch, int kernel, int stride, int pad, int dilation,
                         Rng& rng)
    : stride(stride), pad(pad), dilation(dilation) {
    double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch) * kernel * kernel));
    w = make_leaf(randn(rng, {out_ch, in_ch, kernel, kernel}, stddev), true);
    b = make_leaf(Tensor::zeros({out_ch}), true);
}

void Conv2dLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

LinearLayer::LinearLayer(int in_features, int out_features, Rng& rng) {
    double stddev = std::sqrt(2.0 / static_cast<double>(in_features));
    w = make_leaf(randn(rng, {out_features, in_features}, stddev), true);
    b = make_leaf(Tensor::zeros({out_features}), true);
}

void LinearLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

ChannelAttention::ChannelAttention(int channels, int reduction, Rng& rng) {
    int mid = std::max(1, channels / reduction);
    fc1 = LinearLayer(channels, mid, rng);
    fc2 = LinearLayer(mid, channels, rng);
}

Var ChannelAttention::operator()(const Var& x) const {
    Var gate = sigmoid(fc2(relu(fc1(global_avg_pool(x)))));
    return scale_channels(x, gate);
}

void ChannelAttention::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

}  // namespace cellseg::nn
