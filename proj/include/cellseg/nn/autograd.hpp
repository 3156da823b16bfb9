#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cellseg/nn/tensor.hpp"

namespace cellseg::nn {

// Tape-style reverse-mode autodiff. Ops build a DAG of Nodes; backward() walks
// it in reverse topological order. Gradients accumulate, so shared subgraphs
// (skip connections, attention gates) come out right without special casing.
struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    bool is_leaf = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    Tensor& ensure_grad();
};

using Var = std::shared_ptr<Node>;

Var make_leaf(Tensor value, bool requires_grad);
Var make_input(Tensor value);  // leaf that never needs gradients

// When gradients are disabled, ops produce detached nodes (no parents, no
// backward_fn). Scoped off-switch for inference.
bool grad_enabled();
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Runs reverse-mode accumulation from a scalar root (root grad seeded with 1).
void backward(const Var& root);

// --- ops ---------------------------------------------------------------

// x (N,Cin,H,W), w (Cout,Cin,kh,kw), b (Cout). Output spatial size follows the
// usual (H + 2*pad - dilation*(kh-1) - 1)/stride + 1 rule.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int dilation = 1);

// x (N,F), w (G,F), b (G) -> (N,G)
Var linear(const Var& x, const Var& w, const Var& b);

Var relu(const Var& x);
Var sigmoid(const Var& x);

// 2x2 max pooling, stride 2. Spatial dims must be even.
Var maxpool2(const Var& x);

// Integer-factor nearest-neighbor upsampling.
Var upsample_nearest(const Var& x, int factor);

// (N,C,H,W) -> (N,C) spatial mean.
Var global_avg_pool(const Var& x);

// out[n,c,h,w] = x[n,c,h,w] * gate[n,c]
Var scale_channels(const Var& x, const Var& gate);

Var add(const Var& a, const Var& b);
Var mul_scalar(const Var& x, double s);
Var concat_channels(const std::vector<Var>& xs);
Var slice_channels(const Var& x, int c0, int c1);

// logits (N,K,H,W), labels (N,H,W) holding class indices. Mean cross-entropy
// over batch and pixels.
Var softmax_cross_entropy(const Var& logits, const Tensor& labels);

// --- plain tensor helpers (no autograd) --------------------------------

// Per-pixel softmax over the channel axis of a (K,H,W) or (N,K,H,W) tensor.
Tensor softmax_channels(const Tensor& logits);

}  // namespace cellseg::nn
