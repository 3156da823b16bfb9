#include "cellseg/nn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "cellseg/errors.hpp"

namespace cellseg::nn {

namespace {

thread_local bool g_grad_enabled = true;

std::string shape_str(const Tensor& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

bool track(const std::vector<Var>& parents) {
    if (!g_grad_enabled) return false;
    for (const Var& p : parents) {
        if (p->requires_grad) return true;
    }
    return false;
}

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    if (track(parents)) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return node;
}

}  // namespace

Tensor& Node::ensure_grad() {
    if (grad.data.empty()) grad = Tensor::zeros(value.shape);
    return grad;
}

Var make_leaf(Tensor value, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    node->is_leaf = true;
    return node;
}

Var make_input(Tensor value) { return make_leaf(std::move(value), false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Var& root) {
    if (root->value.numel() != 1) {
        throw DataError("backward: root must be a scalar, got shape " + shape_str(root->value));
    }
    // Iterative postorder DFS for the topological order.
    std::vector<Node*> topo;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, child] = stack.back();
        if (child < node->parents.size()) {
            Node* next = node->parents[child++].get();
            if (next->requires_grad && !visited.count(next)) {
                visited.insert(next);
                stack.emplace_back(next, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad().fill(1.0);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) node->backward_fn(*node);
    }
}

// --- convolution --------------------------------------------------------

namespace {

struct ConvDims {
    int N, Cin, H, W, Cout, kh, kw, Ho, Wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad, int dil) {
    if (x.ndim() != 4 || w.ndim() != 4) {
        throw DataError("conv2d: expected 4D input and weight, got " + shape_str(x) + " and " +
                        shape_str(w));
    }
    if (x.dim(1) != w.dim(1)) {
        throw DataError("conv2d: input channels " + std::to_string(x.dim(1)) +
                        " do not match weight channels " + std::to_string(w.dim(1)));
    }
    ConvDims d;
    d.N = x.dim(0);
    d.Cin = x.dim(1);
    d.H = x.dim(2);
    d.W = x.dim(3);
    d.Cout = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.Ho = (d.H + 2 * pad - dil * (d.kh - 1) - 1) / stride + 1;
    d.Wo = (d.W + 2 * pad - dil * (d.kw - 1) - 1) / stride + 1;
    if (d.Ho < 1 || d.Wo < 1) {
        throw DataError("conv2d: output would be empty for input " + shape_str(x));
    }
    return d;
}

void im2col(const double* x, const ConvDims& d, int stride, int pad, int dil, double* col) {
    const int L = d.Ho * d.Wo;
    for (int ci = 0; ci < d.Cin; ++ci) {
        const double* plane = x + static_cast<std::size_t>(ci) * d.H * d.W;
        for (int ki = 0; ki < d.kh; ++ki) {
            for (int kj = 0; kj < d.kw; ++kj) {
                double* row = col + (static_cast<std::size_t>(ci) * d.kh * d.kw +
                                     static_cast<std::size_t>(ki) * d.kw + kj) *
                                        L;
                for (int oh = 0; oh < d.Ho; ++oh) {
                    int ih = oh * stride - pad + ki * dil;
                    double* out = row + static_cast<std::size_t>(oh) * d.Wo;
                    if (ih < 0 || ih >= d.H) {
                        std::fill(out, out + d.Wo, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(ih) * d.W;
                    for (int ow = 0; ow < d.Wo; ++ow) {
                        int iw = ow * stride - pad + kj * dil;
                        out[ow] = (iw >= 0 && iw < d.W) ? src[iw] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_accum(const double* col, const ConvDims& d, int stride, int pad, int dil, double* gx) {
    const int L = d.Ho * d.Wo;
    for (int ci = 0; ci < d.Cin; ++ci) {
        double* plane = gx + static_cast<std::size_t>(ci) * d.H * d.W;
        for (int ki = 0; ki < d.kh; ++ki) {
            for (int kj = 0; kj < d.kw; ++kj) {
                const double* row = col + (static_cast<std::size_t>(ci) * d.kh * d.kw +
                                           static_cast<std::size_t>(ki) * d.kw + kj) *
                                              L;
                for (int oh = 0; oh < d.Ho; ++oh) {
                    int ih = oh * stride - pad + ki * dil;
                    if (ih < 0 || ih >= d.H) continue;
                    const double* src = row + static_cast<std::size_t>(oh) * d.Wo;
                    double* dst = plane + static_cast<std::size_t>(ih) * d.W;
                    for (int ow = 0; ow < d.Wo; ++ow) {
                        int iw = ow * stride - pad + kj * dil;
                        if (iw >= 0 && iw < d.W) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int dilation) {
    const ConvDims d = conv_dims(x->value, w->value, stride, pad, dilation);
    if (b->value.numel() != d.Cout) {
        throw DataError("conv2d: bias size " + std::to_string(b->value.numel()) +
                        " does not match output channels " + std::to_string(d.Cout));
    }
    const int K = d.Cin * d.kh * d.kw;
    const int L = d.Ho * d.Wo;

    Tensor out({d.N, d.Cout, d.Ho, d.Wo});
    Tensor col({K, L});
    for (int n = 0; n < d.N; ++n) {
        im2col(x->value.ptr() + static_cast<std::size_t>(n) * d.Cin * d.H * d.W, d, stride, pad,
               dilation, col.ptr());
        double* out_n = out.ptr() + static_cast<std::size_t>(n) * d.Cout * L;
        for (int co = 0; co < d.Cout; ++co) {
            std::fill(out_n + static_cast<std::size_t>(co) * L,
                      out_n + static_cast<std::size_t>(co + 1) * L, b->value.data[co]);
        }
        gemm_accum(w->value.ptr(), col.ptr(), out_n, d.Cout, K, L);
    }

    return make_result(std::move(out), {x, w, b}, [d, stride, pad, dilation, K, L](Node& node) {
        const Var& x = node.parents[0];
        const Var& w = node.parents[1];
        const Var& b = node.parents[2];
        Tensor col({K, L});
        Tensor gcol({K, L});
        for (int n = 0; n < d.N; ++n) {
            const double* gy_n = node.grad.ptr() + static_cast<std::size_t>(n) * d.Cout * L;
            im2col(x->value.ptr() + static_cast<std::size_t>(n) * d.Cin * d.H * d.W, d, stride,
                   pad, dilation, col.ptr());
            if (w->requires_grad) {
                gemm_accum_bt(gy_n, col.ptr(), w->ensure_grad().ptr(), d.Cout, L, K);
            }
            if (b->requires_grad) {
                double* gb = b->ensure_grad().ptr();
                for (int co = 0; co < d.Cout; ++co) {
                    const double* row = gy_n + static_cast<std::size_t>(co) * L;
                    double acc = 0.0;
                    for (int l = 0; l < L; ++l) acc += row[l];
                    gb[co] += acc;
                }
            }
            if (x->requires_grad) {
                gcol.fill(0.0);
                gemm_accum_at(w->value.ptr(), gy_n, gcol.ptr(), K, d.Cout, L);
                col2im_accum(gcol.ptr(), d, stride, pad, dilation,
                             x->ensure_grad().ptr() +
                                 static_cast<std::size_t>(n) * d.Cin * d.H * d.W);
            }
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    if (x->value.ndim() != 2 || w->value.ndim() != 2 || x->value.dim(1) != w->value.dim(1)) {
        throw DataError("linear: incompatible shapes " + shape_str(x->value) + " and " +
                        shape_str(w->value));
    }
    const int N = x->value.dim(0), F = x->value.dim(1), G = w->value.dim(0);
    Tensor out({N, G});
    for (int n = 0; n < N; ++n) {
        for (int g = 0; g < G; ++g) out.data[static_cast<std::size_t>(n) * G + g] = b->value.data[g];
    }
    gemm_accum_bt(x->value.ptr(), w->value.ptr(), out.ptr(), N, F, G);

    return make_result(std::move(out), {x, w, b}, [N, F, G](Node& node) {
        const Var& x = node.parents[0];
        const Var& w = node.parents[1];
        const Var& b = node.parents[2];
        if (x->requires_grad) {
            gemm_accum(node.grad.ptr(), w->value.ptr(), x->ensure_grad().ptr(), N, G, F);
        }
        if (w->requires_grad) {
            gemm_accum_at(node.grad.ptr(), x->value.ptr(), w->ensure_grad().ptr(), G, N, F);
        }
        if (b->requires_grad) {
            double* gb = b->ensure_grad().ptr();
            for (int n = 0; n < N; ++n) {
                for (int g = 0; g < G; ++g) gb[g] += node.grad.data[static_cast<std::size_t>(n) * G + g];
            }
        }
    });
}

Var relu(const Var& x) {
    Tensor out = x->value;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return make_result(std::move(out), {x}, [](Node& node) {
        const Var& x = node.parents[0];
        if (!x->requires_grad) return;
        Tensor& gx = x->ensure_grad();
        for (long i = 0; i < node.value.numel(); ++i) {
            if (node.value.data[i] > 0.0) gx.data[i] += node.grad.data[i];
        }
    });
}

Var sigmoid(const Var& x) {
    Tensor out = x->value;
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return make_result(std::move(out), {x}, [](Node& node) {
        const Var& x = node.parents[0];
        if (!x->requires_grad) return;
        Tensor& gx = x->ensure_grad();
        for (long i = 0; i < node.value.numel(); ++i) {
            double y = node.value.data[i];
            gx.data[i] += node.grad.data[i] * y * (1.0 - y);
        }
    });
}

Var maxpool2(const Var& x) {
    if (x->value.ndim() != 4 || x->value.dim(2) % 2 != 0 || x->value.dim(3) % 2 != 0) {
        throw DataError("maxpool2: expected 4D input with even spatial dims, got " +
                        shape_str(x->value));
    }
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    const int Ho = H / 2, Wo = W / 2;
    Tensor out({N, C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<int>>(out.numel());
    long o = 0;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            for (int oh = 0; oh < Ho; ++oh) {
                for (int ow = 0; ow < Wo; ++ow, ++o) {
                    double best = -1e300;
                    int best_idx = 0;
                    for (int di = 0; di < 2; ++di) {
                        for (int dj = 0; dj < 2; ++dj) {
                            int ih = oh * 2 + di, iw = ow * 2 + dj;
                            long idx = ((static_cast<long>(n) * C + c) * H + ih) * W + iw;
                            if (x->value.data[idx] > best) {
                                best = x->value.data[idx];
                                best_idx = static_cast<int>(idx);
                            }
                        }
                    }
                    out.data[o] = best;
                    (*argmax)[o] = best_idx;
                }
            }
        }
    }
    return make_result(std::move(out), {x}, [argmax](Node& node) {
        const Var& x = node.parents[0];
        if (!x->requires_grad) return;
        Tensor& gx = x->ensure_grad();
        for (long i = 0; i < node.value.numel(); ++i) {
            gx.data[(*argmax)[i]] += node.grad.data[i];
        }
    });
}

Var upsample_nearest(const Var& x, int factor) {
    if (x->value.ndim() != 4 || factor < 1) {
        throw DataError("upsample_nearest: expected 4D input, got " + shape_str(x->value));
    }
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    Tensor out({N, C, H * factor, W * factor});
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            for (int h = 0; h < H * factor; ++h) {
                const double* src =
                    x->value.ptr() + ((static_cast<std::size_t>(n) * C + c) * H + h / factor) * W;
                double* dst = out.ptr() +
                              ((static_cast<std::size_t>(n) * C + c) * H * factor + h) * W * factor;
                for (int w = 0; w < W * factor; ++w) dst[w] = src[w / factor];
            }
        }
    }
    return make_result(std::move(out), {x}, [N, C, H, W, factor](Node& node) {
        const Var& x = node.parents[0];
        if (!x->requires_grad) return;
        Tensor& gx = x->ensure_grad();
        for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
                for (int h = 0; h < H * factor; ++h) {
                    double* dst =
                        gx.ptr() + ((static_cast<std::size_t>(n) * C + c) * H + h / factor) * W;
                    const double* src =
                        node.grad.ptr() +
                        ((static_cast<std::size_t>(n) * C + c) * H * factor + h) * W * factor;
                    for (int w = 0; w < W * factor; ++w) dst[w / factor] += src[w];
                }
            }
        }
    });
}

Var global_avg_pool(const Var& x) {
    if (x->value.ndim() != 4) {
        throw DataError("global_avg_pool: expected 4D input, got " + shape_str(x->value));
    }
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    const double inv = 1.0 / (static_cast<double>(H) * W);
    Tensor out({N, C});
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double* src = x->value.ptr() + (static_cast<std::size_t>(n) * C + c) * H * W;
            double acc = 0.0;
            for (int i = 0; i < H * W; ++i) acc += src[i];
            out.data[static_cast<std::size_t>(n) * C + c] = acc * inv;
        }
    }
    return make_result(std::move(out), {x}, [N, C, H, W, inv](Node& node) {
        const Var& x = node.parents[0];
        if (!x->requires_grad) return;
        Tensor& gx = x->ensure_grad();
        for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
                double g = node.grad.data[static_cast<std::size_t>(n) * C + c] * inv;
                double* dst = gx.ptr() + (static_cast<std::size_t>(n) * C + c) * H * W;
                for (int i = 0; i < H * W; ++i) dst[i] += g;
            }
        }
    });
}

Var scale_channels(const Var& x, const Var& gate) {
    if (x->value.ndim() != 4 || gate->value.ndim() != 2 || x->value.dim(0) != gate->value.dim(0) ||
        x->value.dim(1) != gate->value.dim(1)) {
        throw DataError("scale_channels: incompatible shapes " + shape_str(x->value) + " and " +
                        shape_str(gate->value));
    }
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    Tensor out({N, C, H, W});
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            double g = gate->value.data[static_cast<std::size_t>(n) * C + c];
            const double* src = x->value.ptr() + (static_cast<std::size_t>(n) * C + c) * H * W;
            double* dst = out.ptr() + (static_cast<std::size_t>(n) * C + c) * H * W;
            for (int i = 0; i < H * W; ++i) dst[i] = src[i] * g;
        }
    }
    return make_result(std::move(out), {x, gate}, [N, C, H, W](Node& node) {
        const Var& x = node.parents[0];
        const Var& gate = node.parents[1];
        for (int n = 0; n < N; ++n) {
            for (int c = 0; c < C; ++c) {
                std::size_t plane = (static_cast<std::size_t>(n) * C + c) * H * W;
                double g = gate->value.data[static_cast<std::size_t>(n) * C + c];
                if (x->requires_grad) {
                    double* gx = x->ensure_grad().ptr() + plane;
                    const double* gy = node.grad.ptr() + plane;
                    for (int i = 0; i < H * W; ++i) gx[i] += gy[i] * g;
                }
                if (gate->requires_grad) {
                    const double* gy = node.grad.ptr() + plane;
                    const double* xv = x->value.ptr() + plane;
                    double acc = 0.0;
                    for (int i = 0; i < H * W; ++i) acc += gy[i] * xv[i];
                    gate->ensure_grad().data[static_cast<std::size_t>(n) * C + c] += acc;
                }
            }
        }
    });
}

Var add(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) {
        throw DataError("add: shape mismatch " + shape_str(a->value) + " vs " +
                        shape_str(b->value));
    }
    Tensor out = a->value;
    out.add_(b->value);
    return make_result(std::move(out), {a, b}, [](Node& node) {
        for (int i = 0; i < 2; ++i) {
            const Var& p = node.parents[i];
            if (p->requires_grad) p->ensure_grad().add_(node.grad);
        }
    });
}

Var mul_scalar(const Var& x, double s) {
    Tensor out = x->value;
    for (double& v : out.data) v *= s;
    return make_result(std::move(out), {x}, [s](Node& node) {
        const Var& x = node.parents[0];
        if (!x->requires_grad) return;
        Tensor& gx = x->ensure_grad();
        for (long i = 0; i < node.value.numel(); ++i) gx.data[i] += node.grad.data[i] * s;
    });
}

Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw DataError("concat_channels: empty input list");
    const Tensor& first = xs[0]->value;
    int total_c = 0;
    for (const Var& v : xs) {
        if (v->value.ndim() != 4 || v->value.dim(0) != first.dim(0) ||
            v->value.dim(2) != first.dim(2) || v->value.dim(3) != first.dim(3)) {
            throw DataError("concat_channels: shape mismatch " + shape_str(v->value) + " vs " +
                            shape_str(first));
        }
        total_c += v->value.dim(1);
    }
    const int N = first.dim(0), H = first.dim(2), W = first.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out({N, total_c, H, W});
    for (int n = 0; n < N; ++n) {
        std::size_t offset = static_cast<std::size_t>(n) * total_c * plane;
        for (const Var& v : xs) {
            int c = v->value.dim(1);
            const double* src = v->value.ptr() + static_cast<std::size_t>(n) * c * plane;
            std::copy(src, src + static_cast<std::size_t>(c) * plane, out.ptr() + offset);
            offset += static_cast<std::size_t>(c) * plane;
        }
    }
    std::vector<Var> parents = xs;
    return make_result(std::move(out), std::move(parents), [N, total_c, plane](Node& node) {
        for (int n = 0; n < N; ++n) {
            std::size_t offset = static_cast<std::size_t>(n) * total_c * plane;
            for (const Var& p : node.parents) {
                int c = p->value.dim(1);
                if (p->requires_grad) {
                    double* dst = p->ensure_grad().ptr() + static_cast<std::size_t>(n) * c * plane;
                    const double* src = node.grad.ptr() + offset;
                    for (std::size_t i = 0; i < static_cast<std::size_t>(c) * plane; ++i) {
                        dst[i] += src[i];
                    }
                }
                offset += static_cast<std::size_t>(c) * plane;
            }
        }
    });
}

Var slice_channels(const Var& x, int c0, int c1) {
    if (x->value.ndim() != 4 || c0 < 0 || c1 > x->value.dim(1) || c0 >= c1) {
        throw DataError("slice_channels: bad range [" + std::to_string(c0) + "," +
                        std::to_string(c1) + ") for " + shape_str(x->value));
    }
    const int N = x->value.dim(0), C = x->value.dim(1), H = x->value.dim(2), W = x->value.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out({N, c1 - c0, H, W});
    for (int n = 0; n < N; ++n) {
        const double* src = x->value.ptr() + (static_cast<std::size_t>(n) * C + c0) * plane;
        double* dst = out.ptr() + static_cast<std::size_t>(n) * (c1 - c0) * plane;
        std::copy(src, src + static_cast<std::size_t>(c1 - c0) * plane, dst);
    }
    return make_result(std::move(out), {x}, [N, C, c0, c1, plane](Node& node) {
        const Var& x = node.parents[0];
        if (!x->requires_grad) return;
        Tensor& gx = x->ensure_grad();
        for (int n = 0; n < N; ++n) {
            double* dst = gx.ptr() + (static_cast<std::size_t>(n) * C + c0) * plane;
            const double* src = node.grad.ptr() + static_cast<std::size_t>(n) * (c1 - c0) * plane;
            for (std::size_t i = 0; i < static_cast<std::size_t>(c1 - c0) * plane; ++i) {
                dst[i] += src[i];
            }
        }
    });
}

Var softmax_cross_entropy(const Var& logits, const Tensor& labels) {
    if (logits->value.ndim() != 4 || labels.ndim() != 3 ||
        logits->value.dim(0) != labels.dim(0) || logits->value.dim(2) != labels.dim(1) ||
        logits->value.dim(3) != labels.dim(2)) {
        throw DataError("softmax_cross_entropy: logits " + shape_str(logits->value) +
                        " incompatible with labels");
    }
    const int N = logits->value.dim(0), K = logits->value.dim(1), H = logits->value.dim(2),
              W = logits->value.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    auto probs = std::make_shared<Tensor>(logits->value.shape);
    double loss = 0.0;
    for (int n = 0; n < N; ++n) {
        for (std::size_t p = 0; p < plane; ++p) {
            double maxv = -1e300;
            for (int k = 0; k < K; ++k) {
                maxv = std::max(maxv,
                                logits->value.data[(static_cast<std::size_t>(n) * K + k) * plane + p]);
            }
            double denom = 0.0;
            for (int k = 0; k < K; ++k) {
                double e = std::exp(
                    logits->value.data[(static_cast<std::size_t>(n) * K + k) * plane + p] - maxv);
                probs->data[(static_cast<std::size_t>(n) * K + k) * plane + p] = e;
                denom += e;
            }
            int label = static_cast<int>(labels.data[static_cast<std::size_t>(n) * plane + p]);
            if (label < 0 || label >= K) {
                throw DataError("softmax_cross_entropy: label " + std::to_string(label) +
                                " out of range for " + std::to_string(K) + " classes");
            }
            for (int k = 0; k < K; ++k) {
                probs->data[(static_cast<std::size_t>(n) * K + k) * plane + p] /= denom;
            }
            loss -= std::log(
                std::max(probs->data[(static_cast<std::size_t>(n) * K + label) * plane + p],
                         1e-300));
        }
    }
    const double inv = 1.0 / (static_cast<double>(N) * plane);
    Tensor out({1});
    out.data[0] = loss * inv;
    Tensor labels_copy = labels;
    return make_result(
        std::move(out), {logits}, [probs, labels_copy, N, K, plane, inv](Node& node) {
            const Var& logits = node.parents[0];
            if (!logits->requires_grad) return;
            Tensor& gx = logits->ensure_grad();
            const double g = node.grad.data[0] * inv;
            for (int n = 0; n < N; ++n) {
                for (std::size_t p = 0; p < plane; ++p) {
                    int label =
                        static_cast<int>(labels_copy.data[static_cast<std::size_t>(n) * plane + p]);
                    for (int k = 0; k < K; ++k) {
                        std::size_t idx = (static_cast<std::size_t>(n) * K + k) * plane + p;
                        double delta = (k == label) ? 1.0 : 0.0;
                        gx.data[idx] += g * (probs->data[idx] - delta);
                    }
                }
            }
        });
}

Tensor softmax_channels(const Tensor& logits) {
    Tensor out = logits;
    int nd = logits.ndim();
    if (nd != 3 && nd != 4) {
        throw DataError("softmax_channels: expected (K,H,W) or (N,K,H,W)");
    }
    int N = nd == 4 ? logits.dim(0) : 1;
    int K = nd == 4 ? logits.dim(1) : logits.dim(0);
    std::size_t plane = static_cast<std::size_t>(logits.dim(nd - 2)) * logits.dim(nd - 1);
    for (int n = 0; n < N; ++n) {
        for (std::size_t p = 0; p < plane; ++p) {
            double maxv = -1e300;
            for (int k = 0; k < K; ++k) {
                maxv = std::max(maxv, logits.data[(static_cast<std::size_t>(n) * K + k) * plane + p]);
            }
            double denom = 0.0;
            for (int k = 0; k < K; ++k) {
                double e = std::exp(logits.data[(static_cast<std::size_t>(n) * K + k) * plane + p] -
                                    maxv);
                out.data[(static_cast<std::size_t>(n) * K + k) * plane + p] = e;
                denom += e;
            }
            for (int k = 0; k < K; ++k) {
                out.data[(static_cast<std::size_t>(n) * K + k) * plane + p] /= denom;
            }
        }
    }
    return out;
}

}  // namespace cellseg::nn
