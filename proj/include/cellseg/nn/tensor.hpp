#pragma once

#include <cstddef>
#include <vector>

#include "cellseg/rng.hpp"

namespace cellseg::nn {

// Dense row-major tensor of doubles. Shapes are small (at most 4 dims in
// practice: N,C,H,W).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    long numel() const { return static_cast<long>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    // 4D accessor for (N,C,H,W) tensors.
    double& at4(int n, int c, int h, int w) {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const double& at4(int n, int c, int h, int w) const {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    void fill(double v) { data.assign(data.size(), v); }
    void add_(const Tensor& other);  // elementwise +=, shapes must match

    bool all_finite() const;
    double abs_max() const;
};

Tensor randn(Rng& rng, std::vector<int> shape, double stddev);

// C (m x n) = A (m x k) * B (k x n) + C. Plain row-major, single-threaded;
// the k-outer / n-inner ordering keeps the inner loop stride-1 so it
// vectorizes.
void gemm_accum(const double* A, const double* B, double* C, int m, int k, int n);

// C (m x n) = A^T (m x k, stored k x m) * B (k x n) + C.
void gemm_accum_at(const double* A, const double* B, double* C, int m, int k, int n);

// C (m x n) = A (m x k) * B^T (n x k) + C.
void gemm_accum_bt(const double* A, const double* B, double* C, int m, int k, int n);

}  // namespace cellseg::nn
