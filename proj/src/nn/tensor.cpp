#include "cellseg/nn/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace cellseg::nn {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    data.assign(n, fill);
}

void Tensor::add_(const Tensor& other) {
    if (data.size() != other.data.size()) {
        throw std::logic_error("Tensor::add_: size mismatch");
    }
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += other.data[i];
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double Tensor::abs_max() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::fabs(v));
    return m;
}

Tensor randn(Rng& rng, std::vector<int> shape, double stddev) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.normal(0.0, stddev);
    return t;
}

void gemm_accum(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * k;
        double* c_row = C + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            double a = a_row[p];
            if (a == 0.0) continue;
            const double* b_row = B + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

void gemm_accum_at(const double* A, const double* B, double* C, int m, int k, int n) {
    // A stored (k x m); C[i][j] += sum_p A[p][i] * B[p][j]
    for (int p = 0; p < k; ++p) {
        const double* a_row = A + static_cast<std::size_t>(p) * m;
        const double* b_row = B + static_cast<std::size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            double a = a_row[i];
            if (a == 0.0) continue;
            double* c_row = C + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

void gemm_accum_bt(const double* A, const double* B, double* C, int m, int k, int n) {
    // B stored (n x k); C[i][j] += dot(A row i, B row j)
    for (int i = 0; i < m; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * k;
        double* c_row = C + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* b_row = B + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
            c_row[j] += acc;
        }
    }
}

}  // namespace cellseg::nn
