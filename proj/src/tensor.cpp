#include "steerlab/numcore/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace steerlab::numcore {

bool Tensor2D::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

// ikj order: the inner loop runs over contiguous rows of b and out,
// which the compiler vectorizes.
static void matmul_acc_impl(const double* a, const double* b, double* out,
                            std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* __restrict__ arow = a + i * k;
        double* __restrict__ orow = out + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* __restrict__ brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
    if (a.cols != b.rows) {
        throw std::invalid_argument("matmul: shape mismatch");
    }
    Tensor2D out(a.rows, b.cols, 0.0);
    matmul_acc_impl(a.data.data(), b.data.data(), out.data.data(), a.rows, a.cols, b.cols);
    return out;
}

void matmul_acc(const Tensor2D& a, const Tensor2D& b, Tensor2D& out) {
    if (a.cols != b.rows || out.rows != a.rows || out.cols != b.cols) {
        throw std::invalid_argument("matmul_acc: shape mismatch");
    }
    matmul_acc_impl(a.data.data(), b.data.data(), out.data.data(), a.rows, a.cols, b.cols);
}

void matmul_nt_acc(const Tensor2D& a, const Tensor2D& b, Tensor2D& out) {
    if (a.cols != b.cols || out.rows != a.rows || out.cols != b.rows) {
        throw std::invalid_argument("matmul_nt_acc: shape mismatch");
    }
    const std::size_t m = a.rows, k = a.cols, n = b.rows;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += arow[p] * brow[p];
            }
            orow[j] += acc;
        }
    }
}

void matmul_tn_acc(const Tensor2D& a, const Tensor2D& b, Tensor2D& out) {
    if (a.rows != b.rows || out.rows != a.cols || out.cols != b.cols) {
        throw std::invalid_argument("matmul_tn_acc: shape mismatch");
    }
    const std::size_t k = a.rows, m = a.cols, n = b.cols;
    for (std::size_t p = 0; p < k; ++p) {
        const double* __restrict__ arow = a.row(p);
        const double* __restrict__ brow = b.row(p);
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* __restrict__ orow = out.data.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
}

void axpy(double alpha, const Tensor2D& x, Tensor2D& y) {
    if (!x.same_shape(y)) {
        throw std::invalid_argument("axpy: shape mismatch");
    }
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        y.data[i] += alpha * x.data[i];
    }
}

}  // namespace steerlab::numcore
