#pragma once

#include <cstddef>
#include <vector>

namespace steerlab::numcore {

// Dense row-major matrix of doubles. Training math stays in 64-bit;
// on-disk formats narrow to 32-bit.
struct Tensor2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2D() = default;
    Tensor2D(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor2D& o) const { return rows == o.rows && cols == o.cols; }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const;
};

// c = a @ b. Throws std::invalid_argument on shape mismatch.
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);

// In-place accumulating variants used by the model kernels.
// out += a @ b        (a: m×k, b: k×n, out: m×n)
void matmul_acc(const Tensor2D& a, const Tensor2D& b, Tensor2D& out);
// out += a @ b^T      (a: m×k, b: n×k, out: m×n)
void matmul_nt_acc(const Tensor2D& a, const Tensor2D& b, Tensor2D& out);
// out += a^T @ b      (a: k×m, b: k×n, out: m×n)
void matmul_tn_acc(const Tensor2D& a, const Tensor2D& b, Tensor2D& out);

// y += alpha * x over the raw buffers; shapes must match.
void axpy(double alpha, const Tensor2D& x, Tensor2D& y);

}  // namespace steerlab::numcore
