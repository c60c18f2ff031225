#pragma once

#include <cstdint>

#include "steerlab/numcore/tensor.hpp"

namespace steerlab::numcore {

// Bias-corrected Adam. Betas and eps default to the conventional values.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step_count = 0;
    Tensor2D first_moment;
    Tensor2D second_moment;

    AdamState() = default;
    AdamState(std::size_t rows, std::size_t cols)
        : first_moment(rows, cols, 0.0), second_moment(rows, cols, 0.0) {}
};

// One Adam update in place. Moments are lazily sized on first use.
// Throws on shape mismatch or non-finite gradients.
void adam_step(Tensor2D& params, const Tensor2D& grads, AdamState& state, double lr);

}  // namespace steerlab::numcore
