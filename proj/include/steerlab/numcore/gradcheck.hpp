#pragma once

#include <functional>

#include "steerlab/numcore/rng.hpp"
#include "steerlab/numcore/tensor.hpp"

namespace steerlab::numcore {

// Compares an analytic gradient against central finite differences
// (step 1e-5) at `probe_count` random coordinates and returns the max
// relative error. The analytic gradient is evaluated once at `params`;
// f is re-evaluated at perturbed copies.
double grad_check(const std::function<double(const Tensor2D&)>& f,
                  const Tensor2D& analytic_grad, const Tensor2D& params,
                  std::size_t probe_count, SeededRng& rng, double step = 1e-5);

}  // namespace steerlab::numcore
