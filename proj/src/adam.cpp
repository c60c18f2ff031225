#include "steerlab/numcore/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace steerlab::numcore {

void adam_step(Tensor2D& params, const Tensor2D& grads, AdamState& state, double lr) {
    if (!params.same_shape(grads)) {
        throw std::invalid_argument("adam_step: parameter/gradient shape mismatch");
    }
    if (state.first_moment.size() == 0) {
        state.first_moment = Tensor2D(params.rows, params.cols, 0.0);
        state.second_moment = Tensor2D(params.rows, params.cols, 0.0);
    }
    if (!state.first_moment.same_shape(params)) {
        throw std::invalid_argument("adam_step: moment shape mismatch");
    }
    if (!grads.all_finite()) {
        throw std::runtime_error("adam_step: non-finite gradient");
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    double* p = params.data.data();
    const double* g = grads.data.data();
    double* m = state.first_moment.data.data();
    double* v = state.second_moment.data.data();
    const std::size_t n = params.size();
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

}  // namespace steerlab::numcore
