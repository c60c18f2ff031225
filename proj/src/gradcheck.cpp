#include "steerlab/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace steerlab::numcore {

double grad_check(const std::function<double(const Tensor2D&)>& f,
                  const Tensor2D& analytic_grad, const Tensor2D& params,
                  std::size_t probe_count, SeededRng& rng, double step) {
    double max_rel = 0.0;
    Tensor2D probe = params;
    for (std::size_t p = 0; p < probe_count; ++p) {
        const std::size_t i = static_cast<std::size_t>(rng.next_below(params.size()));
        const double orig = probe.data[i];
        probe.data[i] = orig + step;
        const double fp = f(probe);
        probe.data[i] = orig - step;
        const double fm = f(probe);
        probe.data[i] = orig;

        const double numeric = (fp - fm) / (2.0 * step);
        const double analytic = analytic_grad.data[i];
        const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
        max_rel = std::max(max_rel, std::fabs(numeric - analytic) / denom);
    }
    return max_rel;
}

}  // namespace steerlab::numcore
