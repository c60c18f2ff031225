#include "steerlab/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace steerlab::numcore {

std::vector<std::size_t> topk_mask(const std::vector<double>& x, std::size_t k) {
    if (k > x.size()) {
        throw std::invalid_argument("topk_mask: k exceeds vector length");
    }
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Magnitude descending, index ascending on ties.
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double ma = std::fabs(x[a]);
        const double mb = std::fabs(x[b]);
        if (ma != mb) {
            return ma > mb;
        }
        return a < b;
    });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<double> apply_topk(const std::vector<double>& x, std::size_t k) {
    std::vector<double> out(x.size(), 0.0);
    for (std::size_t i : topk_mask(x, k)) {
        out[i] = x[i];
    }
    return out;
}

double log_sum_exp(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double v : logits) {
        s += std::exp(v - m);
    }
    return m + std::log(s);
}

XentResult softmax_xent(const std::vector<double>& logits, std::size_t target) {
    if (logits.empty()) {
        throw std::invalid_argument("softmax_xent: empty logits");
    }
    if (target >= logits.size()) {
        throw std::invalid_argument("softmax_xent: target out of range");
    }
    const double lse = log_sum_exp(logits);
    XentResult r;
    r.loss = lse - logits[target];
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        r.grad[i] = std::exp(logits[i] - lse);
    }
    r.grad[target] -= 1.0;
    return r;
}

}  // namespace steerlab::numcore
