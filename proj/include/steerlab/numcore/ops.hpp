#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "steerlab/numcore/tensor.hpp"

namespace steerlab::numcore {

// Indices of the k largest-magnitude entries of x, ascending index order.
// Ties break toward the lowest index. Throws if k > x.size().
std::vector<std::size_t> topk_mask(const std::vector<double>& x, std::size_t k);

// Zero every entry of x outside the top-k support.
std::vector<double> apply_topk(const std::vector<double>& x, std::size_t k);

struct XentResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d logits
};

// Numerically stable cross-entropy of a softmax over `logits` against
// `target`, plus its gradient. Throws on empty logits or bad target.
XentResult softmax_xent(const std::vector<double>& logits, std::size_t target);

// log(sum(exp(logits))) with max-shift.
double log_sum_exp(const std::vector<double>& logits);

}  // namespace steerlab::numcore
