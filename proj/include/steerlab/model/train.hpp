#pragma once

#include <cstdint>
#include <vector>

#include "steerlab/model/model.hpp"

namespace steerlab::model {

// Zero-filled weight structure with the same shapes; gradient sink.
ModelWeights zeros_like(const ModelWeights& w);

// Forward + reverse pass over one sequence. Targets are tokens[t] for
// t in [loss_start, size); position t-1 predicts t. Returns the summed
// cross-entropy; *target_count receives the number of targets.
//
// weight_grads and intervention_grads are accumulated into when non-null
// (intervention_grads parallel to `interventions`, each model_dim long).
// With weight_grads null, the backward pass stops below the lowest
// intervention layer: that is the steering-vector training fast path.
// dLogits are scaled by grad_scale so batch averaging happens here.
double lm_loss_and_grads(const ModelWeights& w, const std::vector<TokenId>& tokens,
                         std::size_t loss_start, const std::vector<Intervention>& interventions,
                         ModelWeights* weight_grads,
                         std::vector<std::vector<double>>* intervention_grads, double grad_scale,
                         std::size_t* target_count);

struct TrainLmConfig {
    std::size_t steps = 1000;
    double lr = 1e-3;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    std::size_t log_every = 0;  // 0 = silent
};

struct TrainLmResult {
    std::vector<double> loss_curve;  // mean next-token loss per step
};

// Adam language-model training. By default the loss covers every
// next-token position; loss_starts (parallel to sequences) restricts each
// sequence's loss to targets at index >= loss_starts[i] — used to skip
// unpredictable prompt content while still conditioning on it.
// Throws on divergence (non-finite loss).
TrainLmResult train_lm(ModelWeights& w, const std::vector<std::vector<TokenId>>& sequences,
                       const TrainLmConfig& cfg,
                       const std::vector<std::size_t>* loss_starts = nullptr);

}  // namespace steerlab::model
