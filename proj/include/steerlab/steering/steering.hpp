#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "steerlab/corpus/tokenizer.hpp"
#include "steerlab/corpus/trace.hpp"
#include "steerlab/model/model.hpp"
#include "steerlab/numcore/tensor.hpp"

namespace steerlab::steering {

using corpus::TokenId;

// A learned residual-stream direction; category_index -1 marks the
// category-agnostic bias vector.
struct SteeringVector {
    std::string category;  // category id string, or "bias"
    int category_index = -1;
    std::size_t layer = 0;
    std::vector<double> vector;
    std::vector<double> train_loss_curve;
    std::string source_taxonomy;

    double norm() const;
};

struct SteeringTrainConfig {
    std::size_t max_iters = 50;
    double lr = 1e-2;  // cosine-decayed to 0 over max_iters
    std::size_t minibatch = 6;
    double min_delta = 0.01;
    std::size_t patience = 5;
    std::size_t stage1_count = 8192;  // top activations
    std::size_t stage2_count = 2048;  // top base-model perplexity
    std::uint64_t seed = 0;
    bool warm_start_diff_means = false;
};

// Prefix = prompt + rollout up to the sentence; completion = the sentence.
struct ExamplePair {
    std::vector<TokenId> prefix;
    std::vector<TokenId> completion;
    std::string category;
    double activation = 0.0;
    double base_perplexity = 0.0;

    std::vector<TokenId> full() const {
        std::vector<TokenId> out = prefix;
        out.insert(out.end(), completion.begin(), completion.end());
        return out;
    }
};

// One SAE-labeled sentence inside its rollout.
struct LabeledSentenceRef {
    const corpus::TraceRecord* record = nullptr;
    std::size_t sentence_index = 0;
    std::size_t category = 0;
    double activation = 0.0;
};

// Two-stage selection: keep the stage1 highest-activation sentences of
// the category, then the stage2 highest base-model-perplexity completions.
// Counts clamp to what is available, preserving the 4:1 ratio.
std::vector<ExamplePair> select_examples(const std::vector<LabeledSentenceRef>& labeled,
                                         std::size_t category, const model::ModelWeights& base,
                                         const corpus::Tokenizer& tok,
                                         const SteeringTrainConfig& cfg);

// Adam on the completion cross-entropy of the steered base model; the
// vector is applied at `layer` over all token positions, on top of the
// frozen bias when given. Early stopping: no improvement >= min_delta for
// `patience` consecutive iterations.
// warm_start (the difference-of-means direction) is used only when
// cfg.warm_start_diff_means is set; default initialization is zero.
SteeringVector train_steering_vector(const model::ModelWeights& base,
                                     const std::vector<ExamplePair>& examples, std::size_t layer,
                                     const SteeringVector* frozen_bias,
                                     const SteeringTrainConfig& cfg,
                                     const std::string& category_name, int category_index,
                                     const std::vector<double>* warm_start = nullptr);

// Same loop over whole rollouts (prompt as prefix, trace as completion).
SteeringVector train_bias_vector(const model::ModelWeights& base,
                                 const std::vector<corpus::TraceRecord>& rollouts,
                                 const corpus::Tokenizer& tok, std::size_t layer,
                                 const SteeringTrainConfig& cfg);

// mean(target rows) - mean(base rows); the cheap baseline direction.
std::vector<double> difference_of_means(const numcore::Tensor2D& target_rows,
                                        const numcore::Tensor2D& base_rows);

// Held-out mean completion cross-entropy per token with the given
// interventions; used for effectiveness checks.
double mean_completion_loss(const model::ModelWeights& base,
                            const std::vector<ExamplePair>& examples,
                            const std::vector<model::Intervention>& interventions);

model::Intervention as_intervention(const SteeringVector& v, double coefficient = 1.0,
                                    int window = 0);

struct VectorBundle {
    std::optional<SteeringVector> bias;
    std::vector<SteeringVector> categories;  // order = category_index
    std::optional<std::size_t> classifier_layer;  // layer the labeling SAE was trained on

    const SteeringVector* find_category(std::size_t index) const;
};

void save_steering_vector(const SteeringVector& v, const std::string& path,
                          const std::string& config_hash);
SteeringVector load_steering_vector(const std::string& path);
void save_bundle(const VectorBundle& bundle, const std::string& dir,
                 const std::string& config_hash);
VectorBundle load_bundle(const std::string& dir);

}  // namespace steerlab::steering
