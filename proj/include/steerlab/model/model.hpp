#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "steerlab/corpus/tokenizer.hpp"
#include "steerlab/numcore/tensor.hpp"

namespace steerlab::model {

using corpus::TokenId;
using numcore::Tensor2D;

struct ModelConfig {
    std::size_t layer_count = 8;
    std::size_t model_dim = 64;
    std::size_t head_count = 4;
    std::size_t context_length = 256;
    std::size_t vocab_size = 200;
    std::uint64_t seed = 0;

    std::size_t head_dim() const { return model_dim / head_count; }
    std::size_t mlp_dim() const { return 4 * model_dim; }
    void validate() const;
};

// Pre-norm decoder block parameters, in checkpoint declaration order.
struct BlockWeights {
    Tensor2D ln1_g, ln1_b;
    Tensor2D wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor2D ln2_g, ln2_b;
    Tensor2D w1, b1, w2, b2;
};

struct ModelWeights {
    ModelConfig config;
    Tensor2D tok_emb;  // V×d
    Tensor2D pos_emb;  // ctx×d
    std::vector<BlockWeights> blocks;
    Tensor2D lnf_g, lnf_b;
    Tensor2D wu;  // d×V
    Tensor2D bu;  // 1×V

    static ModelWeights init(const ModelConfig& cfg);

    // All parameter tensors in declaration (checkpoint) order.
    std::vector<Tensor2D*> parameters();
    std::vector<const Tensor2D*> parameters() const;
    bool all_finite() const;
};

// Additive residual-stream edit after block `layer`. window 0 applies to
// every position; window -w applies to the w most recent positions.
struct Intervention {
    std::size_t layer = 0;
    std::vector<double> vector;
    double coefficient = 1.0;
    int window = 0;
};

// Residual-stream capture after block `layer`, optionally restricted to
// a token-position range [first, second).
struct CaptureRequest {
    std::size_t layer = 0;
    std::optional<std::pair<std::size_t, std::size_t>> positions;
};

struct ForwardOptions {
    std::vector<CaptureRequest> captures;
    std::vector<Intervention> interventions;
    bool logits_all_positions = true;  // false: only the final position's row
    // Test hook: zero the residual stream right after this block, before
    // interventions at the same layer apply.
    std::optional<std::size_t> zero_residual_after_layer;
};

struct ForwardResult {
    Tensor2D logits;                 // T×V, or 1×V when last-only
    std::vector<Tensor2D> captures;  // parallel to options.captures
};

ForwardResult forward_with_capture(const ModelWeights& w, const std::vector<TokenId>& tokens,
                                   const ForwardOptions& opts);
ForwardResult forward_with_capture(const ModelWeights& w, const std::vector<TokenId>& tokens,
                                   const std::vector<CaptureRequest>& captures,
                                   const std::vector<Intervention>& interventions);

// Residual stream after block `layer` with interventions at layers
// <= layer already applied. Lets candidate sweeps share the lower blocks.
struct PrefixState {
    std::size_t layer = 0;
    Tensor2D x;  // T×d
};

PrefixState forward_to_layer(const ModelWeights& w, const std::vector<TokenId>& tokens,
                             std::size_t layer, const std::vector<Intervention>& interventions = {});

// Applies `at_layer` interventions (all must target state.layer) to a
// copy of the prefix and runs the remaining blocks; final-position logits.
std::vector<double> logits_from_prefix(const ModelWeights& w, const PrefixState& state,
                                       const std::vector<Intervention>& at_layer);

std::vector<double> next_token_logits(const ModelWeights& w, const std::vector<TokenId>& tokens,
                                      const std::vector<Intervention>& interventions = {});

// Argmax of the final position's logits; ties break toward the lowest id.
TokenId greedy_next_token(const ModelWeights& w, const std::vector<TokenId>& tokens,
                          const std::vector<Intervention>& interventions = {});

std::size_t argmax_lowest(const std::vector<double>& v);

// exp(mean cross-entropy) of tokens[span.first, span.second) given all
// preceding tokens. span.first must be >= 1.
double sequence_perplexity(const ModelWeights& w, const std::vector<TokenId>& tokens,
                           std::pair<std::size_t, std::size_t> span);

// Greedy rollout until eos or max_new_tokens; returns generated ids
// (excluding the prompt, including eos if hit).
std::vector<TokenId> generate_greedy(const ModelWeights& w, std::vector<TokenId> tokens,
                                     std::size_t max_new_tokens, TokenId eos,
                                     const std::vector<Intervention>& interventions = {});

void save_checkpoint(const ModelWeights& w, const std::string& path);
ModelWeights load_checkpoint(const std::string& path);

}  // namespace steerlab::model
