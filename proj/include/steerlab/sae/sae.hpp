#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "steerlab/numcore/tensor.hpp"

namespace steerlab::sae {

using numcore::Tensor2D;

// Top-K sparse autoencoder: z = TopK(W_enc (x - b_enc)), x_hat = W_dec z + b_dec.
// b_enc lives in input space so centered inputs encode to zero. Decoder
// columns are kept unit-norm by training.
struct SaeParams {
    std::size_t input_dim = 0;  // d
    std::size_t dict_size = 0;  // n
    std::size_t k = 0;
    Tensor2D w_enc;  // n×d
    Tensor2D b_enc;  // 1×d
    Tensor2D w_dec;  // d×n
    Tensor2D b_dec;  // 1×d

    void validate() const;
};

std::vector<double> encode(const SaeParams& sae, const std::vector<double>& x);
std::vector<double> decode(const SaeParams& sae, const std::vector<double>& z);

// Mean squared reconstruction error over batch rows.
double loss(const SaeParams& sae, const Tensor2D& batch);

// Learning-rate scaling law: 2e-4 / sqrt(n / 2^14).
double learning_rate_for_dict_size(std::size_t n);

struct SaeTrainConfig {
    std::size_t k = 3;
    std::size_t batch_size = 512;
    std::size_t max_epochs = 300;
    std::size_t patience = 10;
    std::optional<double> lr;  // default: learning_rate_for_dict_size(n)
    std::uint64_t seed = 0;
    // Invoked after every optimizer step (post decoder renormalization);
    // lets tests watch per-step invariants.
    std::function<void(const SaeParams&)> post_step_hook;
};

struct SaeTrainResult {
    SaeParams params;
    std::size_t stop_epoch = 0;             // epochs actually run
    std::vector<double> validation_curve;   // mean holdout loss per epoch
};

// Adam on the reconstruction loss with a straight-through Top-K support,
// unit-renormalizing decoder columns after every optimizer step.
// 10% deterministic holdout (row-content hash) drives early stopping;
// the best-holdout parameters are returned.
SaeTrainResult train_sae(const Tensor2D& activations, std::size_t dict_size,
                         const SaeTrainConfig& cfg);

struct SentenceLabel {
    std::size_t category = 0;
    double activation = 0.0;
};

// Argmax latent (ties toward the lowest index); nullopt when the encoding
// is all zeros ("unlabeled").
std::optional<SentenceLabel> label_sentence(const SaeParams& sae, const std::vector<double>& x);

// Max |column norm - 1| over decoder columns.
double decoder_norm_deviation(const SaeParams& sae);

void save_sae(const SaeParams& sae, const std::string& path);
SaeParams load_sae(const std::string& path);

}  // namespace steerlab::sae
