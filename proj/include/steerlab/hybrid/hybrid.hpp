#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "steerlab/corpus/tokenizer.hpp"
#include "steerlab/model/model.hpp"
#include "steerlab/sae/sae.hpp"
#include "steerlab/steering/steering.hpp"

namespace steerlab::hybrid {

using corpus::TokenId;

enum class Ablation {
    kNone,
    kOnlyBias,       // no category vectors at all
    kRandomFiring,   // uniform random category each token
    kRandomVectors,  // fixed random unit vectors per category
};

std::string ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& name);

struct HybridConfig {
    std::vector<double> coefficients{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};  // narrow default
    std::vector<int> windows{0};
    std::size_t steering_layer = 2;
    std::size_t classifier_layer = 4;
    std::size_t max_new_tokens = 128;
    Ablation ablation = Ablation::kNone;
    std::uint64_t seed = 0;
};

// The paper-scale sweep lists.
const std::vector<double>& full_sweep_coefficients();
const std::vector<int>& full_sweep_windows();

// coefficient 0 marks the null (bias-only) candidate.
struct SweepCandidate {
    double coefficient = 0.0;
    int window = 0;
    std::optional<std::size_t> category;
    TokenId token = 0;
    double think_perplexity = 0.0;

    bool is_null() const { return !category.has_value(); }
};

struct StepRecord {
    std::size_t step = 0;
    std::optional<std::size_t> classified_category;
    double classifier_activation = 0.0;
    std::vector<SweepCandidate> candidates;
    SweepCandidate chosen;
};

struct SteeringStats {
    std::size_t steered_tokens = 0;
    std::size_t total_tokens = 0;
    std::map<std::size_t, std::size_t> category_firings;
    std::map<std::string, std::size_t> coefficient_usage;  // fixed-format keys

    double steered_fraction() const {
        return total_tokens == 0 ? 0.0
                                 : static_cast<double>(steered_tokens) /
                                       static_cast<double>(total_tokens);
    }
};

struct CorpusSteeringStats {
    SteeringStats merged;
    double corpus_steered_fraction = 0.0;       // sum steered / sum total
    double per_problem_mean_fraction = 0.0;     // mean of per-run fractions
    std::size_t problem_count = 0;
};

struct HybridRun {
    std::string problem_id;
    std::string prompt;
    std::vector<TokenId> emitted;
    std::vector<StepRecord> steps;
    std::string generated_text;
    SteeringStats stats;
};

// Thinking-model classification of the rollout's final position via the
// classifier SAE. nullopt when all latents are zero (bias-only step).
std::optional<sae::SentenceLabel> classify_step(const model::ModelWeights& thinking,
                                                const sae::SaeParams& classifier_sae,
                                                const std::vector<TokenId>& rollout,
                                                std::size_t classifier_layer);

// One candidate per (coefficient, window) plus the always-present null
// candidate; each records its greedy token and the thinking model's
// perplexity of that token (think_next_logprobs over the same rollout).
std::vector<SweepCandidate> sweep_candidates(
    const model::ModelWeights& base, const std::vector<TokenId>& rollout,
    const std::optional<std::pair<std::size_t, std::vector<double>>>& category_vector,
    const steering::SteeringVector* bias, const std::vector<double>& think_next_logprobs,
    const HybridConfig& cfg);

// Minimum thinking-perplexity candidate; ties prefer null, then smaller
// coefficient, then smaller |window|.
SweepCandidate select_candidate(const std::vector<SweepCandidate>& candidates);

HybridRun generate_hybrid(const model::ModelWeights& base, const model::ModelWeights& thinking,
                          const sae::SaeParams& classifier_sae,
                          const steering::VectorBundle& bundle, const corpus::Tokenizer& tok,
                          const std::string& problem_id, const std::string& question,
                          const HybridConfig& cfg);

CorpusSteeringStats aggregate_stats(const std::vector<HybridRun>& runs);

std::string stats_to_json(const SteeringStats& s);
std::string corpus_stats_to_json(const CorpusSteeringStats& s);

// JSON-lines ledger: one line per step with every candidate and the
// selection, re-checkable without any model.
std::string run_to_jsonl(const HybridRun& run);
std::vector<StepRecord> ledger_steps_from_jsonl(const std::string& text);

// Replays a ledger and confirms the chosen candidate's perplexity is
// minimal within its sweep at every step.
bool verify_ledger_selection(const std::vector<StepRecord>& steps);

std::string coefficient_key(double c);

}  // namespace steerlab::hybrid
