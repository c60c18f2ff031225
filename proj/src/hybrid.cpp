#include "steerlab/hybrid/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "steerlab/corpus/text.hpp"
#include "steerlab/numcore/ops.hpp"
#include "steerlab/numcore/rng.hpp"
#include "steerlab/util/common.hpp"

namespace steerlab::hybrid {

using nlohmann::json;
using numcore::SeededRng;

std::string ablation_name(Ablation a) {
    switch (a) {
        case Ablation::kNone: return "none";
        case Ablation::kOnlyBias: return "only-bias";
        case Ablation::kRandomFiring: return "random-firing";
        case Ablation::kRandomVectors: return "random-vectors";
    }
    throw std::logic_error("unknown ablation");
}

Ablation ablation_from_name(const std::string& name) {
    if (name == "none") {
        return Ablation::kNone;
    }
    if (name == "only-bias") {
        return Ablation::kOnlyBias;
    }
    if (name == "random-firing") {
        return Ablation::kRandomFiring;
    }
    if (name == "random-vectors") {
        return Ablation::kRandomVectors;
    }
    throw std::invalid_argument("unknown ablation mode: " + name);
}

const std::vector<double>& full_sweep_coefficients() {
    static const std::vector<double> k{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    return k;
}

const std::vector<int>& full_sweep_windows() {
    static const std::vector<int> k{0, -1, -15, -50, -100};
    return k;
}

std::string coefficient_key(double c) {
    return format_double(c, 2);
}

std::optional<sae::SentenceLabel> classify_step(const model::ModelWeights& thinking,
                                                const sae::SaeParams& classifier_sae,
                                                const std::vector<TokenId>& rollout,
                                                std::size_t classifier_layer) {
    if (rollout.empty()) {
        throw std::invalid_argument("classify_step: empty rollout");
    }
    model::ForwardOptions opts;
    opts.logits_all_positions = false;
    opts.captures.push_back({classifier_layer, std::pair{rollout.size() - 1, rollout.size()}});
    const auto result = model::forward_with_capture(thinking, rollout, opts);
    return sae::label_sentence(classifier_sae, result.captures[0].data);
}

std::vector<SweepCandidate> sweep_candidates(
    const model::ModelWeights& base, const std::vector<TokenId>& rollout,
    const std::optional<std::pair<std::size_t, std::vector<double>>>& category_vector,
    const steering::SteeringVector* bias, const std::vector<double>& think_next_logprobs,
    const HybridConfig& cfg) {
    if (bias && bias->layer != cfg.steering_layer) {
        throw std::invalid_argument("sweep_candidates: bias layer mismatch");
    }

    // Lower blocks are shared by every candidate: interventions only touch
    // the stream at the steering layer.
    const model::PrefixState prefix = model::forward_to_layer(base, rollout, cfg.steering_layer);

    auto greedy_for = [&](const std::vector<model::Intervention>& ivs) {
        const auto logits = model::logits_from_prefix(base, prefix, ivs);
        return static_cast<TokenId>(model::argmax_lowest(logits));
    };
    auto think_ppl = [&](TokenId tok_id) {
        return std::exp(-think_next_logprobs[tok_id]);
    };

    std::vector<model::Intervention> bias_only;
    if (bias) {
        bias_only.push_back(steering::as_intervention(*bias));
    }

    std::vector<SweepCandidate> out;
    SweepCandidate null_cand;
    null_cand.coefficient = 0.0;
    null_cand.window = 0;
    null_cand.token = greedy_for(bias_only);
    null_cand.think_perplexity = think_ppl(null_cand.token);
    out.push_back(null_cand);

    if (!category_vector) {
        return out;
    }
    for (double coef : cfg.coefficients) {
        for (int window : cfg.windows) {
            std::vector<model::Intervention> ivs = bias_only;
            model::Intervention iv;
            iv.layer = cfg.steering_layer;
            iv.vector = category_vector->second;
            iv.coefficient = coef;
            iv.window = window;
            ivs.push_back(iv);
            SweepCandidate cand;
            cand.coefficient = coef;
            cand.window = window;
            cand.category = category_vector->first;
            cand.token = greedy_for(ivs);
            cand.think_perplexity = think_ppl(cand.token);
            out.push_back(cand);
        }
    }
    return out;
}

SweepCandidate select_candidate(const std::vector<SweepCandidate>& candidates) {
    if (candidates.empty()) {
        throw std::invalid_argument("select_candidate: empty sweep");
    }
    const SweepCandidate* best = &candidates[0];
    for (const auto& c : candidates) {
        if (c.think_perplexity < best->think_perplexity) {
            best = &c;
            continue;
        }
        if (c.think_perplexity > best->think_perplexity) {
            continue;
        }
        // ties: null first, then smaller coefficient, then smaller |window|
        if (best->is_null()) {
            continue;
        }
        if (c.is_null()) {
            best = &c;
            continue;
        }
        if (c.coefficient < best->coefficient ||
            (c.coefficient == best->coefficient && std::abs(c.window) < std::abs(best->window))) {
            best = &c;
        }
    }
    return *best;
}

namespace {

std::vector<double> log_softmax(std::vector<double> logits) {
    const double lse = numcore::log_sum_exp(logits);
    for (double& v : logits) {
        v -= lse;
    }
    return logits;
}

std::vector<std::vector<double>> make_random_unit_vectors(std::size_t count, std::size_t dim,
                                                          std::uint64_t seed) {
    std::vector<std::vector<double>> out(count, std::vector<double>(dim, 0.0));
    SeededRng rng = SeededRng::derive(seed, "random-vectors");
    for (auto& v : out) {
        double norm2 = 0.0;
        for (double& c : v) {
            c = rng.next_normal();
            norm2 += c * c;
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& c : v) {
            c *= inv;
        }
    }
    return out;
}

}  // namespace

HybridRun generate_hybrid(const model::ModelWeights& base, const model::ModelWeights& thinking,
                          const sae::SaeParams& classifier_sae,
                          const steering::VectorBundle& bundle, const corpus::Tokenizer& tok,
                          const std::string& problem_id, const std::string& question,
                          const HybridConfig& cfg) {
    HybridRun run;
    run.problem_id = problem_id;
    run.prompt = corpus::build_prompt(question);

    std::vector<TokenId> rollout = tok.tokenize(run.prompt);
    const TokenId eos = tok.eos_id();

    const steering::SteeringVector* bias = bundle.bias ? &*bundle.bias : nullptr;

    // Random-firing draws and random vectors are fixed by the run seed.
    SeededRng firing_rng = SeededRng::derive(cfg.seed, "random-firing:" + problem_id);
    std::vector<std::vector<double>> random_vectors;
    if (cfg.ablation == Ablation::kRandomVectors) {
        random_vectors = make_random_unit_vectors(classifier_sae.dict_size,
                                                  base.config.model_dim, cfg.seed);
    }

    const std::size_t context_cap =
        std::min(base.config.context_length, thinking.config.context_length);

    for (std::size_t step = 0; step < cfg.max_new_tokens; ++step) {
        if (rollout.size() >= context_cap) {
            break;
        }
        // One thinking pass per token: classifier activations at the final
        // position plus the next-token distribution used to score every
        // candidate (rollouts are re-encoded from scratch each step).
        model::ForwardOptions think_opts;
        think_opts.logits_all_positions = false;
        think_opts.captures.push_back(
            {cfg.classifier_layer, std::pair{rollout.size() - 1, rollout.size()}});
        const auto think_out = model::forward_with_capture(thinking, rollout, think_opts);
        const auto think_logprobs = log_softmax(think_out.logits.data);

        StepRecord rec;
        rec.step = step;

        std::optional<std::pair<std::size_t, std::vector<double>>> category_vector;
        if (cfg.ablation == Ablation::kOnlyBias) {
            // no category vectors at all
        } else if (cfg.ablation == Ablation::kRandomFiring) {
            const std::size_t cat = static_cast<std::size_t>(
                firing_rng.next_below(classifier_sae.dict_size));
            rec.classified_category = cat;
            rec.classifier_activation = 0.0;
            if (const auto* v = bundle.find_category(cat)) {
                category_vector = std::make_pair(cat, v->vector);
            }
        } else {
            const auto label = sae::label_sentence(classifier_sae, think_out.captures[0].data);
            if (label) {
                rec.classified_category = label->category;
                rec.classifier_activation = label->activation;
                if (cfg.ablation == Ablation::kRandomVectors) {
                    category_vector = std::make_pair(label->category,
                                                     random_vectors[label->category]);
                } else if (const auto* v = bundle.find_category(label->category)) {
                    category_vector = std::make_pair(label->category, v->vector);
                }
            }
        }

        rec.candidates = sweep_candidates(base, rollout, category_vector, bias, think_logprobs,
                                          cfg);
        rec.chosen = select_candidate(rec.candidates);

        run.stats.total_tokens += 1;
        if (!rec.chosen.is_null()) {
            run.stats.steered_tokens += 1;
            run.stats.category_firings[*rec.chosen.category] += 1;
            run.stats.coefficient_usage[coefficient_key(rec.chosen.coefficient)] += 1;
        }
        const TokenId next = rec.chosen.token;
        run.steps.push_back(std::move(rec));
        run.emitted.push_back(next);
        rollout.push_back(next);
        if (next == eos) {
            break;
        }
    }
    run.generated_text = tok.detokenize(run.emitted);
    return run;
}

CorpusSteeringStats aggregate_stats(const std::vector<HybridRun>& runs) {
    if (runs.empty()) {
        throw std::invalid_argument("aggregate_stats: need at least one run");
    }
    CorpusSteeringStats out;
    double fraction_sum = 0.0;
    for (const auto& r : runs) {
        out.merged.steered_tokens += r.stats.steered_tokens;
        out.merged.total_tokens += r.stats.total_tokens;
        for (const auto& [cat, n] : r.stats.category_firings) {
            out.merged.category_firings[cat] += n;
        }
        for (const auto& [coef, n] : r.stats.coefficient_usage) {
            out.merged.coefficient_usage[coef] += n;
        }
        fraction_sum += r.stats.steered_fraction();
    }
    out.problem_count = runs.size();
    out.corpus_steered_fraction = out.merged.steered_fraction();
    out.per_problem_mean_fraction = fraction_sum / static_cast<double>(runs.size());
    return out;
}

namespace {

json candidate_to_json(const SweepCandidate& c) {
    json j;
    j["coefficient"] = c.coefficient;
    j["window"] = c.window;
    if (c.category) {
        j["category"] = *c.category;
    }
    j["token"] = c.token;
    j["think_perplexity"] = c.think_perplexity;
    return j;
}

SweepCandidate candidate_from_json(const json& j) {
    SweepCandidate c;
    c.coefficient = j.at("coefficient").get<double>();
    c.window = j.at("window").get<int>();
    if (j.contains("category")) {
        c.category = j.at("category").get<std::size_t>();
    }
    c.token = j.at("token").get<TokenId>();
    c.think_perplexity = j.at("think_perplexity").get<double>();
    return c;
}

}  // namespace

std::string stats_to_json(const SteeringStats& s) {
    json j;
    j["steered_tokens"] = s.steered_tokens;
    j["total_tokens"] = s.total_tokens;
    j["steered_fraction"] = s.steered_fraction();
    json firings = json::object();
    for (const auto& [cat, n] : s.category_firings) {
        firings[std::to_string(cat)] = n;
    }
    j["category_firings"] = firings;
    json usage = json::object();
    for (const auto& [coef, n] : s.coefficient_usage) {
        usage[coef] = n;
    }
    j["coefficient_usage"] = usage;
    return j.dump();
}

std::string corpus_stats_to_json(const CorpusSteeringStats& s) {
    json j = json::parse(stats_to_json(s.merged));
    j["corpus_steered_fraction"] = s.corpus_steered_fraction;
    j["per_problem_mean_fraction"] = s.per_problem_mean_fraction;
    j["problem_count"] = s.problem_count;
    return j.dump();
}

std::string run_to_jsonl(const HybridRun& run) {
    std::string out;
    json header;
    header["problem_id"] = run.problem_id;
    header["prompt"] = run.prompt;
    header["generated_text"] = run.generated_text;
    header["stats"] = json::parse(stats_to_json(run.stats));
    out += header.dump();
    out += '\n';
    for (const auto& step : run.steps) {
        json j;
        j["step"] = step.step;
        if (step.classified_category) {
            j["classified_category"] = *step.classified_category;
        }
        j["classifier_activation"] = step.classifier_activation;
        json cands = json::array();
        for (const auto& c : step.candidates) {
            cands.push_back(candidate_to_json(c));
        }
        j["candidates"] = cands;
        j["chosen"] = candidate_to_json(step.chosen);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<StepRecord> ledger_steps_from_jsonl(const std::string& text) {
    std::vector<StepRecord> steps;
    for (const auto& line : split_lines(text)) {
        if (line.empty()) {
            continue;
        }
        const json j = json::parse(line);
        if (!j.contains("candidates")) {
            continue;  // header line
        }
        StepRecord rec;
        rec.step = j.at("step").get<std::size_t>();
        if (j.contains("classified_category")) {
            rec.classified_category = j.at("classified_category").get<std::size_t>();
        }
        rec.classifier_activation = j.value("classifier_activation", 0.0);
        for (const auto& c : j.at("candidates")) {
            rec.candidates.push_back(candidate_from_json(c));
        }
        rec.chosen = candidate_from_json(j.at("chosen"));
        steps.push_back(std::move(rec));
    }
    return steps;
}

bool verify_ledger_selection(const std::vector<StepRecord>& steps) {
    for (const auto& step : steps) {
        for (const auto& c : step.candidates) {
            if (c.think_perplexity < step.chosen.think_perplexity) {
                return false;
            }
        }
        // the chosen candidate must be a member of its sweep
        bool found = false;
        for (const auto& c : step.candidates) {
            if (c.coefficient == step.chosen.coefficient && c.window == step.chosen.window &&
                c.token == step.chosen.token && c.category == step.chosen.category &&
                c.think_perplexity == step.chosen.think_perplexity) {
                found = true;
                break;
            }
        }
        if (!found) {
            return false;
        }
    }
    return true;
}

}  // namespace steerlab::hybrid
