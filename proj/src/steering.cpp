#include "steerlab/steering/steering.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "steerlab/model/train.hpp"
#include "steerlab/numcore/adam.hpp"
#include "steerlab/numcore/rng.hpp"
#include "steerlab/sae/activations.hpp"
#include "steerlab/util/common.hpp"

namespace steerlab::steering {

using nlohmann::json;
using numcore::SeededRng;
using numcore::Tensor2D;

double SteeringVector::norm() const {
    double n2 = 0.0;
    for (double v : vector) {
        n2 += v * v;
    }
    return std::sqrt(n2);
}

model::Intervention as_intervention(const SteeringVector& v, double coefficient, int window) {
    model::Intervention iv;
    iv.layer = v.layer;
    iv.vector = v.vector;
    iv.coefficient = coefficient;
    iv.window = window;
    return iv;
}

namespace {

// Token span of one sentence inside the record's full text.
struct SentenceTokens {
    std::vector<TokenId> full;
    std::size_t completion_start = 0;
    std::size_t completion_end = 0;
};

SentenceTokens tokenize_sentence_context(const corpus::TraceRecord& rec, std::size_t sentence_index,
                                         const corpus::Tokenizer& tok) {
    const std::string text = rec.full_text();
    std::vector<corpus::Span> offsets;
    SentenceTokens st;
    st.full = tok.tokenize_with_offsets(text, offsets);
    const auto& span = rec.sentences.at(sentence_index);
    const corpus::Span shifted{span.first + rec.trace_offset(), span.second + rec.trace_offset()};
    const auto [t0, t1] = sae::token_range_for_span(offsets, shifted);
    st.completion_start = t0;
    st.completion_end = t1;
    return st;
}

}  // namespace

std::vector<ExamplePair> select_examples(const std::vector<LabeledSentenceRef>& labeled,
                                         std::size_t category, const model::ModelWeights& base,
                                         const corpus::Tokenizer& tok,
                                         const SteeringTrainConfig& cfg) {
    std::vector<const LabeledSentenceRef*> pool;
    for (const auto& l : labeled) {
        if (l.category == category) {
            pool.push_back(&l);
        }
    }
    if (pool.empty()) {
        throw std::invalid_argument("select_examples: category has no labeled sentences");
    }

    // Stage 1: highest SAE activation.
    std::stable_sort(pool.begin(), pool.end(), [](const auto* a, const auto* b) {
        return a->activation > b->activation;
    });
    const std::size_t stage1 = std::min(cfg.stage1_count, pool.size());
    pool.resize(stage1);

    // Stage 2: highest base-model perplexity of the completion given the
    // prefix. When stage 1 was clamped by availability, stage 2 shrinks
    // proportionally so the configured ratio carries over.
    std::size_t stage2 = cfg.stage2_count;
    if (stage1 < cfg.stage1_count) {
        const double ratio =
            static_cast<double>(cfg.stage2_count) / static_cast<double>(cfg.stage1_count);
        stage2 = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(ratio * static_cast<double>(stage1))));
    }
    stage2 = std::min(stage2, stage1);

    struct Scored {
        ExamplePair pair;
        double ppl;
    };
    std::vector<Scored> scored;
    scored.reserve(pool.size());
    for (const auto* l : pool) {
        const auto st = tokenize_sentence_context(*l->record, l->sentence_index, tok);
        if (st.completion_start < 1) {
            continue;
        }
        ExamplePair pair;
        pair.prefix.assign(st.full.begin(),
                           st.full.begin() + static_cast<std::ptrdiff_t>(st.completion_start));
        pair.completion.assign(st.full.begin() + static_cast<std::ptrdiff_t>(st.completion_start),
                               st.full.begin() + static_cast<std::ptrdiff_t>(st.completion_end));
        pair.category = std::to_string(category);
        pair.activation = l->activation;
        pair.base_perplexity = model::sequence_perplexity(
            base, std::vector<TokenId>(st.full.begin(),
                                       st.full.begin() +
                                           static_cast<std::ptrdiff_t>(st.completion_end)),
            {st.completion_start, st.completion_end});
        scored.push_back({std::move(pair), 0.0});
        scored.back().ppl = scored.back().pair.base_perplexity;
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) { return a.ppl > b.ppl; });
    if (scored.size() > stage2) {
        scored.resize(stage2);
    }
    std::vector<ExamplePair> out;
    out.reserve(scored.size());
    for (auto& s : scored) {
        out.push_back(std::move(s.pair));
    }
    return out;
}

namespace {

SteeringVector train_vector_loop(const model::ModelWeights& base,
                                 const std::vector<ExamplePair>& examples, std::size_t layer,
                                 const SteeringVector* frozen_bias, const SteeringTrainConfig& cfg,
                                 const std::string& category_name, int category_index,
                                 const std::vector<double>* initial) {
    if (examples.empty()) {
        throw std::invalid_argument("train_steering_vector: no examples");
    }
    const std::size_t d = base.config.model_dim;
    if (layer >= base.config.layer_count) {
        throw std::invalid_argument("train_steering_vector: layer out of range");
    }
    if (frozen_bias && frozen_bias->layer != layer) {
        throw std::invalid_argument("train_steering_vector: bias layer mismatch");
    }
    if (initial && initial->size() != d) {
        throw std::invalid_argument("train_steering_vector: warm start dimension mismatch");
    }

    SteeringVector sv;
    sv.category = category_name;
    sv.category_index = category_index;
    sv.layer = layer;

    Tensor2D params(1, d, 0.0);
    if (initial) {
        std::copy(initial->begin(), initial->end(), params.data.begin());
    }

    numcore::AdamState opt(1, d);
    SeededRng rng(cfg.seed);
    std::vector<std::size_t> order = rng.permutation(examples.size());
    std::size_t cursor = 0;

    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t bad_iters = 0;

    for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
        const double lr = cfg.lr * 0.5 *
                          (1.0 + std::cos(3.141592653589793 * static_cast<double>(iter) /
                                          static_cast<double>(cfg.max_iters)));
        std::vector<std::size_t> batch;
        for (std::size_t i = 0; i < cfg.minibatch; ++i) {
            if (cursor >= order.size()) {
                order = rng.permutation(examples.size());
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        std::size_t total_targets = 0;
        for (std::size_t b : batch) {
            total_targets += examples[b].completion.size();
        }
        const double scale = 1.0 / static_cast<double>(total_targets);

        Tensor2D grad(1, d, 0.0);
        double loss_sum = 0.0;
        for (std::size_t b : batch) {
            const auto& ex = examples[b];
            const auto full = ex.full();
            std::vector<model::Intervention> ivs;
            ivs.push_back({layer, std::vector<double>(params.data.begin(), params.data.end()),
                           1.0, 0});
            if (frozen_bias) {
                ivs.push_back(as_intervention(*frozen_bias));
            }
            std::vector<std::vector<double>> iv_grads(ivs.size(), std::vector<double>(d, 0.0));
            loss_sum += model::lm_loss_and_grads(base, full, ex.prefix.size(), ivs, nullptr,
                                                 &iv_grads, scale, nullptr);
            for (std::size_t c = 0; c < d; ++c) {
                grad.data[c] += iv_grads[0][c];
            }
        }
        const double loss = loss_sum * scale;
        if (!std::isfinite(loss)) {
            throw std::runtime_error("train_steering_vector: loss diverged");
        }
        sv.train_loss_curve.push_back(loss);
        numcore::adam_step(params, grad, opt, lr);

        if (loss < best_loss - cfg.min_delta) {
            best_loss = loss;
            bad_iters = 0;
        } else {
            ++bad_iters;
            if (bad_iters >= cfg.patience) {
                break;
            }
        }
    }
    sv.vector.assign(params.data.begin(), params.data.end());
    return sv;
}

}  // namespace

SteeringVector train_steering_vector(const model::ModelWeights& base,
                                     const std::vector<ExamplePair>& examples, std::size_t layer,
                                     const SteeringVector* frozen_bias,
                                     const SteeringTrainConfig& cfg,
                                     const std::string& category_name, int category_index,
                                     const std::vector<double>* warm_start) {
    return train_vector_loop(base, examples, layer, frozen_bias, cfg, category_name,
                             category_index, cfg.warm_start_diff_means ? warm_start : nullptr);
}

SteeringVector train_bias_vector(const model::ModelWeights& base,
                                 const std::vector<corpus::TraceRecord>& rollouts,
                                 const corpus::Tokenizer& tok, std::size_t layer,
                                 const SteeringTrainConfig& cfg) {
    if (rollouts.empty()) {
        throw std::invalid_argument("train_bias_vector: no rollouts");
    }
    std::vector<ExamplePair> examples;
    examples.reserve(rollouts.size());
    for (const auto& rec : rollouts) {
        ExamplePair ex;
        ex.prefix = tok.tokenize(rec.prompt);
        // full-rollout target: the whole trace (with its joining space)
        const auto full = tok.tokenize(rec.full_text());
        ex.completion.assign(full.begin() + static_cast<std::ptrdiff_t>(ex.prefix.size()),
                             full.end());
        ex.category = "bias";
        examples.push_back(std::move(ex));
    }
    return train_vector_loop(base, examples, layer, nullptr, cfg, "bias", -1, nullptr);
}

std::vector<double> difference_of_means(const Tensor2D& target_rows, const Tensor2D& base_rows) {
    if (target_rows.rows == 0 || base_rows.rows == 0) {
        throw std::invalid_argument("difference_of_means: empty activation set");
    }
    if (target_rows.cols != base_rows.cols) {
        throw std::invalid_argument("difference_of_means: dimension mismatch");
    }
    std::vector<double> out(target_rows.cols, 0.0);
    for (std::size_t r = 0; r < target_rows.rows; ++r) {
        const double* row = target_rows.row(r);
        for (std::size_t c = 0; c < target_rows.cols; ++c) {
            out[c] += row[c];
        }
    }
    for (double& v : out) {
        v /= static_cast<double>(target_rows.rows);
    }
    for (std::size_t r = 0; r < base_rows.rows; ++r) {
        const double* row = base_rows.row(r);
        for (std::size_t c = 0; c < base_rows.cols; ++c) {
            out[c] -= row[c] / static_cast<double>(base_rows.rows);
        }
    }
    return out;
}

double mean_completion_loss(const model::ModelWeights& base,
                            const std::vector<ExamplePair>& examples,
                            const std::vector<model::Intervention>& interventions) {
    if (examples.empty()) {
        throw std::invalid_argument("mean_completion_loss: no examples");
    }
    double loss_sum = 0.0;
    std::size_t total = 0;
    for (const auto& ex : examples) {
        std::size_t n = 0;
        loss_sum += model::lm_loss_and_grads(base, ex.full(), ex.prefix.size(), interventions,
                                             nullptr, nullptr, 1.0, &n);
        total += n;
    }
    return loss_sum / static_cast<double>(total);
}

const SteeringVector* VectorBundle::find_category(std::size_t index) const {
    for (const auto& v : categories) {
        if (v.category_index == static_cast<int>(index)) {
            return &v;
        }
    }
    return nullptr;
}

void save_steering_vector(const SteeringVector& v, const std::string& path,
                          const std::string& config_hash) {
    json j;
    j["category"] = v.category;
    j["category_index"] = v.category_index;
    j["layer"] = v.layer;
    j["dim"] = v.vector.size();
    j["vector"] = v.vector;
    j["norm"] = v.norm();
    j["config_hash"] = config_hash;
    j["loss_curve"] = v.train_loss_curve;
    j["source_taxonomy"] = v.source_taxonomy;
    write_file(path, j.dump(2) + "\n");
}

SteeringVector load_steering_vector(const std::string& path) {
    const json j = json::parse(read_file(path));
    SteeringVector v;
    v.category = j.at("category").get<std::string>();
    v.category_index = j.at("category_index").get<int>();
    v.layer = j.at("layer").get<std::size_t>();
    v.vector = j.at("vector").get<std::vector<double>>();
    if (v.vector.size() != j.at("dim").get<std::size_t>()) {
        throw std::runtime_error("steering vector file: dim mismatch");
    }
    v.train_loss_curve = j.at("loss_curve").get<std::vector<double>>();
    v.source_taxonomy = j.value("source_taxonomy", std::string());
    return v;
}

void save_bundle(const VectorBundle& bundle, const std::string& dir,
                 const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["config_hash"] = config_hash;
    if (bundle.classifier_layer) {
        manifest["classifier_layer"] = *bundle.classifier_layer;
    }
    if (bundle.bias) {
        save_steering_vector(*bundle.bias, dir + "/bias.json", config_hash);
        manifest["bias"] = "bias.json";
    }
    json cats = json::array();
    for (const auto& v : bundle.categories) {
        const std::string name = "category_" + std::to_string(v.category_index) + ".json";
        save_steering_vector(v, dir + "/" + name, config_hash);
        cats.push_back(name);
    }
    manifest["categories"] = cats;
    write_file(dir + "/bundle.json", manifest.dump(2) + "\n");
}

VectorBundle load_bundle(const std::string& dir) {
    const json manifest = json::parse(read_file(dir + "/bundle.json"));
    VectorBundle bundle;
    if (manifest.contains("classifier_layer")) {
        bundle.classifier_layer = manifest.at("classifier_layer").get<std::size_t>();
    }
    if (manifest.contains("bias")) {
        bundle.bias = load_steering_vector(dir + "/" + manifest.at("bias").get<std::string>());
    }
    for (const auto& name : manifest.at("categories")) {
        bundle.categories.push_back(load_steering_vector(dir + "/" + name.get<std::string>()));
    }
    return bundle;
}

}  // namespace steerlab::steering
