#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "steerlab/corpus/generator.hpp"
#include "steerlab/hybrid/hybrid.hpp"
#include "steerlab/model/train.hpp"
#include "steerlab/numcore/rng.hpp"

using namespace steerlab;
using namespace steerlab::hybrid;
using numcore::SeededRng;
using numcore::Tensor2D;

namespace {

struct Fixture {
    corpus::Tokenizer tok;
    model::ModelWeights base;
    model::ModelWeights thinking;
    sae::SaeParams classifier;
    steering::VectorBundle bundle;
    HybridConfig cfg;
};

Fixture make_fixture(std::uint64_t seed) {
    corpus::SyntheticTaskSpec spec;
    spec.seed = seed;
    const auto recs = corpus::gen_synthetic_traces(spec, 8);
    std::vector<std::string> texts = corpus::domain_coverage_texts(spec.modulus);
    for (const auto& r : recs) {
        texts.push_back(r.full_text());
    }
    auto tok = corpus::Tokenizer::build(texts);

    model::ModelConfig mc;
    mc.layer_count = 3;
    mc.model_dim = 16;
    mc.head_count = 2;
    mc.context_length = 160;
    mc.vocab_size = tok.vocab_size();
    mc.seed = seed;
    auto base = model::ModelWeights::init(mc);
    mc.seed = seed + 1;
    auto thinking = model::ModelWeights::init(mc);

    sae::SaeParams classifier;
    classifier.input_dim = mc.model_dim;
    classifier.dict_size = 5;
    classifier.k = 1;
    classifier.w_enc = Tensor2D(5, mc.model_dim);
    classifier.b_enc = Tensor2D(1, mc.model_dim, 0.0);
    classifier.w_dec = Tensor2D(mc.model_dim, 5);
    classifier.b_dec = Tensor2D(1, mc.model_dim, 0.0);
    SeededRng rng(seed ^ 0x5ae);
    for (std::size_t j = 0; j < 5; ++j) {
        double norm2 = 0.0;
        std::vector<double> col(mc.model_dim);
        for (std::size_t c = 0; c < mc.model_dim; ++c) {
            col[c] = rng.next_normal();
            norm2 += col[c] * col[c];
        }
        for (std::size_t c = 0; c < mc.model_dim; ++c) {
            classifier.w_dec.at(c, j) = col[c] / std::sqrt(norm2);
            classifier.w_enc.at(j, c) = col[c] / std::sqrt(norm2);
        }
    }

    steering::VectorBundle bundle;
    steering::SteeringVector bias;
    bias.category = "bias";
    bias.category_index = -1;
    bias.layer = 1;
    bias.vector.assign(mc.model_dim, 0.0);
    for (auto& v : bias.vector) {
        v = rng.next_normal() * 0.05;
    }
    bundle.bias = bias;
    for (int c = 0; c < 5; ++c) {
        steering::SteeringVector v;
        v.category = std::to_string(c);
        v.category_index = c;
        v.layer = 1;
        v.vector.assign(mc.model_dim, 0.0);
        for (auto& x : v.vector) {
            x = rng.next_normal() * 0.3;
        }
        bundle.categories.push_back(std::move(v));
    }

    HybridConfig cfg;
    cfg.steering_layer = 1;
    cfg.classifier_layer = 2;
    cfg.max_new_tokens = 12;
    cfg.seed = seed;
    return {std::move(tok), std::move(base), std::move(thinking), std::move(classifier),
            std::move(bundle), cfg};
}

std::vector<double> uniform_logprobs(std::size_t vocab) {
    return std::vector<double>(vocab, -std::log(static_cast<double>(vocab)));
}

}  // namespace

TEST_CASE("sweep sizes match the configured grid") {
    auto fx = make_fixture(3);
    const auto rollout = fx.tok.tokenize(corpus::build_prompt("Start at 1. Final value modulo 10?"));
    const auto logprobs = uniform_logprobs(fx.tok.vocab_size());

    HybridConfig full = fx.cfg;
    full.coefficients = full_sweep_coefficients();
    full.windows = full_sweep_windows();
    const auto cat =
        std::make_optional(std::make_pair(std::size_t{1}, fx.bundle.categories[1].vector));
    const auto candidates =
        sweep_candidates(fx.base, rollout, cat, &*fx.bundle.bias, logprobs, full);
    CHECK(candidates.size() == 51);
    CHECK(candidates[0].is_null());

    const auto narrow = sweep_candidates(fx.base, rollout, cat, &*fx.bundle.bias, logprobs,
                                         fx.cfg);
    CHECK(narrow.size() == 7);

    // no category: only the null candidate
    const auto none =
        sweep_candidates(fx.base, rollout, std::nullopt, &*fx.bundle.bias, logprobs, fx.cfg);
    CHECK(none.size() == 1);
}

TEST_CASE("zero category vector collapses the sweep onto the null token") {
    auto fx = make_fixture(4);
    const auto rollout = fx.tok.tokenize(corpus::build_prompt("Start at 2. Final value modulo 10?"));
    const auto logprobs = uniform_logprobs(fx.tok.vocab_size());
    const auto cat = std::make_optional(
        std::make_pair(std::size_t{0}, std::vector<double>(fx.base.config.model_dim, 0.0)));
    const auto candidates =
        sweep_candidates(fx.base, rollout, cat, &*fx.bundle.bias, logprobs, fx.cfg);
    for (const auto& c : candidates) {
        CHECK(c.token == candidates[0].token);
    }
}

TEST_CASE("select_candidate minimum and tie rules") {
    SweepCandidate null_cand;
    null_cand.coefficient = 0.0;
    null_cand.token = 1;
    null_cand.think_perplexity = 2.0;
    SweepCandidate steered;
    steered.coefficient = 0.5;
    steered.category = 3;
    steered.token = 2;
    steered.think_perplexity = 1.5;

    // strictly lower perplexity wins
    CHECK(!select_candidate({null_cand, steered}).is_null());

    // exact tie goes to null
    steered.think_perplexity = 2.0;
    CHECK(select_candidate({steered, null_cand}).is_null());

    // among steered ties, the smaller coefficient then smaller |window|
    SweepCandidate a = steered, b = steered;
    a.coefficient = 0.7;
    b.coefficient = 0.5;
    a.think_perplexity = b.think_perplexity = 1.0;
    CHECK(select_candidate({a, b}).coefficient == 0.5);
    a.coefficient = b.coefficient = 0.5;
    a.window = -15;
    b.window = 0;
    CHECK(select_candidate({a, b}).window == 0);

    CHECK_THROWS_AS(select_candidate({}), std::invalid_argument);
}

TEST_CASE("select_candidate matches a min-scan oracle on random sweeps") {
    SeededRng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<SweepCandidate> cands;
        SweepCandidate null_cand;
        null_cand.think_perplexity = 0.5 + rng.next_double();
        cands.push_back(null_cand);
        for (int i = 0; i < 6; ++i) {
            SweepCandidate c;
            c.coefficient = 0.1 * (1 + static_cast<int>(rng.next_below(10)));
            c.category = rng.next_below(5);
            c.think_perplexity = 0.5 + rng.next_double();
            cands.push_back(c);
        }
        double best = 1e300;
        for (const auto& c : cands) {
            best = std::min(best, c.think_perplexity);
        }
        CHECK(select_candidate(cands).think_perplexity == doctest::Approx(best));
    }
}

TEST_CASE("classify_step returns the strongest latent or nothing") {
    auto fx = make_fixture(5);
    const auto rollout = fx.tok.tokenize(corpus::build_prompt("Start at 3. Final value modulo 10?"));
    const auto label = classify_step(fx.thinking, fx.classifier, rollout, fx.cfg.classifier_layer);
    // random projections virtually never produce an all-zero encoding
    REQUIRE(label.has_value());
    CHECK(label->category < 5);

    // centered input: bias at the captured residual makes latents zero
    model::ForwardOptions opts;
    opts.logits_all_positions = false;
    opts.captures.push_back({fx.cfg.classifier_layer, std::pair{rollout.size() - 1,
                                                                rollout.size()}});
    const auto out = model::forward_with_capture(fx.thinking, rollout, opts);
    sae::SaeParams centered = fx.classifier;
    for (std::size_t c = 0; c < centered.input_dim; ++c) {
        centered.b_enc.at(0, c) = out.captures[0].at(0, c);
    }
    CHECK(!classify_step(fx.thinking, centered, rollout, fx.cfg.classifier_layer).has_value());
}

TEST_CASE("generate_hybrid is deterministic and the ledger replays") {
    auto fx = make_fixture(6);
    const std::string question = "Start at 5. Step 1: add 3. Final value modulo 10?";
    const auto run1 = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                      "p0", question, fx.cfg);
    const auto run2 = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                      "p0", question, fx.cfg);
    CHECK(run1.emitted == run2.emitted);
    CHECK(run1.generated_text == run2.generated_text);
    CHECK(run1.stats.total_tokens == run1.emitted.size());
    CHECK(run1.stats.steered_tokens <= run1.stats.total_tokens);

    const auto steps = ledger_steps_from_jsonl(run_to_jsonl(run1));
    CHECK(steps.size() == run1.steps.size());
    CHECK(verify_ledger_selection(steps));

    // corrupting a perplexity breaks the replay check
    auto broken = steps;
    if (!broken.empty() && !broken[0].candidates.empty()) {
        broken[0].chosen.think_perplexity = broken[0].chosen.think_perplexity + 1.0;
        CHECK(!verify_ledger_selection(broken));
    }
}

TEST_CASE("max tokens zero yields an empty run with zero fraction") {
    auto fx = make_fixture(7);
    HybridConfig cfg = fx.cfg;
    cfg.max_new_tokens = 0;
    const auto run = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                     "p0", "Start at 1. Final value modulo 10?", cfg);
    CHECK(run.emitted.empty());
    CHECK(run.stats.total_tokens == 0);
    CHECK(run.stats.steered_fraction() == 0.0);
}

TEST_CASE("only-bias ablation never fires categories and equals a bias-only bundle") {
    auto fx = make_fixture(8);
    HybridConfig cfg = fx.cfg;
    cfg.ablation = Ablation::kOnlyBias;
    const std::string q = "Start at 4. Step 1: add 2. Final value modulo 10?";
    const auto only_bias = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle,
                                           fx.tok, "p0", q, cfg);
    CHECK(only_bias.stats.steered_tokens == 0);
    CHECK(only_bias.stats.category_firings.empty());

    steering::VectorBundle bias_only_bundle;
    bias_only_bundle.bias = fx.bundle.bias;
    HybridConfig none_cfg = fx.cfg;
    none_cfg.ablation = Ablation::kNone;
    const auto equivalent = generate_hybrid(fx.base, fx.thinking, fx.classifier,
                                            bias_only_bundle, fx.tok, "p0", q, none_cfg);
    CHECK(only_bias.emitted == equivalent.emitted);
}

TEST_CASE("random-vectors ablation uses unit vectors fixed by the seed") {
    auto fx = make_fixture(9);
    HybridConfig cfg = fx.cfg;
    cfg.ablation = Ablation::kRandomVectors;
    const std::string q = "Start at 6. Step 1: subtract 2. Final value modulo 10?";
    const auto r1 = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                    "p0", q, cfg);
    const auto r2 = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                    "p0", q, cfg);
    CHECK(r1.emitted == r2.emitted);
    cfg.seed += 1;
    const auto r3 = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                    "p0", q, cfg);
    // different seed may change the run; determinism within a seed is the
    // contract, difference across seeds is expected but not guaranteed
    (void)r3;
}

TEST_CASE("random-firing fires some category every step") {
    auto fx = make_fixture(10);
    HybridConfig cfg = fx.cfg;
    cfg.ablation = Ablation::kRandomFiring;
    const auto run = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                     "p0", "Start at 2. Step 1: add 4. Final value modulo 10?",
                                     cfg);
    for (const auto& step : run.steps) {
        CHECK(step.classified_category.has_value());
        CHECK(step.candidates.size() == 1 + cfg.coefficients.size() * cfg.windows.size());
    }
}

TEST_CASE("empty coefficient list degrades to bias-only generation") {
    auto fx = make_fixture(11);
    HybridConfig cfg = fx.cfg;
    cfg.coefficients.clear();
    const std::string q = "Start at 7. Step 1: multiply by 2. Final value modulo 10?";
    const auto run = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                     "p0", q, cfg);
    CHECK(run.stats.steered_tokens == 0);

    HybridConfig ob = fx.cfg;
    ob.ablation = Ablation::kOnlyBias;
    const auto bias_run = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle,
                                          fx.tok, "p0", q, ob);
    CHECK(run.emitted == bias_run.emitted);
}

TEST_CASE("aggregate_stats merges fractions both ways") {
    HybridRun a, b;
    a.stats.total_tokens = 10;
    a.stats.steered_tokens = 1;
    b.stats.total_tokens = 10;
    b.stats.steered_tokens = 3;
    const auto equal = aggregate_stats({a, b});
    CHECK(equal.per_problem_mean_fraction == doctest::Approx(0.2));
    CHECK(equal.corpus_steered_fraction == doctest::Approx(0.2));

    HybridRun c, d;
    c.stats.total_tokens = 10;
    c.stats.steered_tokens = 1;
    d.stats.total_tokens = 90;
    d.stats.steered_tokens = 45;
    const auto unequal = aggregate_stats({c, d});
    CHECK(unequal.corpus_steered_fraction == doctest::Approx(0.46));
    CHECK(unequal.per_problem_mean_fraction == doctest::Approx(0.3));

    CHECK_THROWS_AS(aggregate_stats({}), std::invalid_argument);
}

TEST_CASE("histograms sum to the steered count") {
    auto fx = make_fixture(12);
    const auto run = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                     "p0", "Start at 9. Step 1: subtract 5. Final value modulo 10?",
                                     fx.cfg);
    std::size_t firing_sum = 0;
    for (const auto& [cat, n] : run.stats.category_firings) {
        firing_sum += n;
    }
    std::size_t coef_sum = 0;
    for (const auto& [coef, n] : run.stats.coefficient_usage) {
        coef_sum += n;
    }
    CHECK(firing_sum == run.stats.steered_tokens);
    CHECK(coef_sum == run.stats.steered_tokens);
}

TEST_CASE("chosen perplexity is minimal at every step of a real run") {
    auto fx = make_fixture(13);
    const auto run = generate_hybrid(fx.base, fx.thinking, fx.classifier, fx.bundle, fx.tok,
                                     "p0", "Start at 8. Step 1: add 1. Final value modulo 10?",
                                     fx.cfg);
    for (const auto& step : run.steps) {
        for (const auto& c : step.candidates) {
            CHECK(step.chosen.think_perplexity <= c.think_perplexity);
        }
    }
}

TEST_CASE("ablation names round-trip") {
    for (auto mode : {Ablation::kNone, Ablation::kOnlyBias, Ablation::kRandomFiring,
                      Ablation::kRandomVectors}) {
        CHECK(ablation_from_name(ablation_name(mode)) == mode);
    }
    CHECK_THROWS_AS(ablation_from_name("bogus"), std::invalid_argument);
}
