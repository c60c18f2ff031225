#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "steerlab/corpus/generator.hpp"
#include "steerlab/model/train.hpp"
#include "steerlab/numcore/rng.hpp"
#include "steerlab/steering/steering.hpp"
#include "support/oracles.hpp"

using namespace steerlab;
using namespace steerlab::steering;
using numcore::SeededRng;
using numcore::Tensor2D;

namespace {

struct Fixture {
    corpus::Tokenizer tok;
    std::vector<corpus::TraceRecord> records;
    model::ModelWeights base;
    std::vector<LabeledSentenceRef> labeled;  // generator tags as labels
    std::map<std::string, std::size_t> tag_ids;
};

Fixture make_fixture(std::size_t record_count, std::uint64_t seed, bool train_base) {
    corpus::SyntheticTaskSpec spec;
    spec.seed = seed;
    spec.error_injection_rate = 0.4;
    spec.verify_rate = 0.6;
    spec.step_count_range = {1, 2};
    const auto records = corpus::gen_synthetic_traces(spec, record_count);

    std::vector<std::string> texts = corpus::domain_coverage_texts(spec.modulus);
    for (const auto& r : records) {
        texts.push_back(r.full_text());
    }
    auto tok = corpus::Tokenizer::build(texts);

    model::ModelConfig cfg;
    cfg.layer_count = 3;
    cfg.model_dim = 16;
    cfg.head_count = 2;
    cfg.context_length = 192;
    cfg.vocab_size = tok.vocab_size();
    cfg.seed = seed;
    auto base = model::ModelWeights::init(cfg);
    if (train_base) {
        std::vector<std::vector<corpus::TokenId>> seqs;
        for (const auto& r : records) {
            auto ids = tok.tokenize(r.full_text());
            ids.push_back(tok.eos_id());
            seqs.push_back(std::move(ids));
        }
        model::TrainLmConfig tc;
        tc.steps = 60;
        tc.lr = 2e-3;
        tc.batch_size = 4;
        tc.seed = seed;
        model::train_lm(base, seqs, tc);
    }

    Fixture fx{std::move(tok), records, std::move(base), {}, {}};
    const std::vector<std::string> tags = {"restate", "compute", "verify", "backtrack",
                                           "conclude"};
    for (std::size_t i = 0; i < tags.size(); ++i) {
        fx.tag_ids[tags[i]] = i;
    }
    SeededRng act_rng(seed ^ 0xabc);
    for (const auto& rec : fx.records) {
        for (std::size_t si = 0; si < rec.sentences.size(); ++si) {
            LabeledSentenceRef ref;
            ref.record = nullptr;  // patched below once the vector is stable
            ref.sentence_index = si;
            ref.category = fx.tag_ids.at((*rec.behavior_tags)[si]);
            ref.activation = 1.0 + act_rng.next_double();
            fx.labeled.push_back(ref);
        }
    }
    // fix record pointers (vector now stable)
    std::size_t k = 0;
    for (const auto& rec : fx.records) {
        for (std::size_t si = 0; si < rec.sentences.size(); ++si) {
            fx.labeled[k++].record = &rec;
        }
    }
    return fx;
}

}  // namespace

TEST_CASE("select_examples keeps the configured counts") {
    auto fx = make_fixture(12, 3, false);
    SteeringTrainConfig cfg;
    cfg.stage1_count = 8;
    cfg.stage2_count = 4;
    const std::size_t compute_id = fx.tag_ids.at("compute");
    std::vector<LabeledSentenceRef> pool;
    for (const auto& l : fx.labeled) {
        if (l.category == compute_id && pool.size() < 10) {
            pool.push_back(l);
        }
    }
    REQUIRE(pool.size() == 10);
    const auto examples = select_examples(pool, compute_id, fx.base, fx.tok, cfg);
    CHECK(examples.size() == 4);
    for (const auto& ex : examples) {
        CHECK(!ex.completion.empty());
        CHECK(!ex.prefix.empty());
        CHECK(ex.base_perplexity > 0.0);
    }
}

TEST_CASE("stage-2 survivors dominate rejected stage-1 members by perplexity") {
    auto fx = make_fixture(14, 5, false);
    SteeringTrainConfig cfg;
    cfg.stage1_count = 12;
    cfg.stage2_count = 5;
    const std::size_t compute_id = fx.tag_ids.at("compute");
    std::vector<LabeledSentenceRef> pool;
    for (const auto& l : fx.labeled) {
        if (l.category == compute_id && pool.size() < 12) {
            pool.push_back(l);
        }
    }
    const auto survivors = select_examples(pool, compute_id, fx.base, fx.tok, cfg);
    REQUIRE(survivors.size() == 5);

    // recompute all candidate perplexities via the public path
    SteeringTrainConfig all_cfg = cfg;
    all_cfg.stage2_count = 12;
    const auto everyone = select_examples(pool, compute_id, fx.base, fx.tok, all_cfg);
    double min_kept = 1e300;
    for (const auto& ex : survivors) {
        min_kept = std::min(min_kept, ex.base_perplexity);
    }
    // count how many of 'everyone' beat the kept minimum: at most the
    // number of survivors
    std::size_t better = 0;
    for (const auto& ex : everyone) {
        if (ex.base_perplexity > min_kept) {
            ++better;
        }
    }
    CHECK(better <= survivors.size());
}

TEST_CASE("select_examples on the paper-parity counts keeps the 4:1 ratio when clamped") {
    auto fx = make_fixture(10, 7, false);
    SteeringTrainConfig cfg;  // 8192 / 2048 defaults
    const std::size_t compute_id = fx.tag_ids.at("compute");
    const auto examples = select_examples(fx.labeled, compute_id, fx.base, fx.tok, cfg);
    std::size_t available = 0;
    for (const auto& l : fx.labeled) {
        available += l.category == compute_id ? 1 : 0;
    }
    CHECK(examples.size() ==
          std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(available * 2048.0 /
                                                                        8192.0))));
    CHECK_THROWS_AS(select_examples(fx.labeled, 99, fx.base, fx.tok, cfg),
                    std::invalid_argument);
}

TEST_CASE("zero iterations returns the zero vector with an empty curve") {
    auto fx = make_fixture(8, 9, false);
    SteeringTrainConfig cfg;
    cfg.max_iters = 0;
    cfg.stage1_count = 8;
    cfg.stage2_count = 4;
    const std::size_t compute_id = fx.tag_ids.at("compute");
    const auto examples = select_examples(fx.labeled, compute_id, fx.base, fx.tok, cfg);
    const auto v = train_steering_vector(fx.base, examples, 1, nullptr, cfg, "compute",
                                         static_cast<int>(compute_id));
    CHECK(v.train_loss_curve.empty());
    for (double c : v.vector) {
        CHECK(c == 0.0);
    }
}

TEST_CASE("lr zero keeps the initialization") {
    auto fx = make_fixture(8, 11, false);
    SteeringTrainConfig cfg;
    cfg.max_iters = 5;
    cfg.lr = 0.0;
    cfg.stage1_count = 8;
    cfg.stage2_count = 4;
    const std::size_t compute_id = fx.tag_ids.at("compute");
    const auto examples = select_examples(fx.labeled, compute_id, fx.base, fx.tok, cfg);
    const auto v = train_steering_vector(fx.base, examples, 1, nullptr, cfg, "compute",
                                         static_cast<int>(compute_id));
    for (double c : v.vector) {
        CHECK(c == 0.0);
    }
    CHECK(!v.train_loss_curve.empty());
}

TEST_CASE("early stopping halts after patience non-improvements") {
    auto fx = make_fixture(8, 13, false);
    SteeringTrainConfig cfg;
    cfg.max_iters = 50;
    cfg.min_delta = 1e9;  // nothing can improve by this much
    cfg.patience = 3;
    cfg.stage1_count = 8;
    cfg.stage2_count = 4;
    const std::size_t compute_id = fx.tag_ids.at("compute");
    const auto examples = select_examples(fx.labeled, compute_id, fx.base, fx.tok, cfg);
    const auto v = train_steering_vector(fx.base, examples, 1, nullptr, cfg, "compute",
                                         static_cast<int>(compute_id));
    // first iteration always improves on +inf, then `patience` failures
    CHECK(v.train_loss_curve.size() == 1 + cfg.patience);
}

TEST_CASE("training reduces held-out completion loss for a behavior category") {
    auto fx = make_fixture(60, 17, true);
    const std::size_t verify_id = fx.tag_ids.at("verify");
    SteeringTrainConfig cfg;
    cfg.max_iters = 30;
    cfg.minibatch = 6;
    cfg.stage1_count = 60;
    cfg.stage2_count = 24;
    cfg.seed = 17;

    auto examples = select_examples(fx.labeled, verify_id, fx.base, fx.tok, cfg);
    REQUIRE(examples.size() >= 8);
    // hold out a quarter
    const std::size_t held = examples.size() / 4;
    std::vector<ExamplePair> held_out(examples.end() - held, examples.end());
    examples.resize(examples.size() - held);

    const auto v = train_steering_vector(fx.base, examples, 1, nullptr, cfg, "verify",
                                         static_cast<int>(verify_id));
    const double with_vector =
        mean_completion_loss(fx.base, held_out, {as_intervention(v)});
    const double without = mean_completion_loss(fx.base, held_out, {});
    CHECK(with_vector < without);
}

TEST_CASE("bias vector training is deterministic and shifts the optimum") {
    auto fx = make_fixture(16, 19, false);
    SteeringTrainConfig cfg;
    cfg.max_iters = 8;
    cfg.minibatch = 4;
    cfg.seed = 19;
    std::vector<corpus::TraceRecord> rollouts(fx.records.begin(), fx.records.begin() + 6);
    const auto b1 = train_bias_vector(fx.base, rollouts, fx.tok, 1, cfg);
    const auto b2 = train_bias_vector(fx.base, rollouts, fx.tok, 1, cfg);
    CHECK(b1.vector == b2.vector);
    CHECK(b1.category == "bias");
    CHECK(b1.category_index == -1);

    // category optimum moves when the frozen bias is present
    SteeringTrainConfig cat_cfg = cfg;
    cat_cfg.stage1_count = 16;
    cat_cfg.stage2_count = 8;
    const std::size_t compute_id = fx.tag_ids.at("compute");
    const auto examples = select_examples(fx.labeled, compute_id, fx.base, fx.tok, cat_cfg);
    const auto with_bias = train_steering_vector(fx.base, examples, 1, &b1, cat_cfg, "compute",
                                                 static_cast<int>(compute_id));
    const auto without_bias = train_steering_vector(fx.base, examples, 1, nullptr, cat_cfg,
                                                    "compute", static_cast<int>(compute_id));
    CHECK(with_bias.vector != without_bias.vector);
}

TEST_CASE("difference of means") {
    Tensor2D a(3, 4, 1.0), b(3, 4, 1.0);
    const auto zero = difference_of_means(a, b);
    for (double v : zero) {
        CHECK(v == doctest::Approx(0.0));
    }
    Tensor2D shifted = a;
    for (auto& v : shifted.data) {
        v += 2.5;
    }
    const auto c = difference_of_means(shifted, b);
    for (double v : c) {
        CHECK(v == doctest::Approx(2.5));
    }

    // random oracle
    SeededRng rng(7);
    Tensor2D t(5, 3), s(4, 3);
    for (auto& v : t.data) {
        v = rng.next_normal();
    }
    for (auto& v : s.data) {
        v = rng.next_normal();
    }
    const auto got = difference_of_means(t, s);
    for (std::size_t c2 = 0; c2 < 3; ++c2) {
        double mt = 0.0, ms = 0.0;
        for (std::size_t r = 0; r < 5; ++r) {
            mt += t.at(r, c2);
        }
        for (std::size_t r = 0; r < 4; ++r) {
            ms += s.at(r, c2);
        }
        CHECK(got[c2] == doctest::Approx(mt / 5.0 - ms / 4.0).epsilon(1e-12));
    }

    Tensor2D empty(0, 3);
    CHECK_THROWS_AS(difference_of_means(empty, b), std::invalid_argument);
}

TEST_CASE("steering vector files and bundles round-trip") {
    SteeringVector v;
    v.category = "2";
    v.category_index = 2;
    v.layer = 1;
    v.vector = {0.5, -1.25, 2.0};
    v.train_loss_curve = {1.0, 0.5};
    const auto dir = std::filesystem::temp_directory_path() / "steerlab_bundle_test";
    std::filesystem::create_directories(dir);
    save_steering_vector(v, (dir / "v.json").string(), "cafe");
    const auto back = load_steering_vector((dir / "v.json").string());
    CHECK(back.vector == v.vector);
    CHECK(back.category_index == 2);
    CHECK(back.norm() == doctest::Approx(v.norm()));

    VectorBundle bundle;
    bundle.bias = v;
    bundle.bias->category = "bias";
    bundle.bias->category_index = -1;
    bundle.categories = {v};
    bundle.classifier_layer = 3;
    save_bundle(bundle, dir.string(), "cafe");
    const auto loaded = load_bundle(dir.string());
    CHECK(loaded.bias.has_value());
    CHECK(loaded.categories.size() == 1);
    CHECK(loaded.classifier_layer == 3);
    CHECK(loaded.find_category(2) != nullptr);
    CHECK(loaded.find_category(5) == nullptr);
    std::filesystem::remove_all(dir);
}
