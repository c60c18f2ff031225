#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "steerlab/corpus/generator.hpp"
#include "steerlab/numcore/rng.hpp"
#include "steerlab/taxonomy/grid.hpp"
#include "steerlab/taxonomy/offline_judge.hpp"
#include "steerlab/taxonomy/prompts.hpp"
#include "steerlab/taxonomy/remote_judge.hpp"
#include "steerlab/util/common.hpp"
#include "support/oracles.hpp"

using namespace steerlab;
using namespace steerlab::taxonomy;
using numcore::SeededRng;
using numcore::Tensor2D;

namespace {

// A scripted judge for the fixed fixtures.
class ScriptedJudge : public Judge {
public:
    std::function<bool(const Category&, const std::string&)> classify_fn;
    std::function<int(const Category&, const std::string&)> fit_fn;
    std::function<int(const Category&, const Category&)> sim_fn;

    ClusterDescription describe_cluster(std::size_t id, const std::vector<std::string>&,
                                        const std::vector<std::string>&) override {
        return {"scripted-" + std::to_string(id), "scripted", false};
    }
    std::optional<bool> classify(const Category& c, const std::string& s) override {
        return classify_fn(c, s);
    }
    std::optional<int> rate_fit(const Category& c, const std::string& s) override {
        return fit_fn(c, s);
    }
    std::optional<int> rate_similarity(const Category& a, const Category& b) override {
        return sim_fn(a, b);
    }
};

Category make_category(std::size_t id, std::vector<std::string> exemplars) {
    Category c;
    c.id = id;
    c.title = "category " + std::to_string(id);
    c.description = "test category";
    c.top_exemplars = std::move(exemplars);
    return c;
}

}  // namespace

TEST_CASE("consistency f1 is 1.0 under a perfect judge") {
    ScriptedJudge judge;
    judge.classify_fn = [](const Category&, const std::string& s) { return s == "pos"; };
    const std::vector<Category> cats = {make_category(0, {"pos"}), make_category(1, {"pos"})};
    std::vector<std::vector<LabeledSample>> samples(2);
    for (auto& s : samples) {
        s = {{"pos", true}, {"pos", true}, {"neg", false}, {"neg", false}};
    }
    CHECK(consistency_f1(judge, cats, samples) == doctest::Approx(1.0));
}

TEST_CASE("consistency f1 equals 2/3 for the always-yes judge") {
    ScriptedJudge judge;
    judge.classify_fn = [](const Category&, const std::string&) { return true; };
    const std::vector<Category> cats = {make_category(0, {"x"})};
    std::vector<std::vector<LabeledSample>> samples(1);
    for (int i = 0; i < 5; ++i) {
        samples[0].push_back({"p" + std::to_string(i), true});
        samples[0].push_back({"n" + std::to_string(i), false});
    }
    CHECK(consistency_f1(judge, cats, samples) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("completeness averages ratings over ten") {
    ScriptedJudge judge;
    int call = 0;
    const int ratings[3] = {10, 5, 0};
    judge.fit_fn = [&](const Category&, const std::string&) { return ratings[call++]; };
    const std::vector<Category> cats = {make_category(0, {"x"})};
    const std::vector<std::pair<std::string, std::size_t>> assignments = {
        {"a", 0}, {"b", 0}, {"c", 0}};
    CHECK(completeness_score(judge, cats, assignments) == doctest::Approx(0.5));

    call = 0;
    judge.fit_fn = [](const Category&, const std::string&) { return 10; };
    CHECK(completeness_score(judge, cats, assignments) == doctest::Approx(1.0));
}

TEST_CASE("independence from the similarity fixture") {
    ScriptedJudge judge;
    // pairs in order (0,1), (0,2), (1,2): similarities 0.2, 0.6, 0.4
    int call = 0;
    const int sims[3] = {2, 6, 4};
    judge.sim_fn = [&](const Category&, const Category&) { return sims[call++]; };
    const std::vector<Category> cats = {make_category(0, {"a"}), make_category(1, {"b"}),
                                        make_category(2, {"c"})};
    CHECK(independence_score(judge, cats) == doctest::Approx(2.0 / 3.0));

    // all identical categories: similarity 10, orthogonality 0 everywhere
    judge.sim_fn = [](const Category&, const Category&) { return 10; };
    CHECK(independence_score(judge, cats) == doctest::Approx(0.0));
}

TEST_CASE("independence is invariant to category order") {
    ScriptedJudge judge;
    judge.sim_fn = [](const Category& a, const Category& b) {
        // symmetric, content-derived similarity
        return static_cast<int>((a.id + b.id) * 2 % 11);
    };
    std::vector<Category> cats = {make_category(0, {"a"}), make_category(1, {"b"}),
                                  make_category(2, {"c"}), make_category(3, {"d"})};
    const double forward = independence_score(judge, cats);
    std::reverse(cats.begin(), cats.end());
    CHECK(independence_score(judge, cats) == doctest::Approx(forward));
}

TEST_CASE("combined score is the exact mean") {
    CHECK(combined_score(0.3, 0.6, 0.9) == doctest::Approx((0.3 + 0.6 + 0.9) / 3.0));
}

TEST_CASE("min-max normalization fixture and degenerate case") {
    const auto r = min_max_normalize({0.2, 0.5, 0.8});
    REQUIRE(r.normalized.size() == 3);
    CHECK(r.normalized[0] == doctest::Approx(0.0));
    CHECK(r.normalized[1] == doctest::Approx(0.5));
    CHECK(r.normalized[2] == doctest::Approx(1.0));
    CHECK(!r.degenerate);

    const auto d = min_max_normalize({0.4, 0.4, 0.4});
    CHECK(d.degenerate);
    CHECK(d.normalized == std::vector<double>{0.4, 0.4, 0.4});
}

TEST_CASE("decoder orthogonality on orthonormal and duplicated columns") {
    sae::SaeParams sae;
    sae.input_dim = 4;
    sae.dict_size = 3;
    sae.k = 1;
    sae.w_enc = Tensor2D(3, 4, 0.0);
    sae.b_enc = Tensor2D(1, 4, 0.0);
    sae.b_dec = Tensor2D(1, 4, 0.0);
    sae.w_dec = Tensor2D(4, 3, 0.0);
    sae.w_dec.at(0, 0) = 1.0;
    sae.w_dec.at(1, 1) = 1.0;
    sae.w_dec.at(2, 2) = 1.0;
    const auto orth = decoder_orthogonality(sae);
    CHECK(orth.avg_abs_cos == doctest::Approx(0.0));
    CHECK(orth.max_abs_cos == doctest::Approx(0.0));

    sae.w_dec.at(1, 1) = 0.0;
    sae.w_dec.at(0, 1) = 1.0;  // duplicate of column 0
    const auto dup = decoder_orthogonality(sae);
    CHECK(dup.max_abs_cos == doctest::Approx(1.0));
}

TEST_CASE("decoder orthogonality matches the double-loop oracle") {
    SeededRng rng(15);
    sae::SaeParams sae;
    sae.input_dim = 64;
    sae.dict_size = 15;
    sae.k = 3;
    sae.w_enc = Tensor2D(15, 64, 0.0);
    sae.b_enc = Tensor2D(1, 64, 0.0);
    sae.b_dec = Tensor2D(1, 64, 0.0);
    sae.w_dec = Tensor2D(64, 15);
    for (std::size_t j = 0; j < 15; ++j) {
        double norm2 = 0.0;
        for (std::size_t c = 0; c < 64; ++c) {
            sae.w_dec.at(c, j) = rng.next_normal();
            norm2 += sae.w_dec.at(c, j) * sae.w_dec.at(c, j);
        }
        for (std::size_t c = 0; c < 64; ++c) {
            sae.w_dec.at(c, j) /= std::sqrt(norm2);
        }
    }
    double sum = 0.0, mx = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < 15; ++i) {
        for (std::size_t j = i + 1; j < 15; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < 64; ++c) {
                dot += sae.w_dec.at(c, i) * sae.w_dec.at(c, j);
            }
            sum += std::fabs(dot);
            mx = std::max(mx, std::fabs(dot));
            ++pairs;
        }
    }
    const auto got = decoder_orthogonality(sae);
    CHECK(got.avg_abs_cos == doctest::Approx(sum / pairs).epsilon(1e-12));
    CHECK(got.max_abs_cos == doctest::Approx(mx).epsilon(1e-12));
}

TEST_CASE("offline judge titles surface distinguishing terms") {
    const std::vector<std::string> background = {
        "Check step 1: 7 + 5 = 2, correct.", "Check step 2: 3 * 4 = 2, correct.",
        "Compute step 1: 7 + 5 = 2.",        "We start at 7 and apply 2 steps modulo 10.",
        "So the final answer is 2.",         "The answer is 4.",
    };
    OfflineJudge judge(background);
    const auto desc = judge.describe_cluster(
        2, {"Check step 1: 7 + 5 = 2, correct.", "Check step 2: 3 * 4 = 2, correct."},
        {"Check step 3: 1 + 1 = 2, correct."});
    CHECK(desc.title.find("check") != std::string::npos);
    CHECK(!desc.degraded);
}

TEST_CASE("offline judge describes a single exemplar") {
    OfflineJudge judge({});
    const auto desc = judge.describe_cluster(0, {"verify the result"}, {});
    CHECK(!desc.title.empty());
}

TEST_CASE("offline judge separates generator-tagged clusters with f1 >= 0.8") {
    corpus::SyntheticTaskSpec spec;
    spec.seed = 31;
    spec.error_injection_rate = 0.5;
    spec.verify_rate = 0.6;
    spec.step_count_range = {2, 4};
    const auto recs = corpus::gen_synthetic_traces(spec, 120);

    // group sentences by generator tag
    std::map<std::string, std::vector<std::string>> by_tag;
    for (const auto& rec : recs) {
        for (std::size_t i = 0; i < rec.sentences.size(); ++i) {
            const auto& [s, e] = rec.sentences[i];
            by_tag[(*rec.behavior_tags)[i]].push_back(rec.trace.substr(s, e - s));
        }
    }
    std::vector<std::string> background;
    for (const auto& [tag, sentences] : by_tag) {
        background.insert(background.end(), sentences.begin(), sentences.end());
    }
    OfflineJudge judge(background);

    std::vector<Category> cats;
    std::vector<std::vector<LabeledSample>> samples;
    SeededRng rng(5);
    std::size_t id = 0;
    for (const auto& [tag, sentences] : by_tag) {
        Category c;
        c.id = id++;
        c.title = tag;
        c.description = tag;
        for (std::size_t i = 0; i < std::min<std::size_t>(40, sentences.size()); ++i) {
            c.top_exemplars.push_back(sentences[i]);
        }
        cats.push_back(c);
    }
    std::size_t ci = 0;
    for (const auto& [tag, sentences] : by_tag) {
        std::vector<LabeledSample> s;
        for (std::size_t i = 0; i < 20 && i < sentences.size(); ++i) {
            s.push_back({sentences[sentences.size() - 1 - i], true});
        }
        // negatives drawn from the other tags round-robin
        for (const auto& [other_tag, other] : by_tag) {
            if (other_tag == tag) {
                continue;
            }
            for (std::size_t i = 0; i < 5 && i < other.size(); ++i) {
                s.push_back({other[i], false});
            }
        }
        samples.push_back(std::move(s));
        ++ci;
    }
    const double f1 = consistency_f1(judge, cats, samples);
    CHECK(f1 >= 0.8);
}

TEST_CASE("offline judge independence on disjoint vocabulary clusters") {
    OfflineJudge judge({});
    const std::vector<Category> cats = {
        make_category(0, {"alpha beta gamma", "alpha beta"}),
        make_category(1, {"delta epsilon zeta", "delta zeta"}),
        make_category(2, {"eta theta iota", "theta iota"}),
    };
    CHECK(independence_score(judge, cats) == doctest::Approx(1.0));
}

TEST_CASE("offline judge determinism") {
    const std::vector<std::string> background = {"one two three", "four five six"};
    OfflineJudge a(background), b(background);
    const auto cat = make_category(0, {"one two", "two three"});
    CHECK(*a.rate_fit(cat, "one two three") == *b.rate_fit(cat, "one two three"));
    CHECK(a.describe_cluster(0, {"one two"}, {}).title == b.describe_cluster(0, {"one two"}, {}).title);
}

TEST_CASE("grid search over a toy grid has the right shape") {
    // synthetic activations with 3 planted directions across 2 layers
    SeededRng rng(77);
    std::map<std::size_t, sae::ActivationDataset> acts;
    std::vector<std::string> texts;
    const std::size_t rows = 120, d = 8;
    for (std::size_t layer : {1ul, 2ul}) {
        sae::ActivationDataset ds;
        ds.dim = d;
        ds.rows = Tensor2D(rows, d);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t c = r % 3;
            for (std::size_t j = 0; j < d; ++j) {
                ds.rows.at(r, j) = (j == c ? 5.0 : 0.0) + rng.next_normal() * 0.2;
            }
            ds.meta.push_back({"trace-" + std::to_string(r), 0, layer, {0, 1}});
        }
        acts[layer] = std::move(ds);
    }
    const char* words[3] = {"alpha compute", "beta verify", "gamma conclude"};
    for (std::size_t r = 0; r < rows; ++r) {
        texts.push_back(words[r % 3]);
    }

    OfflineJudge judge(texts);
    GridConfig cfg;
    cfg.layers = {1, 2};
    cfg.dict_sizes = {5, 10, 15};
    cfg.sae_config.k = 1;
    cfg.sae_config.batch_size = 32;
    cfg.sae_config.max_epochs = 30;
    cfg.seed = 3;
    cfg.workers = 1;
    const auto grid = grid_search(acts, texts, judge, cfg);
    CHECK(grid.cells.size() == 6);
    CHECK(grid.normalized_combined.size() == 6);

    // normalization spans [0, 1] over successful cells
    double lo = 2.0, hi = -2.0;
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        if (!grid.cells[i].failed) {
            lo = std::min(lo, grid.normalized_combined[i]);
            hi = std::max(hi, grid.normalized_combined[i]);
        }
    }
    if (!grid.degenerate_normalization) {
        CHECK(lo == doctest::Approx(0.0));
        CHECK(hi == doctest::Approx(1.0));
    }

    const auto svg = grid_heatmap_svg(grid);
    CHECK(svg.find("<svg") == 0);
    const auto csv = grid_heatmap_csv(grid);
    // header + 6 cells
    CHECK(split_lines(csv).size() == 7);

    // serialization round-trip
    const auto back = grid_from_json(grid_to_json(grid));
    CHECK(back.cells.size() == grid.cells.size());
    CHECK(back.normalized_combined == grid.normalized_combined);
}

TEST_CASE("remote judge parses recorded transcripts (replay golden)") {
    // fixture transcript with one cluster-description exchange
    const std::string replay_path =
        (std::filesystem::temp_directory_path() / "steerlab_judge_replay.jsonl").string();
    RemoteJudgeConfig record_cfg;
    record_cfg.describe_model = "judge-large";
    record_cfg.temperature = 0.0;

    // Build the exact request the judge would send, then record a canned
    // response for it.
    std::string prompt = prompts::kClusterDescription;
    auto replace_all = [](std::string& text, const std::string& pat, const std::string& value) {
        std::size_t pos = 0;
        while ((pos = text.find(pat, pos)) != std::string::npos) {
            text.replace(pos, pat.size(), value);
            pos += value.size();
        }
    };
    replace_all(prompt, "{top_exemplars}", "- Check step 1: 7 + 5 = 2, correct.");
    replace_all(prompt, "{random_exemplars}", "- Check step 2: 1 + 1 = 2, correct.");
    nlohmann::json request;
    request["model"] = "judge-large";
    request["temperature"] = 0.0;
    request["messages"] =
        nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    nlohmann::json response;
    response["choices"] = nlohmann::json::array(
        {{{"message",
           {{"role", "assistant"},
            {"content", "Title: Verification of intermediate results\nDescription: Sentences "
                        "that re-derive a step and confirm it."}}}}});
    nlohmann::json entry;
    entry["request"] = request;
    entry["response"] = response;
    write_file(replay_path, entry.dump() + "\n");

    RemoteJudgeConfig cfg = record_cfg;
    cfg.replay_path = replay_path;
    RemoteJudge judge(cfg);
    const auto desc = judge.describe_cluster(0, {"Check step 1: 7 + 5 = 2, correct."},
                                             {"Check step 2: 1 + 1 = 2, correct."});
    CHECK(desc.title == "Verification of intermediate results");
    CHECK(!desc.degraded);
    std::filesystem::remove(replay_path);
}

TEST_CASE("remote judge against a local chat-completions server") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        const std::string content = body.at("messages").at(0).at("content").get<std::string>();
        nlohmann::json reply;
        std::string answer;
        if (content.find("Answer with a single word") != std::string::npos) {
            answer = content.find("verify") != std::string::npos ? "YES" : "NO";
        } else if (content.find("single integer") != std::string::npos) {
            answer = "7";
        } else {
            answer = "Title: Scripted\nDescription: scripted reply.";
        }
        reply["choices"] = nlohmann::json::array(
            {{{"message", {{"role", "assistant"}, {"content", answer}}}}});
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteJudgeConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.max_retries = 0;
    RemoteJudge judge(cfg);
    Category cat = make_category(0, {"verify the result"});
    CHECK(*judge.classify(cat, "please verify this") == true);
    CHECK(*judge.rate_fit(cat, "anything") == 7);
    CHECK(*judge.rate_similarity(cat, cat) == 7);
    const auto desc = judge.describe_cluster(0, {"a"}, {"b"});
    CHECK(desc.title == "Scripted");

    server.stop();
    thread.join();
}

TEST_CASE("judge failures are skipped and logged, not fatal") {
    ScriptedJudge judge;
    int which = 0;
    judge.sim_fn = [&](const Category&, const Category&) { return (which++ % 2 == 0) ? 8 : 2; };
    judge.classify_fn = [](const Category&, const std::string&) { return true; };
    judge.fit_fn = [](const Category&, const std::string&) { return 5; };

    class FailingJudge : public ScriptedJudge {
    public:
        std::optional<int> rate_similarity(const Category& a, const Category& b) override {
            if (a.id == 0 && b.id == 1) {
                return std::nullopt;  // this pair fails
            }
            return 2;
        }
    };
    FailingJudge fj;
    const std::vector<Category> cats = {make_category(0, {"a"}), make_category(1, {"b"}),
                                        make_category(2, {"c"})};
    // pairs (0,1) fails; (0,2) and (1,2) rate 2 -> orthogonality 0.8 > 0.5
    CHECK(independence_score(fj, cats) == doctest::Approx(1.0));
}
