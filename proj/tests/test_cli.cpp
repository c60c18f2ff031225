#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "steerlab/cli/cli.hpp"
#include "steerlab/util/common.hpp"

using namespace steerlab;

namespace {

std::string temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("help exits cleanly") {
    CHECK(cli::run({"--help"}) == 0);
    CHECK(cli::run({"gen-corpus", "--help"}) == 0);
}

TEST_CASE("unknown subcommand fails") {
    CHECK(cli::run({"frobnicate"}) != 0);
}

TEST_CASE("gen-corpus writes corpora, tasks, vocab and a manifest") {
    const std::string out = temp_dir("steerlab_cli_gen");
    const int rc = cli::run({"gen-corpus", "--out", out, "--seed", "5", "--plain-count", "8",
                             "--thinking-count", "8", "--task-count", "4"});
    REQUIRE(rc == 0);
    for (const char* name : {"plain.jsonl", "thinking.jsonl", "tasks.jsonl", "vocab.json",
                             "manifest.json"}) {
        CHECK(std::filesystem::exists(std::filesystem::path(out) / name));
    }
    const auto manifest = nlohmann::json::parse(read_file(out + "/manifest.json"));
    CHECK(manifest.at("subcommand") == "gen-corpus");
    CHECK(manifest.at("seed") == 5);
    CHECK(manifest.at("config").at("plain_count") == 8);
    CHECK(manifest.contains("timestamp"));
    std::filesystem::remove_all(out);
}

TEST_CASE("gen-corpus is deterministic for a fixed seed") {
    const std::string a = temp_dir("steerlab_cli_gen_a");
    const std::string b = temp_dir("steerlab_cli_gen_b");
    const std::vector<std::string> args = {"--seed", "7", "--plain-count", "6",
                                           "--thinking-count", "6", "--task-count", "3"};
    std::vector<std::string> run_a = {"gen-corpus", "--out", a};
    std::vector<std::string> run_b = {"gen-corpus", "--out", b};
    run_a.insert(run_a.end(), args.begin(), args.end());
    run_b.insert(run_b.end(), args.begin(), args.end());
    REQUIRE(cli::run(run_a) == 0);
    REQUIRE(cli::run(run_b) == 0);
    for (const char* name : {"plain.jsonl", "thinking.jsonl", "tasks.jsonl", "vocab.json"}) {
        CHECK(read_file(a + "/" + name) == read_file(b + "/" + name));
    }
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST_CASE("train-model then capture then train-sae round-trips on a tiny corpus") {
    const std::string dir = temp_dir("steerlab_cli_pipeline");
    std::filesystem::create_directories(dir);
    REQUIRE(cli::run({"gen-corpus", "--out", dir + "/corpus", "--seed", "3", "--plain-count",
                      "6", "--thinking-count", "10", "--task-count", "3",
                      "--thinking-steps-max", "2"}) == 0);
    REQUIRE(cli::run({"train-model", "--corpus", dir + "/corpus/thinking.jsonl", "--vocab",
                      dir + "/corpus/vocab.json", "--out", dir + "/model.tfmw", "--steps", "6",
                      "--layers", "2", "--dim", "16", "--heads", "2", "--context", "160",
                      "--batch", "2", "--seed", "3"}) == 0);
    CHECK(std::filesystem::exists(dir + "/model.tfmw"));
    CHECK(std::filesystem::exists(dir + "/model.tfmw.manifest.json"));

    REQUIRE(cli::run({"capture", "--model", dir + "/model.tfmw", "--corpus",
                      dir + "/corpus/thinking.jsonl", "--vocab", dir + "/corpus/vocab.json",
                      "--layers", "1", "--out", dir + "/acts"}) == 0);
    CHECK(std::filesystem::exists(dir + "/acts/layer_1.actv"));
    CHECK(std::filesystem::exists(dir + "/acts/layer_1.jsonl"));

    REQUIRE(cli::run({"train-sae", "--activations", dir + "/acts/layer_1.actv", "--dict-size",
                      "5", "--k", "1", "--epochs", "5", "--batch", "16", "--out",
                      dir + "/sae.tksa", "--seed", "3"}) == 0);
    CHECK(std::filesystem::exists(dir + "/sae.tksa"));

    // determinism of the sae checkpoint under a rerun
    REQUIRE(cli::run({"train-sae", "--activations", dir + "/acts/layer_1.actv", "--dict-size",
                      "5", "--k", "1", "--epochs", "5", "--batch", "16", "--out",
                      dir + "/sae2.tksa", "--seed", "3"}) == 0);
    CHECK(read_file(dir + "/sae.tksa") == read_file(dir + "/sae2.tksa"));

    std::filesystem::remove_all(dir);
}

TEST_CASE("missing inputs produce a nonzero exit") {
    CHECK(cli::run({"train-model", "--corpus", "/nonexistent.jsonl", "--vocab",
                    "/nonexistent.json", "--steps", "1"}) != 0);
    CHECK(cli::run({"capture", "--model", "/missing.tfmw", "--corpus", "/missing.jsonl",
                    "--vocab", "/missing.json"}) != 0);
}
