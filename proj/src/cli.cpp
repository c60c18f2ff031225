#include "steerlab/cli/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "steerlab/bench/bench.hpp"
#include "steerlab/corpus/generator.hpp"
#include "steerlab/hybrid/hybrid.hpp"
#include "steerlab/model/train.hpp"
#include "steerlab/sae/activations.hpp"
#include "steerlab/steering/steering.hpp"
#include "steerlab/taxonomy/grid.hpp"
#include "steerlab/taxonomy/offline_judge.hpp"
#include "steerlab/taxonomy/remote_judge.hpp"
#include "steerlab/util/common.hpp"

namespace steerlab::cli {

using nlohmann::json;

namespace {

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return std::string(buf);
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) {
            comma = csv.size();
        }
        out.push_back(static_cast<std::size_t>(std::stoul(csv.substr(pos, comma - pos))));
        pos = comma + 1;
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) {
            comma = csv.size();
        }
        out.push_back(std::stod(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) {
            comma = csv.size();
        }
        out.push_back(std::stoi(csv.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    return out;
}

void finish_manifest(RunManifest& manifest, const std::string& path) {
    manifest.timestamp = timestamp_now();
    write_manifest(manifest, path);
}

corpus::Tokenizer load_vocab(const std::string& path) {
    return corpus::Tokenizer::load(path);
}

struct CorpusSequences {
    std::vector<std::vector<corpus::TokenId>> tokens;
    std::vector<std::size_t> trace_starts;  // first trace-token index per sequence
};

CorpusSequences corpus_sequences(const std::vector<corpus::TraceRecord>& records,
                                 const corpus::Tokenizer& tok) {
    CorpusSequences out;
    out.tokens.reserve(records.size());
    for (const auto& r : records) {
        auto ids = tok.tokenize(r.full_text());
        ids.push_back(tok.eos_id());
        out.trace_starts.push_back(tok.tokenize(r.prompt).size());
        out.tokens.push_back(std::move(ids));
    }
    return out;
}

// Sentences labeled by the SAE over a captured activation dataset, mapped
// back onto their trace records.
std::vector<steering::LabeledSentenceRef> label_dataset(
    const sae::SaeParams& params, const sae::ActivationDataset& data,
    const std::vector<corpus::TraceRecord>& records) {
    std::map<std::string, const corpus::TraceRecord*> by_id;
    for (const auto& r : records) {
        by_id[r.id] = &r;
    }
    std::vector<steering::LabeledSentenceRef> out;
    std::vector<double> x(data.dim);
    for (std::size_t r = 0; r < data.rows.rows; ++r) {
        std::copy(data.rows.row(r), data.rows.row(r) + data.dim, x.begin());
        const auto label = sae::label_sentence(params, x);
        if (!label) {
            continue;
        }
        auto it = by_id.find(data.meta[r].trace_id);
        if (it == by_id.end()) {
            throw std::runtime_error("activation sidecar references unknown trace " +
                                     data.meta[r].trace_id);
        }
        out.push_back({it->second, data.meta[r].sentence_index, label->category,
                       label->activation});
    }
    return out;
}

struct ProfileDefaults {
    std::size_t stage1 = 400;
    std::size_t stage2 = 100;
    std::vector<double> coefficients{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<int> windows{0};
    std::size_t sae_batch = 512;
    std::size_t sae_epochs = 300;
};

ProfileDefaults profile_defaults(const std::string& profile) {
    ProfileDefaults d;
    if (profile == "paper-parity") {
        d.stage1 = 8192;
        d.stage2 = 2048;
        d.coefficients = hybrid::full_sweep_coefficients();
        d.windows = hybrid::full_sweep_windows();
    } else if (profile != "desk") {
        throw CLI::ValidationError("--profile must be desk or paper-parity");
    }
    return d;
}

}  // namespace

std::string RunManifest::to_json() const {
    json j;
    j["subcommand"] = subcommand;
    j["config"] = json::parse(config_json);
    j["inputs"] = input_hashes;
    j["seed"] = seed;
    j["tool_version"] = tool_version;
    j["timestamp"] = timestamp;
    return j.dump(2);
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
    write_file(path, manifest.to_json() + "\n");
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"toy-scale reasoning-steering pipeline"};
    app.require_subcommand(1);
    app.set_config("--config");

    std::string profile = "desk";
    app.add_option("--profile", profile, "desk or paper-parity defaults")
        ->capture_default_str();

    // ---- gen-corpus ----
    auto* gen = app.add_subcommand("gen-corpus",
                                   "generate plain/thinking corpora, tasks and the vocabulary");
    struct {
        std::string out = "out/corpus";
        std::uint64_t seed = 7;
        std::size_t plain_count = 1200;
        std::size_t thinking_count = 1200;
        std::size_t task_count = 200;
        double error_rate = 0.3;
        double verify_rate = 0.5;
        double early_stop_rate = 0.75;
        std::size_t plain_steps_min = 1, plain_steps_max = 4;
        std::size_t thinking_steps_min = 1, thinking_steps_max = 4;
        std::size_t task_steps_min = 2, task_steps_max = 4;
    } gc;
    gen->add_option("--out", gc.out, "output directory")->capture_default_str();
    gen->add_option("--seed", gc.seed)->capture_default_str();
    gen->add_option("--plain-count", gc.plain_count)->capture_default_str();
    gen->add_option("--thinking-count", gc.thinking_count)->capture_default_str();
    gen->add_option("--task-count", gc.task_count)->capture_default_str();
    gen->add_option("--error-rate", gc.error_rate)->capture_default_str();
    gen->add_option("--verify-rate", gc.verify_rate)->capture_default_str();
    gen->add_option("--early-stop-rate", gc.early_stop_rate)->capture_default_str();
    gen->add_option("--plain-steps-min", gc.plain_steps_min)->capture_default_str();
    gen->add_option("--plain-steps-max", gc.plain_steps_max)->capture_default_str();
    gen->add_option("--thinking-steps-min", gc.thinking_steps_min)->capture_default_str();
    gen->add_option("--thinking-steps-max", gc.thinking_steps_max)->capture_default_str();
    gen->add_option("--task-steps-min", gc.task_steps_min)->capture_default_str();
    gen->add_option("--task-steps-max", gc.task_steps_max)->capture_default_str();

    // ---- train-model ----
    auto* tm = app.add_subcommand("train-model", "train or fine-tune a toy transformer");
    struct {
        std::vector<std::string> corpora;
        std::string vocab;
        std::string out = "out/model.tfmw";
        std::string init_from;
        std::size_t steps = 900;
        double lr = 1e-3;
        std::size_t batch = 8;
        std::uint64_t seed = 7;
        std::size_t layers = 6;
        std::size_t dim = 48;
        std::size_t heads = 4;
        std::size_t context = 256;
        std::size_t log_every = 0;
        std::string loss_region = "trace";
    } tmc;
    tm->add_option("--corpus", tmc.corpora, "corpus JSONL (repeatable)")->required();
    tm->add_option("--vocab", tmc.vocab)->required();
    tm->add_option("--out", tmc.out)->capture_default_str();
    tm->add_option("--init-from", tmc.init_from, "checkpoint to fine-tune from");
    tm->add_option("--steps", tmc.steps)->capture_default_str();
    tm->add_option("--lr", tmc.lr)->capture_default_str();
    tm->add_option("--batch", tmc.batch)->capture_default_str();
    tm->add_option("--seed", tmc.seed)->capture_default_str();
    tm->add_option("--layers", tmc.layers)->capture_default_str();
    tm->add_option("--dim", tmc.dim)->capture_default_str();
    tm->add_option("--heads", tmc.heads)->capture_default_str();
    tm->add_option("--context", tmc.context)->capture_default_str();
    tm->add_option("--log-every", tmc.log_every)->capture_default_str();
    tm->add_option("--loss", tmc.loss_region, "trace (skip prompt targets) or full")
        ->capture_default_str();

    // ---- capture ----
    auto* cap = app.add_subcommand("capture", "capture sentence-level residual activations");
    struct {
        std::string model, corpus_path, vocab;
        std::string layers = "1,2,3,4";
        std::string out = "out/activations";
    } cc;
    cap->add_option("--model", cc.model)->required();
    cap->add_option("--corpus", cc.corpus_path)->required();
    cap->add_option("--vocab", cc.vocab)->required();
    cap->add_option("--layers", cc.layers)->capture_default_str();
    cap->add_option("--out", cc.out)->capture_default_str();

    // ---- train-sae ----
    auto* ts = app.add_subcommand("train-sae", "train a Top-K sparse autoencoder");
    struct {
        std::string activations, sidecar;
        std::string out = "out/sae.tksa";
        std::size_t dict_size = 5;
        std::size_t k = 3;
        std::size_t batch = 512;
        std::size_t epochs = 300;
        std::size_t patience = 10;
        std::uint64_t seed = 7;
    } tsc;
    ts->add_option("--activations", tsc.activations)->required();
    ts->add_option("--sidecar", tsc.sidecar, "defaults to activations path with .jsonl");
    ts->add_option("--out", tsc.out)->capture_default_str();
    ts->add_option("--dict-size", tsc.dict_size)->capture_default_str();
    ts->add_option("--k", tsc.k)->capture_default_str();
    ts->add_option("--batch", tsc.batch)->capture_default_str();
    ts->add_option("--epochs", tsc.epochs)->capture_default_str();
    ts->add_option("--patience", tsc.patience)->capture_default_str();
    ts->add_option("--seed", tsc.seed)->capture_default_str();

    // ---- grid-search ----
    auto* gs = app.add_subcommand("grid-search",
                                  "train and score SAEs over layers x dictionary sizes");
    struct {
        std::string activations_dir, corpus_path;
        std::string layers = "1,2,3,4";
        std::string dict_sizes = "5,10,15";
        std::string judge = "offline";
        std::string judge_url, transcript, replay;
        std::string out = "out/grid";
        std::size_t k = 3;
        std::uint64_t seed = 7;
        std::size_t workers = 0;
        std::size_t title_repetitions = 1;
    } gsc;
    gs->add_option("--activations-dir", gsc.activations_dir)->required();
    gs->add_option("--corpus", gsc.corpus_path)->required();
    gs->add_option("--layers", gsc.layers)->capture_default_str();
    gs->add_option("--dict-sizes", gsc.dict_sizes)->capture_default_str();
    gs->add_option("--judge", gsc.judge, "offline or remote")->capture_default_str();
    gs->add_option("--judge-url", gsc.judge_url);
    gs->add_option("--transcript", gsc.transcript, "record judge transcript JSONL");
    gs->add_option("--replay", gsc.replay, "serve judge replies from a transcript");
    gs->add_option("--out", gsc.out)->capture_default_str();
    gs->add_option("--k", gsc.k)->capture_default_str();
    gs->add_option("--seed", gsc.seed)->capture_default_str();
    gs->add_option("--workers", gsc.workers)->capture_default_str();
    gs->add_option("--title-repetitions", gsc.title_repetitions)->capture_default_str();

    // ---- describe ----
    auto* de = app.add_subcommand("describe", "score one SAE taxonomy and emit its categories");
    struct {
        std::string sae, activations, sidecar, corpus_path;
        std::string judge = "offline";
        std::string judge_url, transcript, replay;
        std::string out = "out/taxonomy.json";
        std::uint64_t seed = 7;
    } dc;
    de->add_option("--sae", dc.sae)->required();
    de->add_option("--activations", dc.activations)->required();
    de->add_option("--sidecar", dc.sidecar);
    de->add_option("--corpus", dc.corpus_path)->required();
    de->add_option("--judge", dc.judge)->capture_default_str();
    de->add_option("--judge-url", dc.judge_url);
    de->add_option("--transcript", dc.transcript);
    de->add_option("--replay", dc.replay);
    de->add_option("--out", dc.out)->capture_default_str();
    de->add_option("--seed", dc.seed)->capture_default_str();

    // ---- train-steering ----
    auto* st = app.add_subcommand("train-steering",
                                  "optimize per-category steering vectors and the bias vector");
    struct {
        std::string base, corpus_path, vocab, sae, activations, sidecar;
        std::string out = "out/vectors";
        std::int64_t layer = -1;  // default: 37% of depth
        std::size_t bias_rollouts = 24;
        std::size_t max_iters = 50;
        double lr = 1e-2;
        std::size_t minibatch = 6;
        double min_delta = 0.01;
        std::size_t patience = 5;
        std::size_t stage1 = 0, stage2 = 0;  // 0 = profile default
        std::uint64_t seed = 7;
    } sc;
    st->add_option("--base", sc.base)->required();
    st->add_option("--corpus", sc.corpus_path, "thinking corpus JSONL")->required();
    st->add_option("--vocab", sc.vocab)->required();
    st->add_option("--sae", sc.sae)->required();
    st->add_option("--activations", sc.activations, "classifier-layer activations")->required();
    st->add_option("--sidecar", sc.sidecar);
    st->add_option("--out", sc.out)->capture_default_str();
    st->add_option("--layer", sc.layer, "steering layer; -1 = floor(0.37 * layers)")
        ->capture_default_str();
    st->add_option("--bias-rollouts", sc.bias_rollouts)->capture_default_str();
    st->add_option("--max-iters", sc.max_iters)->capture_default_str();
    st->add_option("--lr", sc.lr)->capture_default_str();
    st->add_option("--minibatch", sc.minibatch)->capture_default_str();
    st->add_option("--min-delta", sc.min_delta)->capture_default_str();
    st->add_option("--patience", sc.patience)->capture_default_str();
    st->add_option("--stage1", sc.stage1, "0 = profile default")->capture_default_str();
    st->add_option("--stage2", sc.stage2, "0 = profile default")->capture_default_str();
    st->add_option("--seed", sc.seed)->capture_default_str();

    // ---- run-hybrid ----
    auto* rh = app.add_subcommand("run-hybrid", "hybrid generation over a task file");
    struct {
        std::string base, thinking, sae, bundle, vocab, tasks;
        std::string out = "out/hybrid";
        std::string coefficients, windows;
        std::int64_t steering_layer = -1;
        std::int64_t classifier_layer = -1;
        std::size_t max_new = 128;
        std::string ablation = "none";
        std::uint64_t seed = 7;
        std::size_t workers = 0;
    } rhc;
    rh->add_option("--base", rhc.base)->required();
    rh->add_option("--thinking", rhc.thinking)->required();
    rh->add_option("--sae", rhc.sae)->required();
    rh->add_option("--bundle", rhc.bundle)->required();
    rh->add_option("--vocab", rhc.vocab)->required();
    rh->add_option("--tasks", rhc.tasks)->required();
    rh->add_option("--out", rhc.out)->capture_default_str();
    rh->add_option("--coefficients", rhc.coefficients, "csv; default from profile");
    rh->add_option("--windows", rhc.windows, "csv; default from profile");
    rh->add_option("--steering-layer", rhc.steering_layer, "-1 = bundle layer")
        ->capture_default_str();
    rh->add_option("--classifier-layer", rhc.classifier_layer, "-1 = activations layer")
        ->capture_default_str();
    rh->add_option("--max-new", rhc.max_new)->capture_default_str();
    rh->add_option("--ablation", rhc.ablation, "none|only-bias|random-firing|random-vectors")
        ->capture_default_str();
    rh->add_option("--seed", rhc.seed)->capture_default_str();
    rh->add_option("--workers", rhc.workers)->capture_default_str();

    // ---- ablate ----
    auto* ab = app.add_subcommand("ablate", "run-hybrid across all ablation modes");
    struct {
        std::string base, thinking, sae, bundle, vocab, tasks;
        std::string out = "out/ablations";
        std::string coefficients, windows;
        std::int64_t steering_layer = -1;
        std::int64_t classifier_layer = -1;
        std::size_t max_new = 128;
        std::uint64_t seed = 7;
        std::size_t workers = 0;
    } abc;
    ab->add_option("--base", abc.base)->required();
    ab->add_option("--thinking", abc.thinking)->required();
    ab->add_option("--sae", abc.sae)->required();
    ab->add_option("--bundle", abc.bundle)->required();
    ab->add_option("--vocab", abc.vocab)->required();
    ab->add_option("--tasks", abc.tasks)->required();
    ab->add_option("--out", abc.out)->capture_default_str();
    ab->add_option("--coefficients", abc.coefficients);
    ab->add_option("--windows", abc.windows);
    ab->add_option("--steering-layer", abc.steering_layer)->capture_default_str();
    ab->add_option("--classifier-layer", abc.classifier_layer)->capture_default_str();
    ab->add_option("--max-new", abc.max_new)->capture_default_str();
    ab->add_option("--seed", abc.seed)->capture_default_str();
    ab->add_option("--workers", abc.workers)->capture_default_str();

    // ---- bench ----
    auto* be = app.add_subcommand("bench", "accuracy comparison of base/hybrid/thinking");
    struct {
        std::string base, thinking, vocab, tasks;
        std::string sae, bundle;
        std::string out = "out/bench";
        std::string coefficients, windows;
        std::int64_t steering_layer = -1;
        std::int64_t classifier_layer = -1;
        std::size_t max_new = 128;
        bool ablations = false;
        std::uint64_t seed = 7;
        std::size_t workers = 0;
    } bc;
    be->add_option("--base", bc.base)->required();
    be->add_option("--thinking", bc.thinking)->required();
    be->add_option("--vocab", bc.vocab)->required();
    be->add_option("--tasks", bc.tasks)->required();
    be->add_option("--sae", bc.sae);
    be->add_option("--bundle", bc.bundle);
    be->add_option("--out", bc.out)->capture_default_str();
    be->add_option("--coefficients", bc.coefficients);
    be->add_option("--windows", bc.windows);
    be->add_option("--steering-layer", bc.steering_layer)->capture_default_str();
    be->add_option("--classifier-layer", bc.classifier_layer)->capture_default_str();
    be->add_option("--max-new", bc.max_new)->capture_default_str();
    be->add_flag("--ablations", bc.ablations, "also run the three ablation modes");
    be->add_option("--seed", bc.seed)->capture_default_str();
    be->add_option("--workers", bc.workers)->capture_default_str();

    // ---- report ----
    auto* re = app.add_subcommand("report", "render a bench result into report files");
    struct {
        std::string bench;
        std::string grid;
        std::string out = "out/report";
    } rc;
    re->add_option("--bench", rc.bench, "bench report.json")->required();
    re->add_option("--grid", rc.grid, "grid.json to embed as heatmap");
    re->add_option("--out", rc.out)->capture_default_str();

    std::vector<const char*> argv;
    argv.push_back("steerlab");
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const ProfileDefaults prof = profile_defaults(profile);

        if (gen->parsed()) {
            std::filesystem::create_directories(gc.out);
            corpus::SyntheticTaskSpec plain;
            plain.style = corpus::TraceStyle::kPlain;
            plain.seed = gc.seed;
            plain.step_count_range = {static_cast<int>(gc.plain_steps_min),
                                      static_cast<int>(gc.plain_steps_max)};
            plain.early_stop_rate = gc.early_stop_rate;
            plain.error_injection_rate = 0.0;
            corpus::SyntheticTaskSpec think = plain;
            think.style = corpus::TraceStyle::kThinking;
            think.seed = gc.seed + 1;
            think.step_count_range = {static_cast<int>(gc.thinking_steps_min),
                                      static_cast<int>(gc.thinking_steps_max)};
            think.error_injection_rate = gc.error_rate;
            think.verify_rate = gc.verify_rate;
            corpus::SyntheticTaskSpec tasks = think;
            tasks.seed = gc.seed + 2;
            tasks.step_count_range = {static_cast<int>(gc.task_steps_min),
                                      static_cast<int>(gc.task_steps_max)};

            const auto plain_recs = corpus::gen_synthetic_traces(plain, gc.plain_count);
            const auto think_recs = corpus::gen_synthetic_traces(think, gc.thinking_count);
            const auto task_list = corpus::gen_synthetic_tasks(tasks, gc.task_count);

            corpus::save_corpus(plain_recs, gc.out + "/plain.jsonl");
            corpus::save_corpus(think_recs, gc.out + "/thinking.jsonl");
            corpus::save_tasks(task_list, gc.out + "/tasks.jsonl");

            std::vector<std::string> texts = corpus::domain_coverage_texts(plain.modulus);
            for (const auto& r : plain_recs) {
                texts.push_back(r.full_text());
            }
            for (const auto& r : think_recs) {
                texts.push_back(r.full_text());
            }
            for (const auto& t : task_list) {
                texts.push_back(corpus::build_prompt(t.question));
            }
            const auto tok = corpus::Tokenizer::build(texts);
            tok.save(gc.out + "/vocab.json");

            RunManifest m;
            m.subcommand = "gen-corpus";
            m.seed = gc.seed;
            json cfg;
            cfg["out"] = gc.out;
            cfg["seed"] = gc.seed;
            cfg["plain_count"] = gc.plain_count;
            cfg["thinking_count"] = gc.thinking_count;
            cfg["task_count"] = gc.task_count;
            cfg["error_rate"] = gc.error_rate;
            cfg["verify_rate"] = gc.verify_rate;
            cfg["early_stop_rate"] = gc.early_stop_rate;
            cfg["plain_steps"] = json::array({gc.plain_steps_min, gc.plain_steps_max});
            cfg["thinking_steps"] = json::array({gc.thinking_steps_min, gc.thinking_steps_max});
            cfg["task_steps"] = json::array({gc.task_steps_min, gc.task_steps_max});
            cfg["profile"] = profile;
            m.config_json = cfg.dump();
            finish_manifest(m, gc.out + "/manifest.json");
            std::printf("gen-corpus: %zu plain, %zu thinking, %zu tasks, vocab %zu -> %s\n",
                        plain_recs.size(), think_recs.size(), task_list.size(), tok.vocab_size(),
                        gc.out.c_str());
            return 0;
        }

        if (tm->parsed()) {
            const auto tok = load_vocab(tmc.vocab);
            std::vector<corpus::TraceRecord> records;
            RunManifest m;
            m.subcommand = "train-model";
            m.seed = tmc.seed;
            for (const auto& path : tmc.corpora) {
                auto part = corpus::load_corpus(path);
                records.insert(records.end(), part.begin(), part.end());
                m.input_hashes[path] = hex64(hash_file(path));
            }
            m.input_hashes[tmc.vocab] = hex64(hash_file(tmc.vocab));
            const auto seqs = corpus_sequences(records, tok);
            if (tmc.loss_region != "trace" && tmc.loss_region != "full") {
                throw CLI::ValidationError("--loss must be trace or full");
            }

            model::ModelWeights weights = [&] {
                if (!tmc.init_from.empty()) {
                    m.input_hashes[tmc.init_from] = hex64(hash_file(tmc.init_from));
                    return model::load_checkpoint(tmc.init_from);
                }
                model::ModelConfig cfg;
                cfg.layer_count = tmc.layers;
                cfg.model_dim = tmc.dim;
                cfg.head_count = tmc.heads;
                cfg.context_length = tmc.context;
                cfg.vocab_size = tok.vocab_size();
                cfg.seed = tmc.seed;
                return model::ModelWeights::init(cfg);
            }();

            model::TrainLmConfig tcfg;
            tcfg.steps = tmc.steps;
            tcfg.lr = tmc.lr;
            tcfg.batch_size = tmc.batch;
            tcfg.seed = tmc.seed;
            tcfg.log_every = tmc.log_every;
            const auto trained = model::train_lm(
                weights, seqs.tokens, tcfg,
                tmc.loss_region == "trace" ? &seqs.trace_starts : nullptr);
            std::filesystem::create_directories(
                std::filesystem::path(tmc.out).parent_path().string().empty()
                    ? "."
                    : std::filesystem::path(tmc.out).parent_path().string());
            model::save_checkpoint(weights, tmc.out);

            json cfg;
            cfg["corpora"] = tmc.corpora;
            cfg["vocab"] = tmc.vocab;
            cfg["out"] = tmc.out;
            cfg["init_from"] = tmc.init_from;
            cfg["steps"] = tmc.steps;
            cfg["lr"] = tmc.lr;
            cfg["batch"] = tmc.batch;
            cfg["seed"] = tmc.seed;
            cfg["layers"] = tmc.layers;
            cfg["dim"] = tmc.dim;
            cfg["heads"] = tmc.heads;
            cfg["context"] = tmc.context;
            cfg["loss"] = tmc.loss_region;
            cfg["final_loss"] =
                trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back();
            m.config_json = cfg.dump();
            finish_manifest(m, tmc.out + ".manifest.json");
            std::printf("train-model: %zu steps, final loss %.4f -> %s\n", tmc.steps,
                        trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back(),
                        tmc.out.c_str());
            return 0;
        }

        if (cap->parsed()) {
            const auto tok = load_vocab(cc.vocab);
            const auto records = corpus::load_corpus(cc.corpus_path);
            const auto weights = model::load_checkpoint(cc.model);
            const auto layers = parse_size_list(cc.layers);
            std::filesystem::create_directories(cc.out);
            const auto datasets = sae::capture_sentence_activations(weights, tok, records, layers);
            for (const auto& [layer, ds] : datasets) {
                const std::string base = cc.out + "/layer_" + std::to_string(layer);
                sae::save_activations(ds, base + ".actv", base + ".jsonl");
            }
            RunManifest m;
            m.subcommand = "capture";
            m.seed = 0;
            m.input_hashes[cc.model] = hex64(hash_file(cc.model));
            m.input_hashes[cc.corpus_path] = hex64(hash_file(cc.corpus_path));
            m.input_hashes[cc.vocab] = hex64(hash_file(cc.vocab));
            json cfg;
            cfg["model"] = cc.model;
            cfg["corpus"] = cc.corpus_path;
            cfg["vocab"] = cc.vocab;
            cfg["layers"] = layers;
            cfg["out"] = cc.out;
            m.config_json = cfg.dump();
            finish_manifest(m, cc.out + "/manifest.json");
            std::printf("capture: %zu layers x %zu sentences -> %s\n", datasets.size(),
                        datasets.empty() ? 0 : datasets.begin()->second.rows.rows,
                        cc.out.c_str());
            return 0;
        }

        if (ts->parsed()) {
            const std::string sidecar =
                tsc.sidecar.empty()
                    ? tsc.activations.substr(0, tsc.activations.find_last_of('.')) + ".jsonl"
                    : tsc.sidecar;
            const auto ds = sae::load_activations(tsc.activations, sidecar);
            sae::SaeTrainConfig cfg;
            cfg.k = tsc.k;
            cfg.batch_size = tsc.batch;
            cfg.max_epochs = tsc.epochs;
            cfg.patience = tsc.patience;
            cfg.seed = tsc.seed;
            const auto result = sae::train_sae(ds.rows, tsc.dict_size, cfg);
            sae::save_sae(result.params, tsc.out);
            RunManifest m;
            m.subcommand = "train-sae";
            m.seed = tsc.seed;
            m.input_hashes[tsc.activations] = hex64(hash_file(tsc.activations));
            m.input_hashes[sidecar] = hex64(hash_file(sidecar));
            json cfg_json;
            cfg_json["activations"] = tsc.activations;
            cfg_json["sidecar"] = sidecar;
            cfg_json["out"] = tsc.out;
            cfg_json["dict_size"] = tsc.dict_size;
            cfg_json["k"] = tsc.k;
            cfg_json["batch"] = std::min<std::size_t>(tsc.batch, ds.rows.rows);
            cfg_json["requested_batch"] = tsc.batch;
            cfg_json["epochs"] = tsc.epochs;
            cfg_json["patience"] = tsc.patience;
            cfg_json["seed"] = tsc.seed;
            cfg_json["stop_epoch"] = result.stop_epoch;
            cfg_json["lr"] = sae::learning_rate_for_dict_size(tsc.dict_size);
            m.config_json = cfg_json.dump();
            finish_manifest(m, tsc.out + ".manifest.json");
            std::printf("train-sae: n=%zu k=%zu stopped at epoch %zu -> %s\n", tsc.dict_size,
                        tsc.k, result.stop_epoch, tsc.out.c_str());
            return 0;
        }

        auto make_judge = [&](const std::string& kind, const std::string& url,
                              const std::string& transcript, const std::string& replay,
                              const std::vector<std::string>& background)
            -> std::unique_ptr<taxonomy::Judge> {
            if (kind == "offline") {
                return std::make_unique<taxonomy::OfflineJudge>(background);
            }
            if (kind == "remote") {
                taxonomy::RemoteJudgeConfig rc2;
                if (!url.empty()) {
                    rc2.base_url = url;
                }
                rc2.transcript_path = transcript;
                rc2.replay_path = replay;
                return std::make_unique<taxonomy::RemoteJudge>(rc2);
            }
            throw CLI::ValidationError("--judge must be offline or remote");
        };

        if (gs->parsed()) {
            const auto records = corpus::load_corpus(gsc.corpus_path);
            const auto layers = parse_size_list(gsc.layers);
            std::map<std::size_t, sae::ActivationDataset> acts;
            RunManifest m;
            m.subcommand = "grid-search";
            m.seed = gsc.seed;
            for (std::size_t layer : layers) {
                const std::string base =
                    gsc.activations_dir + "/layer_" + std::to_string(layer);
                acts[layer] = sae::load_activations(base + ".actv", base + ".jsonl");
                m.input_hashes[base + ".actv"] = hex64(hash_file(base + ".actv"));
            }
            m.input_hashes[gsc.corpus_path] = hex64(hash_file(gsc.corpus_path));
            const auto texts = sae::dataset_sentence_texts(acts.begin()->second, records);
            const auto judge = make_judge(gsc.judge, gsc.judge_url, gsc.transcript, gsc.replay,
                                          texts);
            taxonomy::GridConfig gcfg;
            gcfg.layers = layers;
            gcfg.dict_sizes = parse_size_list(gsc.dict_sizes);
            gcfg.sae_config.k = gsc.k;
            gcfg.seed = gsc.seed;
            gcfg.workers = gsc.workers;
            gcfg.title_repetitions = gsc.title_repetitions;
            const auto grid = taxonomy::grid_search(acts, texts, *judge, gcfg);
            std::filesystem::create_directories(gsc.out);
            write_file(gsc.out + "/grid.json", taxonomy::grid_to_json(grid) + "\n");
            write_file(gsc.out + "/heatmap.svg", taxonomy::grid_heatmap_svg(grid));
            write_file(gsc.out + "/heatmap.csv", taxonomy::grid_heatmap_csv(grid));
            json cfg;
            cfg["activations_dir"] = gsc.activations_dir;
            cfg["corpus"] = gsc.corpus_path;
            cfg["layers"] = gcfg.layers;
            cfg["dict_sizes"] = gcfg.dict_sizes;
            cfg["judge"] = gsc.judge;
            cfg["k"] = gsc.k;
            cfg["seed"] = gsc.seed;
            cfg["title_repetitions"] = gsc.title_repetitions;
            cfg["out"] = gsc.out;
            m.config_json = cfg.dump();
            finish_manifest(m, gsc.out + "/manifest.json");
            std::printf("grid-search: %zu x %zu cells -> %s\n", gcfg.layers.size(),
                        gcfg.dict_sizes.size(), gsc.out.c_str());
            return 0;
        }

        if (de->parsed()) {
            const std::string sidecar =
                dc.sidecar.empty()
                    ? dc.activations.substr(0, dc.activations.find_last_of('.')) + ".jsonl"
                    : dc.sidecar;
            const auto ds = sae::load_activations(dc.activations, sidecar);
            const auto records = corpus::load_corpus(dc.corpus_path);
            const auto params = sae::load_sae(dc.sae);
            const auto texts = sae::dataset_sentence_texts(ds, records);
            const auto judge = make_judge(dc.judge, dc.judge_url, dc.transcript, dc.replay,
                                          texts);
            taxonomy::GridConfig gcfg;
            gcfg.seed = dc.seed;
            const auto report = taxonomy::evaluate_taxonomy(params, ds, texts, *judge, gcfg,
                                                            ds.meta.empty() ? 0
                                                                            : ds.meta[0].layer);
            write_file(dc.out, taxonomy::report_to_json(report) + "\n");
            RunManifest m;
            m.subcommand = "describe";
            m.seed = dc.seed;
            m.input_hashes[dc.sae] = hex64(hash_file(dc.sae));
            m.input_hashes[dc.activations] = hex64(hash_file(dc.activations));
            json cfg;
            cfg["sae"] = dc.sae;
            cfg["activations"] = dc.activations;
            cfg["corpus"] = dc.corpus_path;
            cfg["judge"] = dc.judge;
            cfg["seed"] = dc.seed;
            cfg["out"] = dc.out;
            m.config_json = cfg.dump();
            finish_manifest(m, dc.out + ".manifest.json");
            std::printf("describe: %zu categories, combined %.3f -> %s\n",
                        report.categories.size(), report.combined, dc.out.c_str());
            return 0;
        }

        if (st->parsed()) {
            const auto tok = load_vocab(sc.vocab);
            const auto records = corpus::load_corpus(sc.corpus_path);
            const auto base = model::load_checkpoint(sc.base);
            const auto params = sae::load_sae(sc.sae);
            const std::string sidecar =
                sc.sidecar.empty()
                    ? sc.activations.substr(0, sc.activations.find_last_of('.')) + ".jsonl"
                    : sc.sidecar;
            const auto ds = sae::load_activations(sc.activations, sidecar);
            const std::size_t layer =
                sc.layer >= 0 ? static_cast<std::size_t>(sc.layer)
                              : static_cast<std::size_t>(0.37 * static_cast<double>(
                                                                    base.config.layer_count));

            steering::SteeringTrainConfig cfg;
            cfg.max_iters = sc.max_iters;
            cfg.lr = sc.lr;
            cfg.minibatch = sc.minibatch;
            cfg.min_delta = sc.min_delta;
            cfg.patience = sc.patience;
            cfg.stage1_count = sc.stage1 == 0 ? prof.stage1 : sc.stage1;
            cfg.stage2_count = sc.stage2 == 0 ? prof.stage2 : sc.stage2;
            cfg.seed = sc.seed;

            json cfg_json;
            cfg_json["base"] = sc.base;
            cfg_json["corpus"] = sc.corpus_path;
            cfg_json["sae"] = sc.sae;
            cfg_json["layer"] = layer;
            cfg_json["bias_rollouts"] = sc.bias_rollouts;
            cfg_json["max_iters"] = cfg.max_iters;
            cfg_json["lr"] = cfg.lr;
            cfg_json["minibatch"] = cfg.minibatch;
            cfg_json["min_delta"] = cfg.min_delta;
            cfg_json["patience"] = cfg.patience;
            cfg_json["stage1"] = cfg.stage1_count;
            cfg_json["stage2"] = cfg.stage2_count;
            cfg_json["seed"] = cfg.seed;
            const std::string config_hash = hex64(fnv1a64(cfg_json.dump()));

            // Bias first, frozen for the category vectors.
            numcore::SeededRng bias_rng = numcore::SeededRng::derive(sc.seed, "bias-rollouts");
            std::vector<corpus::TraceRecord> rollouts;
            const auto perm = bias_rng.permutation(records.size());
            for (std::size_t i = 0; i < std::min(sc.bias_rollouts, records.size()); ++i) {
                rollouts.push_back(records[perm[i]]);
            }
            steering::VectorBundle bundle;
            if (!ds.meta.empty()) {
                bundle.classifier_layer = ds.meta[0].layer;
            }
            steering::SteeringTrainConfig bias_cfg = cfg;
            bias_cfg.seed = cfg.seed ^ 0xb1a5ull;
            bundle.bias = steering::train_bias_vector(base, rollouts, tok, layer, bias_cfg);

            const auto labeled = label_dataset(params, ds, records);
            for (std::size_t cat = 0; cat < params.dict_size; ++cat) {
                bool has_any = false;
                for (const auto& l : labeled) {
                    if (l.category == cat) {
                        has_any = true;
                        break;
                    }
                }
                if (!has_any) {
                    std::fprintf(stderr, "[train-steering] category %zu has no sentences\n", cat);
                    continue;
                }
                steering::SteeringTrainConfig cat_cfg = cfg;
                cat_cfg.seed = cfg.seed + cat + 1;
                const auto examples = steering::select_examples(labeled, cat, base, tok, cat_cfg);
                bundle.categories.push_back(steering::train_steering_vector(
                    base, examples, layer, &*bundle.bias, cat_cfg, std::to_string(cat),
                    static_cast<int>(cat)));
            }
            steering::save_bundle(bundle, sc.out, config_hash);

            RunManifest m;
            m.subcommand = "train-steering";
            m.seed = sc.seed;
            m.input_hashes[sc.base] = hex64(hash_file(sc.base));
            m.input_hashes[sc.corpus_path] = hex64(hash_file(sc.corpus_path));
            m.input_hashes[sc.sae] = hex64(hash_file(sc.sae));
            m.input_hashes[sc.activations] = hex64(hash_file(sc.activations));
            m.config_json = cfg_json.dump();
            finish_manifest(m, sc.out + "/manifest.json");
            std::printf("train-steering: bias + %zu category vectors at layer %zu -> %s\n",
                        bundle.categories.size(), layer, sc.out.c_str());
            return 0;
        }

        auto run_hybrid_over_tasks =
            [&](const std::string& base_path, const std::string& thinking_path,
                const std::string& sae_path, const std::string& bundle_path,
                const std::string& vocab_path, const std::string& tasks_path,
                const std::string& coef_csv, const std::string& window_csv,
                std::int64_t steering_layer, std::int64_t classifier_layer, std::size_t max_new,
                hybrid::Ablation ablation, std::uint64_t seed, std::size_t workers,
                std::vector<hybrid::HybridRun>& runs_out, bench::RunResult& result_out,
                hybrid::HybridConfig& cfg_out) {
                const auto tok = load_vocab(vocab_path);
                const auto base = model::load_checkpoint(base_path);
                const auto thinking = model::load_checkpoint(thinking_path);
                const auto classifier = sae::load_sae(sae_path);
                const auto bundle = steering::load_bundle(bundle_path);
                const auto tasks = bench::load_tasks(tasks_path);

                hybrid::HybridConfig cfg;
                cfg.coefficients =
                    coef_csv.empty() ? prof.coefficients : parse_double_list(coef_csv);
                cfg.windows = window_csv.empty() ? prof.windows : parse_int_list(window_csv);
                cfg.steering_layer = steering_layer >= 0
                                         ? static_cast<std::size_t>(steering_layer)
                                         : (bundle.bias ? bundle.bias->layer
                                                        : bundle.categories.at(0).layer);
                cfg.classifier_layer =
                    classifier_layer >= 0
                        ? static_cast<std::size_t>(classifier_layer)
                        : bundle.classifier_layer.value_or(cfg.steering_layer + 2);
                cfg.max_new_tokens = max_new;
                cfg.ablation = ablation;
                cfg.seed = seed;
                cfg_out = cfg;

                bench::ExperimentArtifacts art;
                art.base = &base;
                art.thinking = &thinking;
                art.classifier = &classifier;
                art.bundle = &bundle;
                art.tokenizer = &tok;
                result_out = bench::evaluate_hybrid_system(
                    art, tasks, cfg, "hybrid:" + hybrid::ablation_name(ablation), workers,
                    &runs_out);
            };

        if (rh->parsed()) {
            std::vector<hybrid::HybridRun> runs;
            bench::RunResult result;
            hybrid::HybridConfig cfg;
            run_hybrid_over_tasks(rhc.base, rhc.thinking, rhc.sae, rhc.bundle, rhc.vocab,
                                  rhc.tasks, rhc.coefficients, rhc.windows, rhc.steering_layer,
                                  rhc.classifier_layer, rhc.max_new,
                                  hybrid::ablation_from_name(rhc.ablation), rhc.seed,
                                  rhc.workers, runs, result, cfg);
            std::filesystem::create_directories(rhc.out);
            std::string ledger;
            for (const auto& r : runs) {
                ledger += hybrid::run_to_jsonl(r);
            }
            write_file(rhc.out + "/runs.jsonl", ledger);
            write_file(rhc.out + "/stats.json",
                       hybrid::corpus_stats_to_json(hybrid::aggregate_stats(runs)) + "\n");
            json res;
            res["system"] = result.system;
            res["accuracy"] = result.accuracy;
            res["total"] = result.per_task.size();
            write_file(rhc.out + "/results.json", res.dump(2) + "\n");

            RunManifest m;
            m.subcommand = "run-hybrid";
            m.seed = rhc.seed;
            for (const auto& p : {rhc.base, rhc.thinking, rhc.sae, rhc.vocab, rhc.tasks}) {
                m.input_hashes[p] = hex64(hash_file(p));
            }
            json cfg_json;
            cfg_json["coefficients"] = cfg.coefficients;
            cfg_json["windows"] = cfg.windows;
            cfg_json["steering_layer"] = cfg.steering_layer;
            cfg_json["classifier_layer"] = cfg.classifier_layer;
            cfg_json["max_new"] = cfg.max_new_tokens;
            cfg_json["ablation"] = hybrid::ablation_name(cfg.ablation);
            cfg_json["seed"] = cfg.seed;
            cfg_json["out"] = rhc.out;
            m.config_json = cfg_json.dump();
            finish_manifest(m, rhc.out + "/manifest.json");
            std::printf("run-hybrid[%s]: accuracy %.3f over %zu tasks -> %s\n",
                        hybrid::ablation_name(cfg.ablation).c_str(), result.accuracy,
                        result.per_task.size(), rhc.out.c_str());
            return 0;
        }

        if (ab->parsed()) {
            std::filesystem::create_directories(abc.out);
            json table;
            hybrid::HybridConfig cfg;
            for (const auto mode :
                 {hybrid::Ablation::kNone, hybrid::Ablation::kOnlyBias,
                  hybrid::Ablation::kRandomFiring, hybrid::Ablation::kRandomVectors}) {
                std::vector<hybrid::HybridRun> runs;
                bench::RunResult result;
                run_hybrid_over_tasks(abc.base, abc.thinking, abc.sae, abc.bundle, abc.vocab,
                                      abc.tasks, abc.coefficients, abc.windows,
                                      abc.steering_layer, abc.classifier_layer, abc.max_new,
                                      mode, abc.seed, abc.workers, runs, result, cfg);
                const std::string name = hybrid::ablation_name(mode);
                std::string ledger;
                for (const auto& r : runs) {
                    ledger += hybrid::run_to_jsonl(r);
                }
                write_file(abc.out + "/runs_" + name + ".jsonl", ledger);
                json row;
                row["accuracy"] = result.accuracy;
                row["stats"] = json::parse(
                    hybrid::corpus_stats_to_json(hybrid::aggregate_stats(runs)));
                table[name] = row;
                std::printf("ablate[%s]: accuracy %.3f\n", name.c_str(), result.accuracy);
            }
            write_file(abc.out + "/ablation.json", table.dump(2) + "\n");
            RunManifest m;
            m.subcommand = "ablate";
            m.seed = abc.seed;
            for (const auto& p : {abc.base, abc.thinking, abc.sae, abc.vocab, abc.tasks}) {
                m.input_hashes[p] = hex64(hash_file(p));
            }
            json cfg_json;
            cfg_json["coefficients"] = cfg.coefficients;
            cfg_json["windows"] = cfg.windows;
            cfg_json["max_new"] = abc.max_new;
            cfg_json["seed"] = abc.seed;
            cfg_json["out"] = abc.out;
            m.config_json = cfg_json.dump();
            finish_manifest(m, abc.out + "/manifest.json");
            return 0;
        }

        if (be->parsed()) {
            const auto tok = load_vocab(bc.vocab);
            const auto base = model::load_checkpoint(bc.base);
            const auto thinking = model::load_checkpoint(bc.thinking);
            const auto tasks = bench::load_tasks(bc.tasks);

            bench::ExperimentArtifacts art;
            art.base = &base;
            art.thinking = &thinking;
            art.tokenizer = &tok;

            sae::SaeParams classifier;
            steering::VectorBundle bundle;
            bench::ExperimentConfig cfg;
            cfg.max_new_tokens = bc.max_new;
            cfg.workers = bc.workers;
            cfg.run_hybrid = !bc.sae.empty() && !bc.bundle.empty();
            cfg.run_ablations = bc.ablations && cfg.run_hybrid;
            if (cfg.run_hybrid) {
                classifier = sae::load_sae(bc.sae);
                bundle = steering::load_bundle(bc.bundle);
                art.classifier = &classifier;
                art.bundle = &bundle;
                cfg.hybrid.coefficients = bc.coefficients.empty()
                                              ? prof.coefficients
                                              : parse_double_list(bc.coefficients);
                cfg.hybrid.windows =
                    bc.windows.empty() ? prof.windows : parse_int_list(bc.windows);
                cfg.hybrid.steering_layer =
                    bc.steering_layer >= 0
                        ? static_cast<std::size_t>(bc.steering_layer)
                        : (bundle.bias ? bundle.bias->layer : bundle.categories.at(0).layer);
                cfg.hybrid.classifier_layer =
                    bc.classifier_layer >= 0
                        ? static_cast<std::size_t>(bc.classifier_layer)
                        : bundle.classifier_layer.value_or(cfg.hybrid.steering_layer + 2);
                cfg.hybrid.max_new_tokens = bc.max_new;
                cfg.hybrid.seed = bc.seed;
            }

            std::map<std::string, std::string> manifest_info;
            manifest_info["base"] = hex64(hash_file(bc.base));
            manifest_info["thinking"] = hex64(hash_file(bc.thinking));
            manifest_info["tasks"] = hex64(hash_file(bc.tasks));
            manifest_info["seed"] = std::to_string(bc.seed);
            const auto report = bench::run_experiment(tasks, art, cfg, manifest_info);

            std::filesystem::create_directories(bc.out);
            write_file(bc.out + "/bench.json", bench::report_to_json(report) + "\n");
            RunManifest m;
            m.subcommand = "bench";
            m.seed = bc.seed;
            m.input_hashes = manifest_info;
            json cfg_json;
            cfg_json["max_new"] = bc.max_new;
            cfg_json["run_hybrid"] = cfg.run_hybrid;
            cfg_json["ablations"] = cfg.run_ablations;
            cfg_json["out"] = bc.out;
            m.config_json = cfg_json.dump();
            finish_manifest(m, bc.out + "/manifest.json");
            for (const auto& r : report.results) {
                std::printf("bench[%s]: accuracy %.3f\n", r.system.c_str(), r.accuracy);
            }
            std::printf("bench: gap recovery %.3f%s -> %s\n", report.gap.value,
                        report.gap.no_positive_gap ? " (no positive gap)" : "",
                        bc.out.c_str());
            return 0;
        }

        if (re->parsed()) {
            auto j = json::parse(read_file(rc.bench));
            bench::Report report;
            report.schema_version = j.value("schema_version", "1");
            report.task_set = j.value("task_set", "synthetic");
            if (j.contains("manifest")) {
                for (const auto& [k, v] : j.at("manifest").items()) {
                    report.manifest[k] = v.is_string() ? v.get<std::string>() : v.dump();
                }
            }
            for (const auto& r : j.at("results")) {
                bench::RunResult rr;
                rr.system = r.at("system").get<std::string>();
                rr.accuracy = r.at("accuracy").get<double>();
                for (const auto& pt : r.at("per_task")) {
                    rr.per_task.emplace_back(pt.at(0).get<std::string>(), pt.at(1).get<bool>());
                }
                report.results.push_back(std::move(rr));
            }
            report.gap.value = j.at("gap_recovery").at("value").get<double>();
            report.gap.no_positive_gap = j.at("gap_recovery").at("no_positive_gap").get<bool>();
            if (j.contains("ablations")) {
                for (const auto& [k, v] : j.at("ablations").items()) {
                    report.ablation_accuracies[k] = v.get<double>();
                }
            }
            if (!rc.grid.empty()) {
                report.grid = taxonomy::grid_from_json(read_file(rc.grid));
            }
            const auto files = bench::emit_report(report, rc.out);
            RunManifest m;
            m.subcommand = "report";
            m.seed = 0;
            m.input_hashes[rc.bench] = hex64(hash_file(rc.bench));
            if (!rc.grid.empty()) {
                m.input_hashes[rc.grid] = hex64(hash_file(rc.grid));
            }
            json cfg_json;
            cfg_json["bench"] = rc.bench;
            cfg_json["grid"] = rc.grid;
            cfg_json["out"] = rc.out;
            m.config_json = cfg_json.dump();
            finish_manifest(m, rc.out + "/manifest.json");
            std::printf("report: %zu files -> %s\n", files.size(), rc.out.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace steerlab::cli
