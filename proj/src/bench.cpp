#include "steerlab/bench/bench.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "steerlab/corpus/text.hpp"
#include "steerlab/util/common.hpp"
#include "steerlab/util/parallel.hpp"

namespace steerlab::bench {

using nlohmann::json;

std::vector<Task> load_tasks(const std::string& path) {
    std::vector<Task> tasks;
    std::set<std::string> seen;
    const auto lines = split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            continue;
        }
        json j = json::parse(lines[i], nullptr, false);
        if (j.is_discarded() || !j.contains("id") || !j.contains("question") ||
            !j.contains("answer")) {
            throw std::runtime_error("tasks file " + path + ": malformed line " +
                                     std::to_string(i + 1));
        }
        Task t{j.at("id").get<std::string>(), j.at("question").get<std::string>(),
               j.at("answer").get<std::string>()};
        if (t.answer.empty()) {
            throw std::runtime_error("tasks file " + path + ": empty gold answer at line " +
                                     std::to_string(i + 1));
        }
        if (!seen.insert(t.id).second) {
            throw std::runtime_error("tasks file " + path + ": duplicate id '" + t.id + "'");
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

void save_tasks(const std::vector<Task>& tasks, const std::string& path) {
    std::string out;
    for (const auto& t : tasks) {
        json j;
        j["id"] = t.id;
        j["question"] = t.question;
        j["answer"] = t.answer;
        out += j.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::string normalize_answer(const std::string& raw) {
    if (raw.empty()) {
        return "";
    }
    std::string s = raw;
    bool negative = false;
    std::size_t pos = 0;
    if (s[0] == '+' || s[0] == '-') {
        negative = s[0] == '-';
        pos = 1;
    }
    auto strip_number = [](std::string num) {
        // leading zeros
        std::size_t nz = 0;
        while (nz + 1 < num.size() && num[nz] == '0' && num[nz + 1] != '.') {
            ++nz;
        }
        num = num.substr(nz);
        // trailing zeros after a decimal point
        if (num.find('.') != std::string::npos) {
            while (!num.empty() && num.back() == '0') {
                num.pop_back();
            }
            if (!num.empty() && num.back() == '.') {
                num.pop_back();
            }
        }
        return num;
    };
    std::string body = s.substr(pos);
    const auto slash = body.find('/');
    std::string norm;
    if (slash != std::string::npos) {
        norm = strip_number(body.substr(0, slash)) + "/" + strip_number(body.substr(slash + 1));
    } else {
        norm = strip_number(body);
    }
    if (norm.empty() || norm == "0") {
        return norm.empty() ? "" : "0";
    }
    return (negative ? "-" : "") + norm;
}

std::string extract_answer(const std::string& text) {
    // scan for number-like tokens: [+-]?digits[.digits][/digits]
    std::string last;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    while (i < n) {
        std::size_t start = i;
        bool signed_start = false;
        if ((text[i] == '+' || text[i] == '-') && i + 1 < n && is_digit(text[i + 1])) {
            signed_start = true;
            ++i;
        }
        if (i < n && is_digit(text[i])) {
            while (i < n && is_digit(text[i])) {
                ++i;
            }
            if (i + 1 < n && text[i] == '.' && is_digit(text[i + 1])) {
                ++i;
                while (i < n && is_digit(text[i])) {
                    ++i;
                }
            }
            if (i + 1 < n && text[i] == '/' && is_digit(text[i + 1])) {
                ++i;
                while (i < n && is_digit(text[i])) {
                    ++i;
                }
            }
            last = text.substr(start, i - start);
        } else {
            i = start + 1;
        }
        (void)signed_start;
    }
    return normalize_answer(last);
}

GapRecovery gap_recovery(double acc_base, double acc_hybrid, double acc_thinking) {
    GapRecovery g;
    if (acc_thinking <= acc_base) {
        g.no_positive_gap = true;
        g.value = 0.0;
        return g;
    }
    g.value = std::clamp((acc_hybrid - acc_base) / (acc_thinking - acc_base), 0.0, 1.0);
    return g;
}

double recompute_accuracy(const RunResult& r) {
    if (r.per_task.empty()) {
        return 0.0;
    }
    std::size_t correct = 0;
    for (const auto& [id, ok] : r.per_task) {
        correct += ok ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(r.per_task.size());
}

RunResult evaluate_model_system(const model::ModelWeights& w, const corpus::Tokenizer& tok,
                                const std::vector<Task>& tasks, std::size_t max_new_tokens,
                                const std::string& system_name, std::size_t workers) {
    RunResult result;
    result.system = system_name;
    result.per_task.resize(tasks.size());
    parallel_for_indexed(tasks.size(), workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        bool ok = false;
        try {
            const auto prompt_ids = tok.tokenize(corpus::build_prompt(task.question));
            const auto generated =
                model::generate_greedy(w, prompt_ids, max_new_tokens, tok.eos_id());
            const std::string text = tok.detokenize(generated);
            const std::string got = extract_answer(text);
            ok = !got.empty() && got == normalize_answer(task.answer);
        } catch (const std::exception&) {
            ok = false;  // failed task counts incorrect
        }
        result.per_task[i] = {task.id, ok};
    });
    result.accuracy = recompute_accuracy(result);
    return result;
}

RunResult evaluate_hybrid_system(const ExperimentArtifacts& art, const std::vector<Task>& tasks,
                                 const hybrid::HybridConfig& cfg, const std::string& system_name,
                                 std::size_t workers, std::vector<hybrid::HybridRun>* runs_sink) {
    RunResult result;
    result.system = system_name;
    result.per_task.resize(tasks.size());
    std::vector<hybrid::HybridRun> runs(tasks.size());
    parallel_for_indexed(tasks.size(), workers, [&](std::size_t i) {
        const Task& task = tasks[i];
        bool ok = false;
        try {
            runs[i] = hybrid::generate_hybrid(*art.base, *art.thinking, *art.classifier,
                                              *art.bundle, *art.tokenizer, task.id, task.question,
                                              cfg);
            const std::string got = extract_answer(runs[i].generated_text);
            ok = !got.empty() && got == normalize_answer(task.answer);
        } catch (const std::exception&) {
            ok = false;
        }
        result.per_task[i] = {task.id, ok};
    });
    result.accuracy = recompute_accuracy(result);
    result.stats = hybrid::aggregate_stats(runs);
    if (runs_sink) {
        *runs_sink = std::move(runs);
    }
    return result;
}

Report run_experiment(const std::vector<Task>& tasks, const ExperimentArtifacts& art,
                      const ExperimentConfig& cfg, std::map<std::string, std::string> manifest) {
    if (!art.base || !art.thinking || !art.tokenizer) {
        throw std::invalid_argument("run_experiment: missing model artifacts");
    }
    Report report;
    report.manifest = std::move(manifest);
    report.task_set = cfg.task_set;

    report.results.push_back(evaluate_model_system(*art.base, *art.tokenizer, tasks,
                                                   cfg.max_new_tokens, "base", cfg.workers));
    double acc_hybrid = 0.0;
    if (cfg.run_hybrid) {
        if (!art.classifier || !art.bundle) {
            throw std::invalid_argument("run_experiment: hybrid needs classifier and bundle");
        }
        report.results.push_back(evaluate_hybrid_system(art, tasks, cfg.hybrid, "hybrid",
                                                        cfg.workers, nullptr));
        acc_hybrid = report.results.back().accuracy;
    }
    report.results.push_back(evaluate_model_system(*art.thinking, *art.tokenizer, tasks,
                                                   cfg.max_new_tokens, "thinking", cfg.workers));

    const double acc_base = report.results.front().accuracy;
    const double acc_thinking = report.results.back().accuracy;
    if (cfg.run_hybrid) {
        report.gap = gap_recovery(acc_base, acc_hybrid, acc_thinking);
    }

    if (cfg.run_ablations) {
        for (auto mode : {hybrid::Ablation::kNone, hybrid::Ablation::kOnlyBias,
                          hybrid::Ablation::kRandomFiring, hybrid::Ablation::kRandomVectors}) {
            hybrid::HybridConfig ab_cfg = cfg.hybrid;
            ab_cfg.ablation = mode;
            const std::string name = "ablation:" + hybrid::ablation_name(mode);
            if (mode == hybrid::Ablation::kNone && cfg.run_hybrid) {
                // full hybrid already measured
                report.ablation_accuracies[hybrid::ablation_name(mode)] = acc_hybrid;
                continue;
            }
            const auto r =
                evaluate_hybrid_system(art, tasks, ab_cfg, name, cfg.workers, nullptr);
            report.ablation_accuracies[hybrid::ablation_name(mode)] = r.accuracy;
            report.results.push_back(r);
        }
    }
    return report;
}

namespace {

json result_to_json(const RunResult& r) {
    json j;
    j["system"] = r.system;
    j["accuracy"] = r.accuracy;
    std::size_t correct = 0;
    json per_task = json::array();
    for (const auto& [id, ok] : r.per_task) {
        per_task.push_back(json::array({id, ok}));
        correct += ok ? 1 : 0;
    }
    j["correct"] = correct;
    j["total"] = r.per_task.size();
    j["per_task"] = per_task;
    if (r.stats) {
        j["steering_stats"] = json::parse(hybrid::corpus_stats_to_json(*r.stats));
    }
    return j;
}

}  // namespace

std::string report_to_json(const Report& report) {
    json j;
    j["schema_version"] = report.schema_version;
    j["manifest"] = report.manifest;
    j["task_set"] = report.task_set;
    json results = json::array();
    for (const auto& r : report.results) {
        results.push_back(result_to_json(r));
    }
    j["results"] = results;
    j["gap_recovery"] = json{{"value", report.gap.value},
                             {"no_positive_gap", report.gap.no_positive_gap}};
    j["ablations"] = report.ablation_accuracies;
    if (report.grid) {
        j["grid"] = json::parse(taxonomy::grid_to_json(*report.grid));
    }
    j["files"] = report.files;
    return j.dump(2);
}

bool validate_report_json(const std::string& text, std::string* error) {
    const json j = json::parse(text, nullptr, false);
    auto fail = [&](const std::string& msg) {
        if (error) {
            *error = msg;
        }
        return false;
    };
    if (j.is_discarded()) {
        return fail("not valid JSON");
    }
    if (!j.is_object()) {
        return fail("root must be an object");
    }
    const std::vector<std::pair<std::string, std::string>> required = {
        {"schema_version", "string"}, {"manifest", "object"}, {"task_set", "string"},
        {"results", "array"},         {"gap_recovery", "object"}, {"ablations", "object"},
        {"files", "array"},
    };
    for (const auto& [key, type] : required) {
        if (!j.contains(key)) {
            return fail("missing field: " + key);
        }
        const auto& v = j.at(key);
        if ((type == "string" && !v.is_string()) || (type == "object" && !v.is_object()) ||
            (type == "array" && !v.is_array())) {
            return fail("field " + key + " must be " + type);
        }
    }
    for (const auto& r : j.at("results")) {
        for (const char* key : {"system", "accuracy", "correct", "total", "per_task"}) {
            if (!r.contains(key)) {
                return fail(std::string("result missing field: ") + key);
            }
        }
    }
    const auto& gap = j.at("gap_recovery");
    if (!gap.contains("value") || !gap.contains("no_positive_gap")) {
        return fail("gap_recovery must carry value and no_positive_gap");
    }
    return true;
}

}  // namespace steerlab::bench
