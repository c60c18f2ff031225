#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "steerlab/hybrid/hybrid.hpp"
#include "steerlab/taxonomy/grid.hpp"

namespace steerlab::bench {

struct Task {
    std::string id;
    std::string question;
    std::string answer;  // gold
};

// JSON-lines {id, question, answer}. Malformed lines fail with their line
// number; duplicate ids are rejected.
std::vector<Task> load_tasks(const std::string& path);
void save_tasks(const std::vector<Task>& tasks, const std::string& path);

// Last number-like token (sign, decimal, fraction), normalized; empty
// string when the text has no number.
std::string extract_answer(const std::string& text);
std::string normalize_answer(const std::string& raw);

struct GapRecovery {
    double value = 0.0;
    bool no_positive_gap = false;
};

// (acc_hybrid - acc_base) / (acc_thinking - acc_base), clamped to [0, 1];
// zero with the degenerate flag when thinking does not beat base.
GapRecovery gap_recovery(double acc_base, double acc_hybrid, double acc_thinking);

struct RunResult {
    std::string system;  // base | hybrid | thinking | ablation name
    std::vector<std::pair<std::string, bool>> per_task;
    double accuracy = 0.0;
    std::optional<hybrid::CorpusSteeringStats> stats;
};

double recompute_accuracy(const RunResult& r);

struct ExperimentArtifacts {
    const model::ModelWeights* base = nullptr;
    const model::ModelWeights* thinking = nullptr;
    const sae::SaeParams* classifier = nullptr;
    const steering::VectorBundle* bundle = nullptr;
    const corpus::Tokenizer* tokenizer = nullptr;
};

struct ExperimentConfig {
    hybrid::HybridConfig hybrid;
    std::size_t max_new_tokens = 128;  // greedy budget for base/thinking
    bool run_hybrid = true;
    bool run_ablations = false;
    std::size_t workers = 0;
    std::string task_set = "synthetic";
};

struct Report {
    std::string schema_version = "1";
    std::map<std::string, std::string> manifest;
    std::string task_set;
    std::vector<RunResult> results;
    GapRecovery gap;
    std::map<std::string, double> ablation_accuracies;
    std::optional<taxonomy::GridResult> grid;
    std::vector<std::string> files;
};

// Plain greedy decoding of one model over the tasks.
RunResult evaluate_model_system(const model::ModelWeights& w, const corpus::Tokenizer& tok,
                                const std::vector<Task>& tasks, std::size_t max_new_tokens,
                                const std::string& system_name, std::size_t workers);

// Hybrid generation over the tasks; ledgers land in runs_sink when given.
RunResult evaluate_hybrid_system(const ExperimentArtifacts& art, const std::vector<Task>& tasks,
                                 const hybrid::HybridConfig& cfg, const std::string& system_name,
                                 std::size_t workers, std::vector<hybrid::HybridRun>* runs_sink);

// base + thinking (+ hybrid and its ablations when enabled) under the same
// prompt template, with accuracies and gap recovery.
Report run_experiment(const std::vector<Task>& tasks, const ExperimentArtifacts& art,
                      const ExperimentConfig& cfg, std::map<std::string, std::string> manifest);

std::string report_to_json(const Report& report);
bool validate_report_json(const std::string& text, std::string* error);

// report.json, tables.csv, heatmap.svg, firing_histogram.svg.
std::vector<std::string> emit_report(const Report& report, const std::string& dir);

}  // namespace steerlab::bench
