#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "steerlab/corpus/trace.hpp"
#include "steerlab/numcore/rng.hpp"

namespace steerlab::corpus {

enum class TraceStyle {
    kPlain,     // bare compute steps, early-stopping bias on long problems
    kThinking,  // behavior markers with injected-error correction
};

// Multi-step modular-arithmetic word problems. Plain traces carry no
// behavior markers and, on problems with 3+ steps, conclude after two
// steps with probability early_stop_rate — the stopping bias the steered
// runs have to overcome. Thinking traces interleave the five behavior
// markers; with probability error_injection_rate a compute step emits a
// wrong value and a check + backtrack pair corrects it. Values stay
// below the modulus so every number is a single digit.
struct SyntheticTaskSpec {
    std::pair<int, int> operand_range{2, 9};
    std::pair<int, int> step_count_range{1, 3};
    double error_injection_rate = 0.3;
    std::vector<std::string> behavior_vocabulary{"restate", "compute", "verify", "backtrack",
                                                 "conclude"};
    std::uint64_t seed = 0;

    TraceStyle style = TraceStyle::kThinking;
    double verify_rate = 0.5;      // thinking: chance a correct step still gets a check
    double early_stop_rate = 0.75;  // plain: chance of stopping after two steps
    int modulus = 10;
    std::string op_symbols = "+-";  // subset of "+-*"
};

struct ProblemOp {
    char symbol;  // '+', '-', '*'
    int operand;
};

struct Problem {
    int start = 0;
    std::vector<ProblemOp> ops;
    int answer = 0;  // full solve, modulo spec.modulus
};

struct SyntheticTask {
    std::string id;
    std::string question;
    std::string answer;  // gold
};

void validate_spec(const SyntheticTaskSpec& spec);

Problem gen_problem(const SyntheticTaskSpec& spec, numcore::SeededRng& rng);
std::string question_text(const Problem& problem, int modulus);

std::vector<TraceRecord> gen_synthetic_traces(const SyntheticTaskSpec& spec, std::size_t count);

// Evaluation tasks with gold answers, drawn from the same problem
// distribution (fresh stream keyed by "task-" ids).
std::vector<SyntheticTask> gen_synthetic_tasks(const SyntheticTaskSpec& spec, std::size_t count);

void save_tasks(const std::vector<SyntheticTask>& tasks, const std::string& path);

// Texts enumerating every template piece the generator can emit (all
// digits in all slots), so vocabularies do not depend on sample counts.
std::vector<std::string> domain_coverage_texts(int modulus);

}  // namespace steerlab::corpus
