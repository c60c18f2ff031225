#include "steerlab/corpus/generator.hpp"

#include <stdexcept>

#include <json.hpp>

#include "steerlab/util/common.hpp"

namespace steerlab::corpus {

using numcore::SeededRng;

void validate_spec(const SyntheticTaskSpec& spec) {
    if (spec.operand_range.first > spec.operand_range.second || spec.operand_range.first < 0 ||
        spec.operand_range.second > 9) {
        throw std::invalid_argument("synthetic spec: operand range must be within [0, 9]");
    }
    if (spec.step_count_range.first < 1 ||
        spec.step_count_range.first > spec.step_count_range.second) {
        throw std::invalid_argument("synthetic spec: empty step count range");
    }
    if (spec.error_injection_rate < 0.0 || spec.error_injection_rate > 1.0 ||
        spec.verify_rate < 0.0 || spec.verify_rate > 1.0 || spec.early_stop_rate < 0.0 ||
        spec.early_stop_rate > 1.0) {
        throw std::invalid_argument("synthetic spec: rates must lie in [0, 1]");
    }
    if (spec.behavior_vocabulary.size() < 3) {
        throw std::invalid_argument("synthetic spec: need at least 3 behavior markers");
    }
    if (spec.modulus < 2 || spec.modulus > 10) {
        throw std::invalid_argument("synthetic spec: modulus must be in [2, 10] (single digits)");
    }
    if (spec.op_symbols.empty() ||
        spec.op_symbols.find_first_not_of("+-*") != std::string::npos) {
        throw std::invalid_argument("synthetic spec: op symbols must be a subset of +-*");
    }
}

namespace {

int apply_op(int value, const ProblemOp& op, int modulus) {
    int r = 0;
    switch (op.symbol) {
        case '+': r = value + op.operand; break;
        case '-': r = value - op.operand; break;
        case '*': r = value * op.operand; break;
        default: throw std::logic_error("unknown op symbol");
    }
    r %= modulus;
    if (r < 0) {
        r += modulus;
    }
    return r;
}

std::string op_phrase(const ProblemOp& op) {
    switch (op.symbol) {
        case '+': return "add " + std::to_string(op.operand);
        case '-': return "subtract " + std::to_string(op.operand);
        case '*': return "multiply by " + std::to_string(op.operand);
        default: throw std::logic_error("unknown op symbol");
    }
}

std::string compute_eq(int value, const ProblemOp& op, int result) {
    std::string s = std::to_string(value);
    s += ' ';
    s += op.symbol;
    s += ' ';
    s += std::to_string(op.operand);
    s += " = ";
    s += std::to_string(result);
    return s;
}

// Assembles a trace from tagged sentences, joined by single spaces, and
// records the spans the joiner produces.
class TraceBuilder {
public:
    void add(const std::string& sentence, const std::string& tag) {
        std::size_t start = text_.size();
        if (!text_.empty()) {
            text_ += ' ';
            start += 1;
        }
        text_ += sentence;
        spans_.emplace_back(start, text_.size());
        tags_.push_back(tag);
    }

    TraceRecord finish(std::string id, std::string prompt, std::string answer) const {
        TraceRecord rec;
        rec.id = std::move(id);
        rec.prompt = std::move(prompt);
        rec.trace = text_;
        rec.answer = std::move(answer);
        rec.sentences = spans_;
        rec.behavior_tags = tags_;
        validate(rec);
        return rec;
    }

private:
    std::string text_;
    std::vector<Span> spans_;
    std::vector<std::string> tags_;
};

TraceRecord make_record(const SyntheticTaskSpec& spec, const Problem& problem,
                        const std::string& id, SeededRng& rng) {
    const std::string& restate_tag = spec.behavior_vocabulary[0];
    const std::string& compute_tag = spec.behavior_vocabulary[1];
    const std::string& verify_tag =
        spec.behavior_vocabulary.size() > 2 ? spec.behavior_vocabulary[2] : compute_tag;
    const std::string& backtrack_tag =
        spec.behavior_vocabulary.size() > 3 ? spec.behavior_vocabulary[3] : verify_tag;
    const std::string& conclude_tag =
        spec.behavior_vocabulary.size() > 4 ? spec.behavior_vocabulary.back() : restate_tag;

    TraceBuilder tb;
    const std::string prompt = build_prompt(question_text(problem, spec.modulus));
    const int steps = static_cast<int>(problem.ops.size());

    if (spec.style == TraceStyle::kPlain) {
        int solve_steps = steps;
        if (steps >= 3 && rng.next_double() < spec.early_stop_rate) {
            solve_steps = 2;
        }
        int value = problem.start;
        for (int i = 0; i < solve_steps; ++i) {
            const int next = apply_op(value, problem.ops[i], spec.modulus);
            tb.add("Step " + std::to_string(i + 1) + ": " +
                       compute_eq(value, problem.ops[i], next) + ".",
                   compute_tag);
            value = next;
        }
        tb.add("The answer is " + std::to_string(value) + ".", conclude_tag);
        return tb.finish(id, prompt, std::to_string(value));
    }

    tb.add("We apply " + std::to_string(steps) + " steps starting from " +
               std::to_string(problem.start) + ".",
           restate_tag);
    int value = problem.start;
    for (int i = 0; i < steps; ++i) {
        const ProblemOp& op = problem.ops[i];
        const int truth = apply_op(value, op, spec.modulus);
        const std::string label = "Step " + std::to_string(i + 1);
        const bool inject = rng.next_double() < spec.error_injection_rate;
        if (inject) {
            const int wrong =
                (truth + 1 + static_cast<int>(rng.next_below(
                                 static_cast<std::uint64_t>(spec.modulus - 1)))) %
                spec.modulus;
            tb.add(label + ": " + compute_eq(value, op, wrong) + ".", compute_tag);
            tb.add("Check: " + compute_eq(value, op, truth) + ", not " + std::to_string(wrong) +
                       ".",
                   verify_tag);
            tb.add("Wait, that is wrong, use " + std::to_string(truth) + ".", backtrack_tag);
        } else {
            tb.add(label + ": " + compute_eq(value, op, truth) + ".", compute_tag);
            if (rng.next_double() < spec.verify_rate) {
                tb.add("Check: " + compute_eq(value, op, truth) + ", correct.", verify_tag);
            }
        }
        value = truth;
    }
    tb.add("So the final answer is " + std::to_string(value) + ".", conclude_tag);
    return tb.finish(id, prompt, std::to_string(value));
}

}  // namespace

Problem gen_problem(const SyntheticTaskSpec& spec, SeededRng& rng) {
    Problem p;
    p.start = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spec.modulus)));
    const int lo = spec.step_count_range.first;
    const int hi = spec.step_count_range.second;
    const int steps = lo + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    int value = p.start;
    for (int i = 0; i < steps; ++i) {
        ProblemOp op;
        op.symbol = spec.op_symbols[rng.next_below(spec.op_symbols.size())];
        op.operand = spec.operand_range.first +
                     static_cast<int>(rng.next_below(static_cast<std::uint64_t>(
                         spec.operand_range.second - spec.operand_range.first + 1)));
        value = apply_op(value, op, spec.modulus);
        p.ops.push_back(op);
    }
    p.answer = value;
    return p;
}

std::string question_text(const Problem& problem, int modulus) {
    std::string q = "Start at " + std::to_string(problem.start) + ".";
    for (std::size_t i = 0; i < problem.ops.size(); ++i) {
        q += " Step " + std::to_string(i + 1) + ": " + op_phrase(problem.ops[i]) + ".";
    }
    q += " Final value modulo " + std::to_string(modulus) + "?";
    return q;
}

std::vector<TraceRecord> gen_synthetic_traces(const SyntheticTaskSpec& spec, std::size_t count) {
    validate_spec(spec);
    if (count == 0) {
        throw std::invalid_argument("gen_synthetic_traces: count must be positive");
    }
    std::vector<TraceRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::string id = "trace-" + std::to_string(i);
        SeededRng rng = SeededRng::derive(spec.seed, id);
        const Problem problem = gen_problem(spec, rng);
        out.push_back(make_record(spec, problem, id, rng));
    }
    return out;
}

std::vector<SyntheticTask> gen_synthetic_tasks(const SyntheticTaskSpec& spec, std::size_t count) {
    validate_spec(spec);
    if (count == 0) {
        throw std::invalid_argument("gen_synthetic_tasks: count must be positive");
    }
    std::vector<SyntheticTask> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::string id = "task-" + std::to_string(i);
        SeededRng rng = SeededRng::derive(spec.seed, id);
        const Problem problem = gen_problem(spec, rng);
        out.push_back({id, question_text(problem, spec.modulus), std::to_string(problem.answer)});
    }
    return out;
}

std::vector<std::string> domain_coverage_texts(int modulus) {
    std::vector<std::string> texts;
    const std::string mod = std::to_string(modulus);
    texts.push_back(build_prompt("Start at 0. Step 1: add 2. Step 2: subtract 3. Step 3: "
                                 "multiply by 4. Final value modulo " +
                                 mod + "?"));
    std::string digits_spaced, digits_bare;
    for (int d = 0; d < 10; ++d) {
        digits_spaced += " " + std::to_string(d);
        digits_bare += std::to_string(d);
    }
    texts.push_back(digits_spaced);
    texts.push_back(digits_bare);
    texts.push_back("We apply 1 steps starting from 0.");
    texts.push_back("Step 1: 0 + 0 = 0. Check: 0 - 0 = 0, not 0. "
                    "Wait, that is wrong, use 0. "
                    "Check: 0 * 0 = 0, correct. "
                    "So the final answer is 0. The answer is 0.");
    return texts;
}

void save_tasks(const std::vector<SyntheticTask>& tasks, const std::string& path) {
    std::string out;
    for (const auto& t : tasks) {
        nlohmann::json j;
        j["id"] = t.id;
        j["question"] = t.question;
        j["answer"] = t.answer;
        out += j.dump();
        out += '\n';
    }
    write_file(path, out);
}

}  // namespace steerlab::corpus
