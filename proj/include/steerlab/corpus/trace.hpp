#pragma once

#include <optional>
#include <string>
#include <vector>

#include "steerlab/corpus/text.hpp"

namespace steerlab::corpus {

// One prompt + reasoning trace + answer, with sentence spans into the
// trace text and optional generator-side behavior tags per sentence.
struct TraceRecord {
    std::string id;
    std::string prompt;  // full chain-of-thought prompt (build_prompt output)
    std::string trace;
    std::string answer;
    std::vector<Span> sentences;                           // byte offsets into trace
    std::optional<std::vector<std::string>> behavior_tags;  // one per sentence

    // Model-visible text: prompt + " " + trace. Sentence spans shift by
    // trace_offset() in this text.
    std::string full_text() const { return prompt + " " + trace; }
    std::size_t trace_offset() const { return prompt.size() + 1; }
};

void validate(const TraceRecord& rec);

std::string to_jsonl_line(const TraceRecord& rec);
TraceRecord from_jsonl_line(const std::string& line);

void save_corpus(const std::vector<TraceRecord>& recs, const std::string& path);
std::vector<TraceRecord> load_corpus(const std::string& path);

}  // namespace steerlab::corpus
