#include "steerlab/corpus/trace.hpp"

#include <stdexcept>

#include <json.hpp>

#include "steerlab/util/common.hpp"

namespace steerlab::corpus {

using nlohmann::json;

void validate(const TraceRecord& rec) {
    std::size_t prev_end = 0;
    for (const auto& [s, e] : rec.sentences) {
        if (s >= e || e > rec.trace.size()) {
            throw std::invalid_argument("trace " + rec.id + ": span out of range");
        }
        if (s < prev_end) {
            throw std::invalid_argument("trace " + rec.id + ": overlapping spans");
        }
        prev_end = e;
    }
    if (rec.behavior_tags && rec.behavior_tags->size() != rec.sentences.size()) {
        throw std::invalid_argument("trace " + rec.id + ": tag/span count mismatch");
    }
}

std::string to_jsonl_line(const TraceRecord& rec) {
    json j;
    j["id"] = rec.id;
    j["prompt"] = rec.prompt;
    j["trace"] = rec.trace;
    j["answer"] = rec.answer;
    json spans = json::array();
    for (const auto& [s, e] : rec.sentences) {
        spans.push_back(json::array({s, e}));
    }
    j["sentences"] = spans;
    if (rec.behavior_tags) {
        j["behavior_tags"] = *rec.behavior_tags;
    }
    return j.dump();
}

TraceRecord from_jsonl_line(const std::string& line) {
    json j = json::parse(line);
    TraceRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.prompt = j.at("prompt").get<std::string>();
    rec.trace = j.at("trace").get<std::string>();
    rec.answer = j.at("answer").get<std::string>();
    for (const auto& sp : j.at("sentences")) {
        rec.sentences.emplace_back(sp.at(0).get<std::size_t>(), sp.at(1).get<std::size_t>());
    }
    if (j.contains("behavior_tags")) {
        rec.behavior_tags = j.at("behavior_tags").get<std::vector<std::string>>();
    }
    validate(rec);
    return rec;
}

void save_corpus(const std::vector<TraceRecord>& recs, const std::string& path) {
    std::string out;
    for (const auto& r : recs) {
        out += to_jsonl_line(r);
        out += '\n';
    }
    write_file(path, out);
}

std::vector<TraceRecord> load_corpus(const std::string& path) {
    std::vector<TraceRecord> recs;
    for (const auto& line : split_lines(read_file(path))) {
        if (!line.empty()) {
            recs.push_back(from_jsonl_line(line));
        }
    }
    return recs;
}

}  // namespace steerlab::corpus
