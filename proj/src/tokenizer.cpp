#include "steerlab/corpus/tokenizer.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "steerlab/util/common.hpp"

namespace steerlab::corpus {

namespace {

bool is_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_digit(char c) {
    return c >= '0' && c <= '9';
}

}  // namespace

namespace {

bool is_plain_space(char c) {
    return c == ' ';
}

bool is_other_ws(char c) {
    return c == '\n' || c == '\t' || c == '\r';
}

}  // namespace

std::vector<std::string> Tokenizer::split_pieces(const std::string& text) {
    std::vector<std::string> pieces;
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        std::size_t start = i;
        // One leading space fuses with whatever follows it.
        if (is_plain_space(text[i]) && i + 1 < n && !is_plain_space(text[i + 1]) &&
            !is_other_ws(text[i + 1])) {
            ++i;
        }
        if (is_alpha(text[i])) {
            while (i < n && is_alpha(text[i])) {
                ++i;
            }
        } else if (is_digit(text[i])) {
            ++i;  // digits tokenize one at a time
        } else {
            ++i;  // punctuation / whitespace, one char each
        }
        pieces.push_back(text.substr(start, i - start));
    }
    return pieces;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& texts) {
    std::set<std::string> distinct;
    for (const auto& t : texts) {
        for (auto& p : split_pieces(t)) {
            distinct.insert(std::move(p));
        }
    }
    std::vector<std::string> vocab(distinct.begin(), distinct.end());
    vocab.push_back(kEos);
    return from_vocab(std::move(vocab));
}

Tokenizer Tokenizer::from_vocab(std::vector<std::string> vocab) {
    Tokenizer tok;
    tok.vocab_ = std::move(vocab);
    for (std::size_t i = 0; i < tok.vocab_.size(); ++i) {
        if (!tok.index_.emplace(tok.vocab_[i], static_cast<TokenId>(i)).second) {
            throw std::invalid_argument("tokenizer: duplicate vocab symbol");
        }
    }
    auto it = tok.index_.find(kEos);
    if (it == tok.index_.end()) {
        throw std::invalid_argument("tokenizer: vocab missing <eos>");
    }
    tok.eos_id_ = it->second;
    return tok;
}

std::vector<TokenId> Tokenizer::tokenize(const std::string& text) const {
    std::vector<Span> offsets;
    return tokenize_with_offsets(text, offsets);
}

std::vector<TokenId> Tokenizer::tokenize_with_offsets(const std::string& text,
                                                      std::vector<Span>& offsets) const {
    std::vector<TokenId> ids;
    offsets.clear();
    std::size_t pos = 0;
    for (const auto& p : split_pieces(text)) {
        auto it = index_.find(p);
        if (it == index_.end()) {
            throw std::runtime_error("tokenizer: out-of-vocabulary piece '" + p + "'");
        }
        ids.push_back(it->second);
        offsets.emplace_back(pos, pos + p.size());
        pos += p.size();
    }
    return ids;
}

std::string Tokenizer::detokenize(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id == eos_id_) {
            continue;
        }
        out += vocab_.at(id);
    }
    return out;
}

void Tokenizer::save(const std::string& path) const {
    nlohmann::json j;
    j["vocab"] = vocab_;
    write_file(path, j.dump(2) + "\n");
}

Tokenizer Tokenizer::load(const std::string& path) {
    auto j = nlohmann::json::parse(read_file(path));
    return from_vocab(j.at("vocab").get<std::vector<std::string>>());
}

}  // namespace steerlab::corpus
