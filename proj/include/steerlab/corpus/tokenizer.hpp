#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "steerlab/corpus/text.hpp"

namespace steerlab::corpus {

using TokenId = std::uint32_t;

// Word/symbol-level tokenizer over a closed vocabulary. Text is split
// into pieces deterministically: a word or single digit absorbs one
// leading space; every other character is its own piece. Detokenization
// is plain concatenation, so round-trips are exact by construction.
class Tokenizer {
public:
    // Collects every distinct piece across the texts, sorted
    // lexicographically, and appends the end-of-sequence symbol.
    static Tokenizer build(const std::vector<std::string>& texts);

    static Tokenizer from_vocab(std::vector<std::string> vocab);

    // Deterministic piece split; independent of the vocabulary.
    static std::vector<std::string> split_pieces(const std::string& text);

    std::vector<TokenId> tokenize(const std::string& text) const;
    // Pieces plus their [start, end) byte offsets in the input.
    std::vector<TokenId> tokenize_with_offsets(const std::string& text,
                                               std::vector<Span>& offsets) const;
    std::string detokenize(const std::vector<TokenId>& ids) const;

    TokenId eos_id() const { return eos_id_; }
    std::size_t vocab_size() const { return vocab_.size(); }
    const std::vector<std::string>& vocab() const { return vocab_; }
    const std::string& piece(TokenId id) const { return vocab_.at(id); }

    void save(const std::string& path) const;
    static Tokenizer load(const std::string& path);

    static constexpr const char* kEos = "<eos>";

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, TokenId> index_;
    TokenId eos_id_ = 0;
};

}  // namespace steerlab::corpus
