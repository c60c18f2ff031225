#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace steerlab::corpus {

using Span = std::pair<std::size_t, std::size_t>;  // [start, end) byte offsets

// Chain-of-thought prompt wrapper. Byte-identical for training and
// evaluation; tests pin the exact template.
std::string build_prompt(const std::string& question);

// Splits at '.', '?' or '!' followed by whitespace or end of text.
// A period between two digits (3.14) does not split. Whitespace-only
// segments are dropped; text without a terminator is one span.
std::vector<Span> segment_sentences(const std::string& text);

}  // namespace steerlab::corpus
