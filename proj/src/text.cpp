#include "steerlab/corpus/text.hpp"

#include <cctype>
#include <stdexcept>

namespace steerlab::corpus {

std::string build_prompt(const std::string& question) {
    if (question.empty()) {
        throw std::invalid_argument("build_prompt: empty question");
    }
    return "Task: Answer the question below. Explain your reasoning step by step.\n\n"
           "Question: " +
           question + "\n\nStep by step answer:";
}

static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

static bool is_digit(char c) {
    return c >= '0' && c <= '9';
}

std::vector<Span> segment_sentences(const std::string& text) {
    std::vector<Span> spans;
    const std::size_t n = text.size();
    std::size_t start = 0;
    std::size_t i = 0;

    auto emit = [&](std::size_t end) {
        std::size_t s = start;
        while (s < end && is_space(text[s])) {
            ++s;
        }
        if (s < end) {
            spans.emplace_back(s, end);
        }
        start = end;
    };

    while (i < n) {
        const char c = text[i];
        const bool terminator = (c == '.' || c == '?' || c == '!');
        if (terminator) {
            const bool decimal = c == '.' && i > 0 && i + 1 < n && is_digit(text[i - 1]) &&
                                 is_digit(text[i + 1]);
            const bool boundary = i + 1 == n || is_space(text[i + 1]);
            if (!decimal && boundary) {
                emit(i + 1);
            }
        }
        ++i;
    }
    emit(n);
    return spans;
}

}  // namespace steerlab::corpus
