#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>

#include "finpipe/document.hpp"

namespace finpipe {

// Rule-based prose filters. Defaults are calibrated so clean prose passes
// at >= 95%; every value is configurable.
struct HeuristicThresholds {
    double max_punct_alpha_ratio = 0.30;
    double max_digit_alpha_ratio = 0.20;
    double max_foreign_alpha_ratio = 0.25;
    double min_type_token_ratio = 0.30;  // applied only when word_count >= ttr_word_gate
    std::uint64_t ttr_word_gate = 50;
    double min_avg_line_length = 25.0;
    std::uint64_t min_doc_chars = 200;
    // Lowercase codepoints of the target alphabet. Default: Finnish
    // (a-z plus å, ä, ö); membership is checked case-insensitively.
    std::unordered_set<char32_t> target_alphabet = default_finnish_alphabet();

    static std::unordered_set<char32_t> default_finnish_alphabet();
};

struct DocStats {
    std::uint64_t alpha_chars = 0;
    std::uint64_t target_alpha_chars = 0;
    std::uint64_t foreign_alpha_chars = 0;
    std::uint64_t digit_chars = 0;
    std::uint64_t punct_chars = 0;
    std::uint64_t word_count = 0;
    std::uint64_t distinct_word_count = 0;
    double avg_line_length = 0.0;
};

DocStats doc_stats(const Document& doc,
                   const std::unordered_set<char32_t>& target_alphabet);

struct Verdict {
    bool keep = true;
    std::string reason;  // first violated rule, empty when kept
};

// Rules are checked in threshold declaration order and the first
// violation wins. Ratios with zero denominator count as infinite (drop),
// except the type-token ratio which only applies above the word gate.
Verdict heuristic_filter(const Document& doc, const HeuristicThresholds& t);

}  // namespace finpipe
