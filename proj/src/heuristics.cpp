#include "finpipe/heuristics.hpp"

#include <unordered_set>

#include "finpipe/unicode.hpp"

namespace finpipe {

std::unordered_set<char32_t> HeuristicThresholds::default_finnish_alphabet() {
    std::unordered_set<char32_t> alpha;
    for (char32_t c = U'a'; c <= U'z'; ++c) alpha.insert(c);
    alpha.insert(U'å');  // å
    alpha.insert(U'ä');  // ä
    alpha.insert(U'ö');  // ö
    return alpha;
}

DocStats doc_stats(const Document& doc,
                   const std::unordered_set<char32_t>& target_alphabet) {
    DocStats stats;
    std::unordered_set<std::string> distinct;
    for (const auto& line : doc.lines) {
        for (char32_t cp : decode_utf8(line)) {
            if (is_letter(cp)) {
                ++stats.alpha_chars;
                if (target_alphabet.contains(to_lower(cp)))
                    ++stats.target_alpha_chars;
                else
                    ++stats.foreign_alpha_chars;
            } else if (is_digit(cp)) {
                ++stats.digit_chars;
            } else if (is_punct_or_symbol(cp)) {
                ++stats.punct_chars;
            }
        }
        for (auto& word : split_words(lowercase(line))) {
            ++stats.word_count;
            distinct.insert(std::move(word));
        }
    }
    stats.distinct_word_count = distinct.size();
    if (!doc.lines.empty()) {
        std::uint64_t total = 0;
        for (const auto& line : doc.lines) total += codepoint_count(line);
        stats.avg_line_length =
            static_cast<double>(total) / static_cast<double>(doc.lines.size());
    }
    return stats;
}

Verdict heuristic_filter(const Document& doc, const HeuristicThresholds& t) {
    DocStats s = doc_stats(doc, t.target_alphabet);

    // ratio = num/alpha with zero alpha treated as infinite
    auto ratio_exceeds = [&](std::uint64_t num, double max) {
        if (s.alpha_chars == 0) return num > 0 || max < 0;
        return static_cast<double>(num) >
               max * static_cast<double>(s.alpha_chars);
    };

    if (ratio_exceeds(s.punct_chars, t.max_punct_alpha_ratio))
        return {false, "punct_ratio"};
    if (ratio_exceeds(s.digit_chars, t.max_digit_alpha_ratio))
        return {false, "digit_ratio"};
    if (ratio_exceeds(s.foreign_alpha_chars, t.max_foreign_alpha_ratio))
        return {false, "foreign_ratio"};
    if (s.word_count >= t.ttr_word_gate) {
        double ttr = static_cast<double>(s.distinct_word_count) /
                     static_cast<double>(s.word_count);
        if (ttr < t.min_type_token_ratio) return {false, "type_token_ratio"};
    }
    // Average is undefined on empty text; min_doc_chars handles that case.
    if (doc.char_count() > 0 && s.avg_line_length < t.min_avg_line_length)
        return {false, "avg_line_length"};
    if (doc.char_count() < t.min_doc_chars) return {false, "min_doc_chars"};
    return {true, ""};
}

}  // namespace finpipe
