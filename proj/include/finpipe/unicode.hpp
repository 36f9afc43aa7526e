#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace finpipe {

// UTF-8 / codepoint helpers shared by all stages. Decoding is lenient:
// invalid byte sequences decode byte-by-byte to U+FFFD so that statistics
// never throw on dirty web text.

inline constexpr char32_t kReplacementChar = 0xFFFD;

std::vector<char32_t> decode_utf8(std::string_view text);

// Decoded codepoints with their byte extents, so callers can slice the
// original bytes losslessly even around invalid sequences.
struct CpSpan {
    char32_t cp;
    std::uint32_t offset;
    std::uint32_t len;
};
std::vector<CpSpan> decode_utf8_spans(std::string_view text);
void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(const std::vector<char32_t>& cps);

// Number of Unicode scalar values in a UTF-8 string (invalid bytes count
// as one scalar each).
std::size_t codepoint_count(std::string_view text);

bool is_letter(char32_t cp);
bool is_digit(char32_t cp);
bool is_punct_or_symbol(char32_t cp);
bool is_whitespace(char32_t cp);

char32_t to_lower(char32_t cp);
std::string lowercase(std::string_view text);

// Whitespace-separated tokens (Unicode whitespace).
std::vector<std::string> split_words(std::string_view text);

}  // namespace finpipe
