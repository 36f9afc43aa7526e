#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "finpipe/unicode.hpp"

using namespace finpipe;

TEST_CASE("decode/encode round trip") {
    const std::string samples[] = {
        "", "abc", "p\xc3\xa4iv\xc3\xa4\xc3\xa4", "\xe2\x82\xac"
        "100",
        "\xf0\x9f\x98\x80 smile", "line1\nline2"};
    for (const auto& s : samples) {
        auto cps = decode_utf8(s);
        CHECK(encode_utf8(cps) == s);
        CHECK(codepoint_count(s) == cps.size());
    }
}

TEST_CASE("invalid bytes decode to one replacement each") {
    const std::string bad = "a\xff\xfe b\xc3";  // stray bytes + truncated seq
    auto cps = decode_utf8(bad);
    REQUIRE(cps.size() == 6);
    CHECK(cps[0] == U'a');
    CHECK(cps[1] == kReplacementChar);
    CHECK(cps[2] == kReplacementChar);
    CHECK(cps[3] == U' ');
    CHECK(cps[4] == U'b');
    CHECK(cps[5] == kReplacementChar);
    CHECK(codepoint_count(bad) == 6);
}

TEST_CASE("overlong and surrogate sequences are rejected") {
    // overlong '/' (0xC0 0xAF) and a UTF-16 surrogate (0xED 0xA0 0x80)
    CHECK(decode_utf8("\xc0\xaf").size() == 2);
    for (char32_t cp : decode_utf8("\xc0\xaf")) CHECK(cp == kReplacementChar);
    for (char32_t cp : decode_utf8("\xed\xa0\x80")) CHECK(cp == kReplacementChar);
}

TEST_CASE("spans cover the input exactly") {
    const std::string s = "a\xc3\xa4\xe2\x82\xac\xff!";
    auto spans = decode_utf8_spans(s);
    std::uint32_t pos = 0;
    for (const auto& sp : spans) {
        CHECK(sp.offset == pos);
        pos += sp.len;
    }
    CHECK(pos == s.size());
    CHECK(spans.size() == 5);
    CHECK(spans[3].cp == kReplacementChar);
    CHECK(spans[3].len == 1);
}

TEST_CASE("classification") {
    CHECK(is_letter(U'a'));
    CHECK(is_letter(U'ä'));  // ä
    CHECK(is_letter(U'Ж'));  // Ж
    CHECK(is_letter(U'漢'));  // 漢
    CHECK_FALSE(is_letter(U'1'));
    CHECK(is_digit(U'0'));
    CHECK(is_digit(U'٣'));  // Arabic-Indic three
    CHECK_FALSE(is_digit(U'a'));
    CHECK(is_punct_or_symbol(U'!'));
    CHECK(is_punct_or_symbol(U'€'));  // €
    CHECK(is_punct_or_symbol(U'+'));
    CHECK_FALSE(is_punct_or_symbol(U'a'));
    CHECK(is_whitespace(U' '));
    CHECK(is_whitespace(U'\t'));
    CHECK(is_whitespace(U'\n'));
    CHECK(is_whitespace(U' '));  // NBSP
    CHECK_FALSE(is_whitespace(U'a'));
}

TEST_CASE("lowercasing") {
    CHECK(to_lower(U'A') == U'a');
    CHECK(to_lower(U'Ä') == U'ä');  // Ä -> ä
    CHECK(to_lower(U'Ж') == U'ж');  // Ж -> ж
    CHECK(to_lower(U'a') == U'a');
    CHECK(to_lower(U'7') == U'7');
    CHECK(lowercase("P\xc3\x84IV\xc3\x84\xc3\x84!") ==
          "p\xc3\xa4iv\xc3\xa4\xc3\xa4!");
}

TEST_CASE("split_words") {
    CHECK(split_words("  hei  maailma\t\nx ") ==
          std::vector<std::string>{"hei", "maailma", "x"});
    CHECK(split_words("").empty());
    CHECK(split_words("   ").empty());
    // NBSP separates words too
    CHECK(split_words("a\xc2\xa0"
                      "b") == std::vector<std::string>{"a", "b"});
}
