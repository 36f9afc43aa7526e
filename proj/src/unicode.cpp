#include "finpipe/unicode.hpp"

#include <algorithm>
#include <iterator>

namespace finpipe {

namespace {
#include "finpipe/unicode_tables.inc"

template <std::size_t N>
bool in_ranges(const CpRange (&table)[N], char32_t cp) {
    auto it = std::upper_bound(std::begin(table), std::end(table), cp,
                               [](char32_t c, const CpRange& r) { return c < r.lo; });
    if (it == std::begin(table)) return false;
    --it;
    return cp >= it->lo && cp <= it->hi;
}
}  // namespace

std::vector<CpSpan> decode_utf8_spans(std::string_view text) {
    std::vector<CpSpan> out;
    out.reserve(text.size());
    std::size_t i = 0;
    const auto* s = reinterpret_cast<const unsigned char*>(text.data());
    const std::size_t n = text.size();
    while (i < n) {
        unsigned char b = s[i];
        if (b < 0x80) {
            out.push_back({b, static_cast<std::uint32_t>(i), 1});
            ++i;
            continue;
        }
        int len = 0;
        char32_t cp = 0;
        if ((b & 0xE0) == 0xC0) { len = 2; cp = b & 0x1F; }
        else if ((b & 0xF0) == 0xE0) { len = 3; cp = b & 0x0F; }
        else if ((b & 0xF8) == 0xF0) { len = 4; cp = b & 0x07; }
        if (len == 0 || i + len > n) {
            out.push_back({kReplacementChar, static_cast<std::uint32_t>(i), 1});
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            if ((s[i + k] & 0xC0) != 0x80) { ok = false; break; }
            cp = (cp << 6) | (s[i + k] & 0x3F);
        }
        // Reject overlong forms and surrogates.
        if (ok && len == 2 && cp < 0x80) ok = false;
        if (ok && len == 3 && cp < 0x800) ok = false;
        if (ok && len == 4 && (cp < 0x10000 || cp > 0x10FFFF)) ok = false;
        if (ok && cp >= 0xD800 && cp <= 0xDFFF) ok = false;
        if (!ok) {
            out.push_back({kReplacementChar, static_cast<std::uint32_t>(i), 1});
            ++i;
            continue;
        }
        out.push_back({cp, static_cast<std::uint32_t>(i),
                       static_cast<std::uint32_t>(len)});
        i += len;
    }
    return out;
}

std::vector<char32_t> decode_utf8(std::string_view text) {
    std::vector<char32_t> out;
    auto spans = decode_utf8_spans(text);
    out.reserve(spans.size());
    for (const auto& s : spans) out.push_back(s.cp);
    return out;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

std::size_t codepoint_count(std::string_view text) {
    std::size_t count = 0;
    std::size_t i = 0;
    const auto* s = reinterpret_cast<const unsigned char*>(text.data());
    const std::size_t n = text.size();
    while (i < n) {
        unsigned char b = s[i];
        std::size_t len = 1;
        if ((b & 0xE0) == 0xC0) len = 2;
        else if ((b & 0xF0) == 0xE0) len = 3;
        else if ((b & 0xF8) == 0xF0) len = 4;
        if (i + len > n) len = 1;
        // Continuation bytes must check out, else count byte-by-byte.
        for (std::size_t k = 1; k < len; ++k) {
            if ((s[i + k] & 0xC0) != 0x80) { len = 1; break; }
        }
        i += len;
        ++count;
    }
    return count;
}

bool is_letter(char32_t cp) { return in_ranges(kLetterRanges, cp); }
bool is_digit(char32_t cp) { return in_ranges(kDigitRanges, cp); }
bool is_punct_or_symbol(char32_t cp) { return in_ranges(kPunctSymbolRanges, cp); }
bool is_whitespace(char32_t cp) { return in_ranges(kWhitespaceRanges, cp); }

char32_t to_lower(char32_t cp) {
    auto it = std::lower_bound(std::begin(kLowerMap), std::end(kLowerMap), cp,
                               [](const CaseMap& m, char32_t c) { return m.from < c; });
    if (it != std::end(kLowerMap) && it->from == cp) return it->to;
    return cp;
}

std::string lowercase(std::string_view text) {
    auto cps = decode_utf8(text);
    for (auto& cp : cps) cp = to_lower(cp);
    return encode_utf8(cps);
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    auto cps = decode_utf8(text);
    std::string cur;
    for (char32_t cp : cps) {
        if (is_whitespace(cp)) {
            if (!cur.empty()) {
                words.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            append_utf8(cur, cp);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

}  // namespace finpipe
