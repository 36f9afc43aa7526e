#include "finpipe/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "finpipe/unicode.hpp"

using nlohmann::json;

namespace finpipe {

namespace {

enum class CpClass { letter, digit, whitespace, other };

CpClass classify(char32_t cp) {
    if (is_whitespace(cp)) return CpClass::whitespace;
    if (is_letter(cp)) return CpClass::letter;
    if (is_digit(cp)) return CpClass::digit;
    return CpClass::other;
}

}  // namespace

std::vector<std::string> pretokenize(std::string_view text) {
    std::vector<std::string> pieces;
    auto spans = decode_utf8_spans(text);
    const std::size_t n = spans.size();

    auto slice = [&](std::size_t from, std::size_t to) {
        const std::size_t begin = spans[from].offset;
        const std::size_t end = spans[to - 1].offset + spans[to - 1].len;
        pieces.emplace_back(text.substr(begin, end - begin));
    };

    // "'s|'t|'re|'ve|'m|'ll|'d"
    auto contraction_len = [&](std::size_t i) -> std::size_t {
        if (spans[i].cp != U'\'' || i + 1 >= n) return 0;
        char32_t a = spans[i + 1].cp;
        if (a == U's' || a == U't' || a == U'm' || a == U'd') return 2;
        if (i + 2 < n) {
            char32_t b = spans[i + 2].cp;
            if ((a == U'r' && b == U'e') || (a == U'v' && b == U'e') ||
                (a == U'l' && b == U'l'))
                return 3;
        }
        return 0;
    };

    std::size_t i = 0;
    while (i < n) {
        if (std::size_t clen = contraction_len(i); clen > 0) {
            slice(i, i + clen);
            i += clen;
            continue;
        }
        const char32_t cp = spans[i].cp;
        const CpClass cls = classify(cp);
        const bool leading_space =
            cp == U' ' && i + 1 < n &&
            classify(spans[i + 1].cp) != CpClass::whitespace;

        if (cls != CpClass::whitespace || leading_space) {
            std::size_t j = i;
            CpClass run = cls;
            if (leading_space) {
                run = classify(spans[i + 1].cp);
                ++j;
            }
            while (j < n && classify(spans[j].cp) == run) ++j;
            slice(i, j);
            i = j;
            continue;
        }

        // Whitespace run: keep the final whitespace char attached to the
        // following token (the \s+(?!\S) rule), unless at end of input.
        std::size_t j = i;
        while (j < n && classify(spans[j].cp) == CpClass::whitespace) ++j;
        if (j == n) {
            slice(i, j);
            i = j;
        } else if (j - i > 1) {
            slice(i, j - 1);
            i = j - 1;
        } else {
            slice(i, j);  // single non-space whitespace before \S
            i = j;
        }
    }
    return pieces;
}

const std::vector<std::string>& Tokenizer::special_tokens() {
    static const std::vector<std::string> specials = {"<s>", "</s>", "<pad>",
                                                      "<unk>"};
    return specials;
}

const std::array<char32_t, 256>& Tokenizer::byte_to_char() {
    static const std::array<char32_t, 256> table = [] {
        std::array<char32_t, 256> t{};
        std::vector<bool> printable(256, false);
        for (int b = '!'; b <= '~'; ++b) printable[b] = true;
        for (int b = 0xA1; b <= 0xAC; ++b) printable[b] = true;
        for (int b = 0xAE; b <= 0xFF; ++b) printable[b] = true;
        char32_t next = 256;
        for (int b = 0; b < 256; ++b)
            t[b] = printable[b] ? static_cast<char32_t>(b) : next++;
        return t;
    }();
    return table;
}

std::string Tokenizer::bytes_to_surrogates(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) append_utf8(out, byte_to_char()[b]);
    return out;
}

std::string Tokenizer::surrogates_to_bytes(const std::string& token) {
    static const std::unordered_map<char32_t, unsigned char> inverse = [] {
        std::unordered_map<char32_t, unsigned char> inv;
        for (int b = 0; b < 256; ++b)
            inv[byte_to_char()[b]] = static_cast<unsigned char>(b);
        return inv;
    }();
    std::string out;
    for (char32_t cp : decode_utf8(token)) {
        auto it = inverse.find(cp);
        if (it == inverse.end())
            throw std::runtime_error("not a byte-level token: " + token);
        out.push_back(static_cast<char>(it->second));
    }
    return out;
}

void Tokenizer::build_ranks() const {
    if (!merge_rank_.empty() || merges.empty()) return;
    for (std::size_t r = 0; r < merges.size(); ++r)
        merge_rank_[merges[r].first + " " + merges[r].second] =
            static_cast<std::int32_t>(r);
}

std::vector<std::int32_t> Tokenizer::encode(std::string_view text) const {
    build_ranks();
    std::vector<std::int32_t> ids;
    for (const auto& piece : pretokenize(text)) {
        std::vector<std::string> syms;
        syms.reserve(piece.size());
        for (unsigned char b : piece) {
            std::string s;
            append_utf8(s, byte_to_char()[b]);
            syms.push_back(std::move(s));
        }
        while (syms.size() > 1) {
            std::int32_t best_rank = -1;
            for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
                auto it = merge_rank_.find(syms[i] + " " + syms[i + 1]);
                if (it == merge_rank_.end()) continue;
                if (best_rank < 0 || it->second < best_rank)
                    best_rank = it->second;
            }
            if (best_rank < 0) break;
            const std::string& left = merges[best_rank].first;
            const std::string& right = merges[best_rank].second;
            std::vector<std::string> next;
            next.reserve(syms.size());
            for (std::size_t i = 0; i < syms.size();) {
                if (i + 1 < syms.size() && syms[i] == left &&
                    syms[i + 1] == right) {
                    next.push_back(left + right);
                    i += 2;
                } else {
                    next.push_back(syms[i]);
                    ++i;
                }
            }
            syms = std::move(next);
        }
        for (const auto& s : syms) ids.push_back(vocab.at(s));
    }
    return ids;
}

std::string Tokenizer::decode(const std::vector<std::int32_t>& ids) const {
    std::string surrogate;
    for (std::int32_t id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= id_to_token.size())
            throw std::out_of_range("token id out of range: " +
                                    std::to_string(id));
        surrogate += id_to_token[id];
    }
    return surrogates_to_bytes(surrogate);
}

void Tokenizer::save(const std::string& path) const {
    json j;
    j["special_tokens"] = special_tokens();
    json jv = json::object();
    for (std::size_t i = 0; i < id_to_token.size(); ++i)
        jv[id_to_token[i]] = i;
    j["vocab"] = std::move(jv);
    std::vector<std::string> merge_lines;
    merge_lines.reserve(merges.size());
    for (const auto& [l, r] : merges) merge_lines.push_back(l + " " + r);
    j["merges"] = std::move(merge_lines);
    j["pretokenizer_pattern"] = kPretokenizerPattern;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << j.dump(1) << '\n';
}

Tokenizer Tokenizer::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    json j;
    in >> j;
    Tokenizer tok;
    const auto& jv = j.at("vocab");
    tok.id_to_token.resize(jv.size());
    for (auto it = jv.begin(); it != jv.end(); ++it) {
        auto id = it.value().get<std::int32_t>();
        tok.vocab[it.key()] = id;
        tok.id_to_token[static_cast<std::size_t>(id)] = it.key();
    }
    for (const auto& line : j.at("merges")) {
        const std::string s = line.get<std::string>();
        auto pos = s.find(' ');
        tok.merges.emplace_back(s.substr(0, pos), s.substr(pos + 1));
    }
    return tok;
}

struct BpeTrainer {
    static Tokenizer train(const std::vector<Document>& corpus,
                           const BpeTrainOptions& opts) {
        Tokenizer tok;
        for (const auto& s : Tokenizer::special_tokens()) {
            tok.vocab[s] = static_cast<std::int32_t>(tok.id_to_token.size());
            tok.id_to_token.push_back(s);
        }
        std::vector<std::string> symbols = tok.id_to_token;  // id -> string
        for (int b = 0; b < 256; ++b) {
            std::string s;
            append_utf8(s, Tokenizer::byte_to_char()[b]);
            tok.vocab[s] = static_cast<std::int32_t>(symbols.size());
            symbols.push_back(std::move(s));
        }
        if (opts.target_vocab <= symbols.size())
            throw std::invalid_argument("target_vocab too small");

        // Deterministic sample: corpus order, capped by bytes.
        std::unordered_map<std::string, std::uint64_t> piece_freq;
        std::uint64_t bytes_read = 0;
        for (const auto& doc : corpus) {
            const std::string text = doc.text();
            for (auto& p : pretokenize(text)) ++piece_freq[p];
            bytes_read += text.size();
            if (opts.sample_byte_cap && bytes_read >= opts.sample_byte_cap)
                break;
        }

        std::vector<std::vector<std::int32_t>> words;
        std::vector<std::uint64_t> freqs;
        words.reserve(piece_freq.size());
        const std::int32_t base_offset =
            static_cast<std::int32_t>(Tokenizer::special_tokens().size());
        // Deterministic word order (counting maps are unordered).
        std::vector<const std::string*> ordered;
        ordered.reserve(piece_freq.size());
        for (const auto& [p, f] : piece_freq) ordered.push_back(&p);
        std::sort(ordered.begin(), ordered.end(),
                  [](const std::string* a, const std::string* b) { return *a < *b; });
        for (const auto* p : ordered) {
            std::vector<std::int32_t> w;
            w.reserve(p->size());
            for (unsigned char b : *p) w.push_back(base_offset + b);
            words.push_back(std::move(w));
            freqs.push_back(piece_freq.at(*p));
        }

        using Pair = std::pair<std::int32_t, std::int32_t>;
        struct PairHash {
            std::size_t operator()(const Pair& p) const noexcept {
                return (static_cast<std::size_t>(p.first) << 32) ^
                       static_cast<std::uint32_t>(p.second);
            }
        };
        std::unordered_map<Pair, std::uint64_t, PairHash> pair_counts;
        std::unordered_map<Pair, std::unordered_set<std::size_t>, PairHash>
            pair_words;
        for (std::size_t wi = 0; wi < words.size(); ++wi) {
            const auto& w = words[wi];
            for (std::size_t i = 0; i + 1 < w.size(); ++i) {
                Pair p{w[i], w[i + 1]};
                pair_counts[p] += freqs[wi];
                pair_words[p].insert(wi);
            }
        }

        while (symbols.size() < opts.target_vocab) {
            Pair best{-1, -1};
            std::uint64_t best_count = 0;
            for (const auto& [p, c] : pair_counts) {
                if (c == 0) continue;
                if (c > best_count) {
                    best = p;
                    best_count = c;
                } else if (c == best_count && best.first >= 0) {
                    const auto& bl = symbols[best.first];
                    const auto& br = symbols[best.second];
                    const auto& pl = symbols[p.first];
                    const auto& pr = symbols[p.second];
                    if (pl < bl || (pl == bl && pr < br)) best = p;
                }
            }
            if (best_count < 2) break;  // nothing left worth merging

            const std::string merged =
                symbols[best.first] + symbols[best.second];
            const auto merged_id = static_cast<std::int32_t>(symbols.size());
            tok.merges.emplace_back(symbols[best.first], symbols[best.second]);
            tok.vocab[merged] = merged_id;
            symbols.push_back(merged);

            auto touched = std::move(pair_words[best]);
            pair_words.erase(best);
            pair_counts.erase(best);
            for (std::size_t wi : touched) {
                auto& w = words[wi];
                const std::uint64_t f = freqs[wi];
                // Remove this word's old pair contributions.
                for (std::size_t i = 0; i + 1 < w.size(); ++i) {
                    Pair p{w[i], w[i + 1]};
                    if (p == best) continue;  // already erased
                    auto it = pair_counts.find(p);
                    if (it != pair_counts.end()) {
                        it->second -= f;
                        if (it->second == 0) {
                            pair_counts.erase(it);
                            pair_words.erase(p);
                        }
                    }
                    auto pw = pair_words.find(p);
                    if (pw != pair_words.end()) pw->second.erase(wi);
                }
                std::vector<std::int32_t> next;
                next.reserve(w.size());
                for (std::size_t i = 0; i < w.size();) {
                    if (i + 1 < w.size() && w[i] == best.first &&
                        w[i + 1] == best.second) {
                        next.push_back(merged_id);
                        i += 2;
                    } else {
                        next.push_back(w[i]);
                        ++i;
                    }
                }
                w = std::move(next);
                for (std::size_t i = 0; i + 1 < w.size(); ++i) {
                    Pair p{w[i], w[i + 1]};
                    pair_counts[p] += f;
                    pair_words[p].insert(wi);
                }
            }
        }

        tok.id_to_token = std::move(symbols);
        return tok;
    }
};

Tokenizer train_bpe(const std::vector<Document>& corpus,
                    const BpeTrainOptions& opts) {
    return BpeTrainer::train(corpus, opts);
}

}  // namespace finpipe
