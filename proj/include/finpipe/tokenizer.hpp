#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "finpipe/document.hpp"

namespace finpipe {

// GPT-2-family pre-tokenization pattern, implemented as a hand-rolled
// scanner with identical semantics. Kept here verbatim so configs and
// docs can quote exactly what the split does.
inline constexpr const char* kPretokenizerPattern =
    R"('s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+)";

// Splits text into pieces whose byte concatenation reproduces the input
// exactly. Merges never cross piece boundaries.
std::vector<std::string> pretokenize(std::string_view text);

// Byte-level BPE tokenizer. Base alphabet is all 256 bytes, each mapped
// to a printable surrogate codepoint, so any byte sequence encodes
// without <unk>.
class Tokenizer {
public:
    static const std::vector<std::string>& special_tokens();  // <s> </s> <pad> <unk>

    std::unordered_map<std::string, std::int32_t> vocab;  // surrogate-form token -> id
    std::vector<std::string> id_to_token;
    std::vector<std::pair<std::string, std::string>> merges;  // training order

    std::size_t vocab_size() const { return id_to_token.size(); }

    std::vector<std::int32_t> encode(std::string_view text) const;
    std::string decode(const std::vector<std::int32_t>& ids) const;

    void save(const std::string& path) const;
    static Tokenizer load(const std::string& path);

    // Surrogate mapping as in byte-level BPE: printable bytes map to
    // themselves, the rest to codepoints 256+k.
    static const std::array<char32_t, 256>& byte_to_char();
    static std::string bytes_to_surrogates(std::string_view bytes);
    static std::string surrogates_to_bytes(const std::string& token);

private:
    mutable std::unordered_map<std::string, std::int32_t> merge_rank_;
    void build_ranks() const;
    friend struct BpeTrainer;
};

struct BpeTrainOptions {
    std::size_t target_vocab = 131072;
    // Deterministic training sample: at most this many bytes, taken in
    // manifest order. 0 = unlimited.
    std::uint64_t sample_byte_cap = 1ull << 30;
};

// Merges the most frequent adjacent pair until the vocabulary reaches
// the target. Ties break on higher count, then lexicographically smaller
// left symbol, then smaller right symbol. Stops early (with a smaller
// vocabulary) once no pair occurs at least twice.
Tokenizer train_bpe(const std::vector<Document>& corpus,
                    const BpeTrainOptions& opts);

}  // namespace finpipe
