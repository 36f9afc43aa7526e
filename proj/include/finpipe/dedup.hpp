#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "finpipe/document.hpp"
#include "finpipe/murmur3.hpp"

namespace finpipe {

struct Hash128Hasher {
    std::size_t operator()(const Hash128& h) const noexcept {
        return static_cast<std::size_t>(h.h1 ^ (h.h2 * 0x9E3779B97F4A7C15ULL));
    }
};

// Grow-only state shared by a whole corpus pass; serializable so a pass
// can resume.
struct SeenState {
    std::unordered_set<std::uint64_t> ngram_set;
    std::unordered_set<Hash128, Hash128Hasher> fingerprint_set;

    void save(const std::string& path) const;
    static SeenState load(const std::string& path);
};

struct DedupParams {
    int ngram_order = 5;
    double dup_threshold = 0.5;  // line duplicate if seen-fraction >= this
    double doc_threshold = 0.5;  // discard if remaining dup fraction >= this
};

// Content-only 128-bit fingerprint: MurmurHash3 x64 128, seed 0, over the
// newline-joined text.
Hash128 doc_fingerprint(const Document& doc);

// Keeps first occurrence of each fingerprint. Returns kept documents and
// counts drops in `dropped`.
std::vector<Document> exact_dedup(const std::vector<Document>& docs,
                                  SeenState& state, std::uint64_t& dropped);

// Shingles of a single line: lowercased, whitespace-tokenized, hashed
// n-token windows. Lines shorter than n yield one whole-line hash; empty
// lines yield nothing.
std::vector<std::uint64_t> line_ngrams(const std::string& line, int n);

// Judges each line against the seen set, then inserts its n-grams
// (so repeats within one document are caught too).
std::vector<bool> mark_duplicate_lines(const Document& doc, SeenState& state,
                                       const DedupParams& params);

// Trims the duplicate-flagged prefix/suffix; discards the document if
// nothing remains or the remaining duplicate fraction reaches the
// threshold. Interior duplicate lines are kept.
std::optional<Document> trim_and_filter(const Document& doc,
                                        const std::vector<bool>& flags,
                                        double doc_threshold);

std::vector<Document> onion_dedup(const std::vector<Document>& docs,
                                  SeenState& state, const DedupParams& params,
                                  StageReport* report = nullptr);

}  // namespace finpipe
