#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "finpipe/document.hpp"
#include "finpipe/tokenizer.hpp"

namespace finpipe {

// Per-mille units: ratios are kept as exact integer tenths of a percent
// (rounded half away from zero) so table rendering is reproducible.
struct MixtureRow {
    std::string source;
    std::uint64_t chars = 0;
    std::int64_t ratio_tenths = 0;           // chars share
    double weight = 1.0;
    std::int64_t weighted_ratio_tenths = 0;  // chars*weight share
};

struct MixtureTable {
    std::vector<MixtureRow> rows;
    std::uint64_t total_chars = 0;

    std::string to_json() const;
    std::string to_text() const;  // aligned table, one decimal place
};

// Percent string with one decimal, e.g. 227 -> "22.7".
std::string format_tenths(std::int64_t tenths);

// Rows follow the source order of `order`. Exact integer arithmetic:
// weights are scaled to rationals with denominator 10^6.
MixtureTable mixture_table(
    const std::vector<std::string>& order,
    const std::map<std::string, std::uint64_t>& char_counts,
    const std::map<std::string, double>& weights);

struct DocRef {
    std::string id;
    std::uint64_t chars = 0;
};

struct SourcePlan {
    std::string source;
    std::uint64_t full_epochs = 0;
    std::vector<std::string> fractional_doc_ids;  // prefix of seeded shuffle
    std::uint64_t total_chars = 0;
    std::uint64_t planned_chars = 0;
};

struct SamplingPlan {
    std::uint64_t seed = 0;
    std::vector<SourcePlan> sources;

    std::string to_json() const;
    static SamplingPlan from_json(const std::string& text);
};

// Weight w = full epochs floor(w) plus a fractional remainder realized
// as a prefix of a seeded shuffle chosen by character mass.
SamplingPlan build_sampling_plan(
    const std::vector<SourceSpec>& specs,
    const std::map<std::string, std::vector<DocRef>>& docs_by_source,
    std::uint64_t seed);

struct TokenBudget {
    std::uint64_t total_tokens = 0;
    // tokens and chars per source, documents counted with multiplicity
    std::map<std::string, std::uint64_t> tokens_by_source;
    std::map<std::string, double> tokens_per_char;
};

TokenBudget token_budget(
    const SamplingPlan& plan, const Tokenizer& tok,
    const std::map<std::string, std::vector<Document>>& docs_by_source);

struct OverlapReport {
    std::uint64_t urls_a = 0;
    std::uint64_t urls_b = 0;
    std::uint64_t common_urls = 0;
    double url_overlap_a_in_b = 0.0;  // |A ∩ B| / |A|
    double url_overlap_b_in_a = 0.0;
    bool ngram_phase_run = false;
    std::uint64_t sampled_urls = 0;
    double mean_containment_a_in_b = 0.0;  // |5g(a) ∩ 5g(b)| / |5g(a)|
    double mean_containment_b_in_a = 0.0;

    std::string to_json() const;
};

// URL overlap in both directions, then directed mean 5-gram containment
// over `sample` seeded random common URLs (whole-document shingles,
// same definition as dedup).
OverlapReport corpus_overlap(const std::vector<Document>& a,
                             const std::vector<Document>& b,
                             std::uint64_t sample, std::uint64_t seed);

}  // namespace finpipe
