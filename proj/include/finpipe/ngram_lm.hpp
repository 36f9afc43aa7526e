#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "finpipe/document.hpp"

namespace finpipe {

// Interpolated Kneser-Ney word n-gram model. One absolute discount per
// order, D = n1/(n1 + 2*n2) from that order's count-of-count statistics.
// Stored in backoff form: P(w|h) = prob(hw) if hw seen, else bow(h) *
// P(w|h'), which is exactly the interpolated distribution.
class NGramModel {
public:
    static constexpr std::int32_t kUnkId = 0;
    static constexpr std::int32_t kBosId = 1;
    static constexpr std::int32_t kEosId = 2;

    int order = 0;
    std::unordered_map<std::string, std::int32_t> vocab;  // includes specials
    std::vector<std::string> id_to_word;
    std::vector<double> discounts;  // index order-1

    // probs[k-1]: packed k-gram key -> ln P(last | prefix)
    // bows[k-1]:  packed k-gram key -> ln backoff weight of that history
    std::vector<std::unordered_map<std::string, double>> probs;
    std::vector<std::unordered_map<std::string, double>> bows;

    std::int32_t word_id(const std::string& word) const;  // OOV -> <unk>
    std::vector<std::int32_t> map_tokens(
        const std::vector<std::string>& tokens) const;

    // ln P(w | hist); hist is truncated to the last order-1 ids.
    double logprob_id(std::span<const std::int32_t> hist,
                      std::int32_t w) const;

    // Words the model predicts: everything in vocab except <s>.
    std::vector<std::int32_t> prediction_ids() const;

    static std::string pack_key(std::span<const std::int32_t> ids);
};

struct TrainOptions {
    int order = 4;
    int min_count = 2;  // words rarer than this map to <unk>
};

// Lowercased whitespace tokens, the LM's token unit.
std::vector<std::string> lm_tokenize(const std::string& line);

// Each document line is one sentence, padded <s> ... </s>.
NGramModel train_kn(const std::vector<Document>& corpus,
                    const TrainOptions& opts = {});

// ln probability of the token sequence as a full sentence, including the
// </s> terminator, starting from <s>.
double logprob(const NGramModel& model, const std::vector<std::string>& tokens);

// ln probability of `continuation` tokens given `context` tokens, no
// terminator. Used by the eval backend.
double cond_logprob(const NGramModel& model,
                    const std::vector<std::string>& context,
                    const std::vector<std::string>& continuation);

// exp(-logprob / N), N = token count including </s>.
double perplexity(const NGramModel& model, const std::string& line);

// Removes lines with perplexity strictly greater than the threshold;
// empty result drops the document.
std::optional<Document> perplexity_filter(const Document& doc,
                                          const NGramModel& model,
                                          double threshold,
                                          std::uint64_t* lines_removed = nullptr);

// ARPA text interchange (log10 in the file, natural log in memory).
void save_arpa(const NGramModel& model, const std::string& path);
NGramModel load_arpa(const std::string& path);

}  // namespace finpipe
