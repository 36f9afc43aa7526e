#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "finpipe/document.hpp"
#include "finpipe/process.hpp"

namespace finpipe {

inline constexpr std::array<const char*, 6> kToxicityLabels = {
    "identity_attack", "insult", "obscene",
    "severe_toxicity", "threat",  "toxicity",
};

struct ToxicityScores {
    std::map<std::string, double> by_label;  // exactly the six labels

    static ToxicityScores zeros();
    double toxicity() const { return by_label.at("toxicity"); }
};

struct ClassifyResult {
    std::optional<ToxicityScores> scores;
    std::string error;  // set when scores is empty
};

class ClassifierHook {
public:
    virtual ~ClassifierHook() = default;
    virtual ClassifyResult classify(const std::string& text) = 0;
};

// Shipped baseline: label scores 1 when any lexicon term for that label
// occurs as a lowercased whole word, else 0.
class LexiconClassifier : public ClassifierHook {
public:
    LexiconClassifier() = default;

    // Lexicon file: "[label]" section headers, one term per line,
    // '#' comments and blank lines ignored.
    static LexiconClassifier from_file(const std::string& path);

    void add_term(const std::string& label, const std::string& term);
    ClassifyResult classify(const std::string& text) override;

private:
    std::map<std::string, std::vector<std::string>> terms_;
};

// Adapter for an external classifier process. Wire format, one JSON
// object per line: request {"id": str, "text": str}, reply
// {"id": str, "scores": {label: float}}.
class ProcessClassifier : public ClassifierHook {
public:
    explicit ProcessClassifier(std::vector<std::string> argv);
    ClassifyResult classify(const std::string& text) override;

private:
    std::vector<std::string> argv_;
    LineProcess proc_;
    std::uint64_t next_id_ = 0;
};

struct MaskResult {
    Document doc;
    std::uint64_t masked_chars = 0;  // codepoints replaced
};

// Replaces emails with [EMAIL] and phone-shaped digit groups with
// [PHONE]. Line count is preserved.
MaskResult mask_pii(const Document& doc);

ClassifyResult classify_toxicity(ClassifierHook& hook, const std::string& text);

struct ToxicityDecision {
    std::optional<Document> doc;  // empty when dropped
    bool classifier_error = false;
};

// Drops the document iff the "toxicity" score of its full text reaches
// the threshold. Classifier failure passes the document through and is
// flagged so the stage can count it.
ToxicityDecision toxicity_filter(const Document& doc, ClassifierHook& hook,
                                 double threshold);

}  // namespace finpipe
