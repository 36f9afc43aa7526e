#include "finpipe/safety.hpp"

#include <fstream>
#include <regex>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "finpipe/unicode.hpp"

using nlohmann::json;

namespace finpipe {

ToxicityScores ToxicityScores::zeros() {
    ToxicityScores s;
    for (const char* label : kToxicityLabels) s.by_label[label] = 0.0;
    return s;
}

namespace {

// High-recall patterns; precision is secondary for masking.
const std::regex& email_re() {
    static const std::regex re(
        R"([A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,})");
    return re;
}

const std::regex& phone_re() {
    static const std::regex re(
        R"((?:\+\d{1,3}[ \-]?)?(?:\(\d{1,4}\)[ \-]?)?\d(?:[ \-]?\d){5,})");
    return re;
}

std::string mask_line(const std::string& line, std::uint64_t& masked) {
    auto replace_all = [&](const std::string& text, const std::regex& re,
                           const char* token) {
        std::string out;
        auto begin = std::sregex_iterator(text.begin(), text.end(), re);
        auto end = std::sregex_iterator();
        std::size_t last = 0;
        for (auto it = begin; it != end; ++it) {
            out += text.substr(last, static_cast<std::size_t>(it->position()) - last);
            out += token;
            masked += codepoint_count(it->str());
            last = static_cast<std::size_t>(it->position() + it->length());
        }
        out += text.substr(last);
        return out;
    };
    std::string out = replace_all(line, email_re(), "[EMAIL]");
    out = replace_all(out, phone_re(), "[PHONE]");
    return out;
}

// Maximal runs of letter/digit codepoints, lowercased.
std::unordered_set<std::string> word_set(const std::string& text) {
    std::unordered_set<std::string> words;
    std::string cur;
    for (char32_t cp : decode_utf8(text)) {
        if (is_letter(cp) || is_digit(cp)) {
            append_utf8(cur, to_lower(cp));
        } else if (!cur.empty()) {
            words.insert(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.insert(cur);
    return words;
}

}  // namespace

MaskResult mask_pii(const Document& doc) {
    MaskResult result;
    result.doc = doc;
    for (auto& line : result.doc.lines)
        line = mask_line(line, result.masked_chars);
    return result;
}

LexiconClassifier LexiconClassifier::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read lexicon: " + path);
    LexiconClassifier cls;
    std::string line;
    std::string label;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
            line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            label = line.substr(1, line.size() - 2);
            continue;
        }
        if (label.empty())
            throw std::runtime_error("lexicon term before any [label]: " + line);
        cls.add_term(label, line);
    }
    return cls;
}

void LexiconClassifier::add_term(const std::string& label,
                                 const std::string& term) {
    bool known = false;
    for (const char* l : kToxicityLabels) known = known || label == l;
    if (!known) throw std::runtime_error("unknown toxicity label: " + label);
    terms_[label].push_back(lowercase(term));
}

ClassifyResult LexiconClassifier::classify(const std::string& text) {
    auto words = word_set(text);
    ToxicityScores scores = ToxicityScores::zeros();
    for (const auto& [label, terms] : terms_) {
        for (const auto& term : terms) {
            if (words.contains(term)) {
                scores.by_label[label] = 1.0;
                break;
            }
        }
    }
    return {scores, ""};
}

ProcessClassifier::ProcessClassifier(std::vector<std::string> argv)
    : argv_(std::move(argv)) {}

ClassifyResult ProcessClassifier::classify(const std::string& text) {
    if (!proc_.running()) {
        try {
            proc_.start(argv_);
        } catch (const std::exception& e) {
            return {std::nullopt, e.what()};
        }
    }
    json req;
    const std::string id = std::to_string(next_id_++);
    req["id"] = id;
    req["text"] = text;
    auto reply = proc_.request(req.dump());
    if (!reply) {
        proc_.stop();
        return {std::nullopt, "classifier process failed"};
    }
    json j = json::parse(*reply, nullptr, false);
    if (j.is_discarded() || !j.contains("scores") || j.value("id", "") != id)
        return {std::nullopt, "malformed classifier reply"};
    ToxicityScores scores = ToxicityScores::zeros();
    for (const char* label : kToxicityLabels) {
        if (j["scores"].contains(label))
            scores.by_label[label] = j["scores"][label].get<double>();
    }
    return {scores, ""};
}

ClassifyResult classify_toxicity(ClassifierHook& hook,
                                 const std::string& text) {
    return hook.classify(text);
}

ToxicityDecision toxicity_filter(const Document& doc, ClassifierHook& hook,
                                 double threshold) {
    auto result = classify_toxicity(hook, doc.text());
    if (!result.scores) return {doc, true};  // pass through on failure
    if (result.scores->toxicity() >= threshold) return {std::nullopt, false};
    return {doc, false};
}

}  // namespace finpipe
