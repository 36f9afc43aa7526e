#include "finpipe/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "finpipe/unicode.hpp"

namespace finpipe {

namespace {
constexpr double kLn10 = 2.302585092994045684;
}

std::string NGramModel::pack_key(std::span<const std::int32_t> ids) {
    std::string key(ids.size() * sizeof(std::int32_t), '\0');
    std::memcpy(key.data(), ids.data(), key.size());
    return key;
}

std::int32_t NGramModel::word_id(const std::string& word) const {
    auto it = vocab.find(word);
    return it == vocab.end() ? kUnkId : it->second;
}

std::vector<std::int32_t> NGramModel::map_tokens(
    const std::vector<std::string>& tokens) const {
    std::vector<std::int32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(word_id(t));
    return ids;
}

std::vector<std::int32_t> NGramModel::prediction_ids() const {
    std::vector<std::int32_t> ids;
    ids.reserve(id_to_word.size());
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(id_to_word.size()); ++i)
        if (i != kBosId) ids.push_back(i);
    return ids;
}

double NGramModel::logprob_id(std::span<const std::int32_t> hist,
                              std::int32_t w) const {
    if (hist.size() > static_cast<std::size_t>(order - 1))
        hist = hist.subspan(hist.size() - (order - 1));
    double backoff = 0.0;
    while (true) {
        std::vector<std::int32_t> key_ids(hist.begin(), hist.end());
        key_ids.push_back(w);
        const std::size_t k = key_ids.size();
        auto it = probs[k - 1].find(pack_key(key_ids));
        if (it != probs[k - 1].end()) return backoff + it->second;
        if (hist.empty()) {
            // Unigram table covers the whole prediction vocabulary, so
            // this is only reachable for ids outside it (e.g. <s>).
            return backoff - 99.0 * kLn10;
        }
        auto bow = bows[hist.size() - 1].find(pack_key(hist));
        if (bow != bows[hist.size() - 1].end()) backoff += bow->second;
        hist = hist.subspan(1);
    }
}

std::vector<std::string> lm_tokenize(const std::string& line) {
    return split_words(lowercase(line));
}

namespace {

using CountMap = std::unordered_map<std::string, std::uint64_t>;

struct KeyOps {
    static std::vector<std::int32_t> unpack(const std::string& key) {
        std::vector<std::int32_t> ids(key.size() / sizeof(std::int32_t));
        std::memcpy(ids.data(), key.data(), key.size());
        return ids;
    }
};

double estimate_discount(const CountMap& counts) {
    std::uint64_t n1 = 0;
    std::uint64_t n2 = 0;
    for (const auto& [key, c] : counts) {
        if (c == 1) ++n1;
        else if (c == 2) ++n2;
    }
    if (n1 == 0 || n2 == 0) return 0.5;  // degenerate count-of-counts
    return static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2);
}

}  // namespace

NGramModel train_kn(const std::vector<Document>& corpus,
                    const TrainOptions& opts) {
    if (opts.order < 2) throw std::invalid_argument("order must be >= 2");
    const int n = opts.order;

    // Pass 1: word frequencies.
    std::unordered_map<std::string, std::uint64_t> word_freq;
    std::uint64_t total_lines = 0;
    for (const auto& doc : corpus) {
        for (const auto& line : doc.lines) {
            ++total_lines;
            for (auto& w : lm_tokenize(line)) ++word_freq[w];
        }
    }
    if (total_lines == 0) throw std::invalid_argument("empty training corpus");

    NGramModel model;
    model.order = n;
    model.vocab["<unk>"] = NGramModel::kUnkId;
    model.vocab["<s>"] = NGramModel::kBosId;
    model.vocab["</s>"] = NGramModel::kEosId;
    std::vector<std::string> words;
    for (const auto& [w, c] : word_freq)
        if (c >= static_cast<std::uint64_t>(opts.min_count)) words.push_back(w);
    std::sort(words.begin(), words.end());
    model.id_to_word = {"<unk>", "<s>", "</s>"};
    for (const auto& w : words) {
        model.vocab[w] = static_cast<std::int32_t>(model.id_to_word.size());
        model.id_to_word.push_back(w);
    }

    // Pass 2: raw k-gram counts over padded sentences, k = 1..n.
    std::vector<CountMap> raw(n);
    for (const auto& doc : corpus) {
        for (const auto& line : doc.lines) {
            std::vector<std::int32_t> ids;
            ids.push_back(NGramModel::kBosId);
            for (const auto& t : lm_tokenize(line)) ids.push_back(model.word_id(t));
            ids.push_back(NGramModel::kEosId);
            for (int k = 1; k <= n; ++k) {
                for (std::size_t i = 0; i + k <= ids.size(); ++i) {
                    ++raw[k - 1][NGramModel::pack_key(
                        std::span(ids.data() + i, static_cast<std::size_t>(k)))];
                }
            }
        }
    }

    // Adjusted counts: highest order uses raw counts; lower orders use
    // continuation counts (distinct left extensions), except n-grams that
    // begin with <s>, which keep raw counts (nothing can precede them).
    std::vector<CountMap> adjusted(n);
    adjusted[n - 1] = raw[n - 1];
    for (int k = n - 1; k >= 1; --k) {
        CountMap cont;
        for (const auto& [key, c] : raw[k]) {  // (k+1)-grams
            cont[key.substr(sizeof(std::int32_t))] += 1;
        }
        for (const auto& [key, c] : raw[k - 1]) {
            std::int32_t first;
            std::memcpy(&first, key.data(), sizeof first);
            if (first == NGramModel::kBosId) {
                adjusted[k - 1][key] = c;
            } else {
                auto it = cont.find(key);
                adjusted[k - 1][key] = it == cont.end() ? 0 : it->second;
            }
        }
    }
    // <s> is not predicted; drop it from the unigram distribution.
    adjusted[0].erase(
        NGramModel::pack_key(std::span(&NGramModel::kBosId, 1)));

    model.discounts.resize(n);
    for (int k = 1; k <= n; ++k)
        model.discounts[k - 1] = estimate_discount(adjusted[k - 1]);

    model.probs.resize(n);
    model.bows.resize(n);

    // History totals and distinct-continuation counts per order.
    std::vector<CountMap> hist_total(n);  // A(h) = sum_w a(hw)
    std::vector<CountMap> hist_types(n);  // N1+(h.) = |{w : a(hw) > 0}|
    for (int k = 2; k <= n; ++k) {
        for (const auto& [key, a] : adjusted[k - 1]) {
            if (a == 0) continue;
            std::string hist = key.substr(0, key.size() - sizeof(std::int32_t));
            hist_total[k - 1][hist] += a;
            hist_types[k - 1][hist] += 1;
        }
    }

    // Unigrams: complete table over the prediction vocabulary with a
    // uniform 1/V floor carrying the discounted mass.
    {
        const double d = model.discounts[0];
        double total = 0.0;
        std::uint64_t types = 0;
        for (const auto& [key, a] : adjusted[0]) {
            total += static_cast<double>(a);
            if (a > 0) ++types;
        }
        const double vocab_size =
            static_cast<double>(model.id_to_word.size() - 1);  // minus <s>
        const double floor_mass = d * static_cast<double>(types) / total;
        for (std::int32_t w : model.prediction_ids()) {
            auto key = NGramModel::pack_key(std::span(&w, 1));
            double a = 0.0;
            if (auto it = adjusted[0].find(key); it != adjusted[0].end())
                a = static_cast<double>(it->second);
            double p = std::max(a - d, 0.0) / total + floor_mass / vocab_size;
            model.probs[0][key] = std::log(p);
        }
    }

    // Higher orders, built bottom-up so lower-order queries are available.
    for (int k = 2; k <= n; ++k) {
        const double d = model.discounts[k - 1];
        for (const auto& [key, a] : adjusted[k - 1]) {
            if (a == 0) continue;
            auto ids = KeyOps::unpack(key);
            std::string hist_key =
                key.substr(0, key.size() - sizeof(std::int32_t));
            const double total =
                static_cast<double>(hist_total[k - 1].at(hist_key));
            const double types =
                static_cast<double>(hist_types[k - 1].at(hist_key));
            const std::int32_t w = ids.back();
            const double lower = model.logprob_id(
                std::span(ids.data() + 1, ids.size() - 2), w);
            const double p = std::max(static_cast<double>(a) - d, 0.0) / total +
                             d * types / total * std::exp(lower);
            model.probs[k - 1][key] = std::log(p);
        }
        for (const auto& [hist_key, total] : hist_total[k - 1]) {
            const double types =
                static_cast<double>(hist_types[k - 1].at(hist_key));
            model.bows[hist_key.size() / sizeof(std::int32_t) - 1][hist_key] =
                std::log(d * types / static_cast<double>(total));
        }
    }
    return model;
}

namespace {

double sentence_logprob_ids(const NGramModel& model,
                            const std::vector<std::int32_t>& tokens) {
    std::vector<std::int32_t> seq;
    seq.reserve(tokens.size() + 2);
    seq.push_back(NGramModel::kBosId);
    seq.insert(seq.end(), tokens.begin(), tokens.end());
    seq.push_back(NGramModel::kEosId);
    double lp = 0.0;
    for (std::size_t i = 1; i < seq.size(); ++i)
        lp += model.logprob_id(std::span(seq.data(), i), seq[i]);
    return lp;
}

}  // namespace

double logprob(const NGramModel& model,
               const std::vector<std::string>& tokens) {
    return sentence_logprob_ids(model, model.map_tokens(tokens));
}

double cond_logprob(const NGramModel& model,
                    const std::vector<std::string>& context,
                    const std::vector<std::string>& continuation) {
    std::vector<std::int32_t> seq;
    seq.push_back(NGramModel::kBosId);
    for (const auto& t : context) seq.push_back(model.word_id(t));
    const std::size_t start = seq.size();
    for (const auto& t : continuation) seq.push_back(model.word_id(t));
    double lp = 0.0;
    for (std::size_t i = start; i < seq.size(); ++i)
        lp += model.logprob_id(std::span(seq.data(), i), seq[i]);
    return lp;
}

double perplexity(const NGramModel& model, const std::string& line) {
    auto tokens = lm_tokenize(line);
    const double lp = logprob(model, tokens);
    const double n = static_cast<double>(tokens.size() + 1);  // + </s>
    return std::exp(-lp / n);
}

std::optional<Document> perplexity_filter(const Document& doc,
                                          const NGramModel& model,
                                          double threshold,
                                          std::uint64_t* lines_removed) {
    Document out = doc;
    out.lines.clear();
    for (const auto& line : doc.lines) {
        if (perplexity(model, line) > threshold) {
            if (lines_removed) ++*lines_removed;
        } else {
            out.lines.push_back(line);
        }
    }
    if (out.lines.empty()) return std::nullopt;
    return out;
}

void save_arpa(const NGramModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out.precision(17);
    out << "\\data\\\n";
    // The unigram section also carries a <s> placeholder entry.
    for (int k = 1; k <= model.order; ++k)
        out << "ngram " << k << "="
            << model.probs[k - 1].size() + (k == 1 ? 1 : 0) << "\n";

    auto word_seq = [&](const std::string& key) {
        std::string s;
        for (std::int32_t id : KeyOps::unpack(key)) {
            if (!s.empty()) s.push_back(' ');
            s += model.id_to_word[id];
        }
        return s;
    };

    for (int k = 1; k <= model.order; ++k) {
        out << "\n\\" << k << "-grams:\n";
        std::vector<std::pair<std::string, std::string>> rows;  // (words, key)
        for (const auto& [key, lp] : model.probs[k - 1])
            rows.emplace_back(word_seq(key), key);
        if (k == 1) {
            std::int32_t bos = NGramModel::kBosId;
            rows.emplace_back("<s>",
                              NGramModel::pack_key(std::span(&bos, 1)));
        }
        std::sort(rows.begin(), rows.end());
        for (const auto& [wordstr, key] : rows) {
            double lp10 = -99.0;
            if (auto it = model.probs[k - 1].find(key);
                it != model.probs[k - 1].end())
                lp10 = it->second / kLn10;
            out << lp10 << '\t' << wordstr;
            if (k < model.order) {
                auto bow = model.bows[k - 1].find(key);
                if (bow != model.bows[k - 1].end())
                    out << '\t' << bow->second / kLn10;
            }
            out << '\n';
        }
    }
    out << "\n\\end\\\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

NGramModel load_arpa(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    NGramModel model;
    std::string line;
    std::vector<std::size_t> counts;
    // header
    while (std::getline(in, line)) {
        if (line.rfind("ngram ", 0) == 0) {
            auto eq = line.find('=');
            counts.push_back(std::stoull(line.substr(eq + 1)));
        } else if (line.rfind("\\1-grams:", 0) == 0) {
            break;
        }
    }
    if (counts.empty()) throw std::runtime_error("bad ARPA file: " + path);
    model.order = static_cast<int>(counts.size());
    model.probs.resize(model.order);
    model.bows.resize(model.order);
    model.discounts.assign(model.order, 0.0);

    model.vocab["<unk>"] = NGramModel::kUnkId;
    model.vocab["<s>"] = NGramModel::kBosId;
    model.vocab["</s>"] = NGramModel::kEosId;
    model.id_to_word = {"<unk>", "<s>", "</s>"};
    auto intern = [&](const std::string& w) {
        auto it = model.vocab.find(w);
        if (it != model.vocab.end()) return it->second;
        auto id = static_cast<std::int32_t>(model.id_to_word.size());
        model.vocab[w] = id;
        model.id_to_word.push_back(w);
        return id;
    };

    int k = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '\\') {
            if (line == "\\end\\") break;
            k = std::stoi(line.substr(1));
            continue;
        }
        std::istringstream row(line);
        double lp10;
        row >> lp10;
        std::vector<std::int32_t> ids;
        for (int i = 0; i < k; ++i) {
            std::string w;
            row >> w;
            ids.push_back(intern(w));
        }
        auto key = NGramModel::pack_key(ids);
        if (!(k == 1 && ids[0] == NGramModel::kBosId))
            model.probs[k - 1][key] = lp10 * kLn10;
        double bow10;
        if (row >> bow10) model.bows[k - 1][key] = bow10 * kLn10;
    }
    return model;
}

}  // namespace finpipe
