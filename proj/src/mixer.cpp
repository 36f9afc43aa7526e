#include "finpipe/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "finpipe/dedup.hpp"
#include "finpipe/murmur3.hpp"

using nlohmann::json;

namespace finpipe {

namespace {

constexpr std::int64_t kWeightScale = 1000000;  // weights as n / 10^6

std::int64_t weight_to_scaled(double w) {
    return std::llround(w * static_cast<double>(kWeightScale));
}

// round(numer / denom * 1000), half away from zero; exact in __int128
std::int64_t ratio_tenths_of(unsigned __int128 numer,
                             unsigned __int128 denom) {
    if (denom == 0) throw std::invalid_argument("zero total in ratio");
    unsigned __int128 scaled = numer * 1000;
    return static_cast<std::int64_t>((2 * scaled + denom) / (2 * denom));
}

}  // namespace

std::string format_tenths(std::int64_t tenths) {
    std::ostringstream out;
    out << tenths / 10 << '.' << std::abs(tenths % 10);
    return out.str();
}

MixtureTable mixture_table(
    const std::vector<std::string>& order,
    const std::map<std::string, std::uint64_t>& char_counts,
    const std::map<std::string, double>& weights) {
    for (const auto& [source, w] : weights)
        if (!char_counts.contains(source))
            throw std::runtime_error("weight for unknown source: " + source);

    if (order.empty()) throw std::runtime_error("empty mixture table");
    MixtureTable table;
    unsigned __int128 total = 0;
    unsigned __int128 weighted_total = 0;
    for (const auto& source : order) {
        auto it = char_counts.find(source);
        if (it == char_counts.end())
            throw std::runtime_error("no char count for source: " + source);
        const std::uint64_t chars = it->second;
        double weight = 1.0;
        if (auto w = weights.find(source); w != weights.end()) weight = w->second;
        if (weight <= 0) throw std::runtime_error("weight must be > 0: " + source);
        total += chars;
        weighted_total += static_cast<unsigned __int128>(chars) *
                          static_cast<unsigned __int128>(weight_to_scaled(weight));
        table.rows.push_back({source, chars, 0, weight, 0});
        table.total_chars += chars;
    }
    for (auto& row : table.rows) {
        row.ratio_tenths = ratio_tenths_of(row.chars, total);
        row.weighted_ratio_tenths = ratio_tenths_of(
            static_cast<unsigned __int128>(row.chars) *
                static_cast<unsigned __int128>(weight_to_scaled(row.weight)),
            weighted_total);
    }
    return table;
}

std::string MixtureTable::to_json() const {
    json rows_json = json::array();
    for (const auto& r : rows) {
        json j;
        j["source"] = r.source;
        j["chars"] = r.chars;
        j["ratio_pct"] = format_tenths(r.ratio_tenths);
        j["weight"] = r.weight;
        j["weighted_ratio_pct"] = format_tenths(r.weighted_ratio_tenths);
        rows_json.push_back(std::move(j));
    }
    json j;
    j["rows"] = std::move(rows_json);
    j["total_chars"] = total_chars;
    return j.dump();
}

std::string MixtureTable::to_text() const {
    std::ostringstream out;
    std::size_t name_w = 6;
    for (const auto& r : rows) name_w = std::max(name_w, r.source.size());
    auto line = [&](const std::string& src, const std::string& chars,
                    const std::string& ratio, const std::string& weight,
                    const std::string& wratio) {
        out << src << std::string(name_w + 2 - src.size(), ' ');
        for (const auto* col : {&chars, &ratio, &weight, &wratio})
            out << std::string(col->size() < 12 ? 12 - col->size() : 1, ' ')
                << *col;
        out << '\n';
    };
    line("source", "chars", "ratio%", "weight", "w.ratio%");
    for (const auto& r : rows) {
        std::ostringstream w;
        w << r.weight;
        line(r.source, std::to_string(r.chars), format_tenths(r.ratio_tenths),
             w.str(), format_tenths(r.weighted_ratio_tenths));
    }
    std::int64_t rt = 0;
    std::int64_t wt = 0;
    for (const auto& r : rows) {
        rt += r.ratio_tenths;
        wt += r.weighted_ratio_tenths;
    }
    line("TOTAL", std::to_string(total_chars), format_tenths(rt), "-",
         format_tenths(wt));
    return out.str();
}

SamplingPlan build_sampling_plan(
    const std::vector<SourceSpec>& specs,
    const std::map<std::string, std::vector<DocRef>>& docs_by_source,
    std::uint64_t seed) {
    SamplingPlan plan;
    plan.seed = seed;
    for (const auto& spec : specs) {
        auto it = docs_by_source.find(spec.name);
        if (it == docs_by_source.end())
            throw std::runtime_error("no documents for source: " + spec.name);
        const auto& docs = it->second;
        SourcePlan sp;
        sp.source = spec.name;
        sp.full_epochs = static_cast<std::uint64_t>(spec.weight);
        for (const auto& d : docs) sp.total_chars += d.chars;
        const double frac = spec.weight - std::floor(spec.weight);
        sp.planned_chars = sp.full_epochs * sp.total_chars;
        if (frac > 0 && !docs.empty()) {
            std::vector<std::size_t> idx(docs.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::mt19937_64 rng(seed ^ murmur3_x64_64(spec.name));
            std::shuffle(idx.begin(), idx.end(), rng);
            const double target =
                frac * static_cast<double>(sp.total_chars);
            std::uint64_t cum = 0;
            for (std::size_t i : idx) {
                if (static_cast<double>(cum) >= target) break;
                sp.fractional_doc_ids.push_back(docs[i].id);
                cum += docs[i].chars;
            }
            sp.planned_chars += cum;
        }
        plan.sources.push_back(std::move(sp));
    }
    return plan;
}

std::string SamplingPlan::to_json() const {
    json j;
    j["version"] = 1;
    j["seed"] = seed;
    json srcs = json::array();
    for (const auto& sp : sources) {
        json s;
        s["source"] = sp.source;
        s["full_epochs"] = sp.full_epochs;
        s["fractional_doc_ids"] = sp.fractional_doc_ids;
        s["total_chars"] = sp.total_chars;
        s["planned_chars"] = sp.planned_chars;
        srcs.push_back(std::move(s));
    }
    j["sources"] = std::move(srcs);
    return j.dump(1);
}

SamplingPlan SamplingPlan::from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.value("version", 0) != 1)
        throw std::runtime_error("unsupported sampling plan version");
    SamplingPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("sources")) {
        SourcePlan sp;
        sp.source = s.at("source").get<std::string>();
        sp.full_epochs = s.at("full_epochs").get<std::uint64_t>();
        sp.fractional_doc_ids =
            s.at("fractional_doc_ids").get<std::vector<std::string>>();
        sp.total_chars = s.at("total_chars").get<std::uint64_t>();
        sp.planned_chars = s.at("planned_chars").get<std::uint64_t>();
        plan.sources.push_back(std::move(sp));
    }
    return plan;
}

TokenBudget token_budget(
    const SamplingPlan& plan, const Tokenizer& tok,
    const std::map<std::string, std::vector<Document>>& docs_by_source) {
    TokenBudget budget;
    for (const auto& sp : plan.sources) {
        auto it = docs_by_source.find(sp.source);
        if (it == docs_by_source.end())
            throw std::runtime_error("no documents for source: " + sp.source);
        std::unordered_map<std::string, std::uint64_t> tokens_by_id;
        std::uint64_t epoch_tokens = 0;
        std::uint64_t chars = 0;
        for (const auto& doc : it->second) {
            const std::uint64_t t = tok.encode(doc.text()).size();
            tokens_by_id[doc.id] = t;
            epoch_tokens += t;
            chars += doc.char_count();
        }
        std::uint64_t total = sp.full_epochs * epoch_tokens;
        std::uint64_t planned_chars = sp.full_epochs * chars;
        for (const auto& id : sp.fractional_doc_ids) {
            auto t = tokens_by_id.find(id);
            if (t == tokens_by_id.end())
                throw std::runtime_error("plan references unknown doc: " + id);
            total += t->second;
        }
        planned_chars += sp.planned_chars - sp.full_epochs * sp.total_chars;
        budget.tokens_by_source[sp.source] = total;
        budget.tokens_per_char[sp.source] =
            planned_chars ? static_cast<double>(total) /
                                static_cast<double>(planned_chars)
                          : 0.0;
        budget.total_tokens += total;
    }
    return budget;
}

OverlapReport corpus_overlap(const std::vector<Document>& a,
                             const std::vector<Document>& b,
                             std::uint64_t sample, std::uint64_t seed) {
    OverlapReport report;
    std::unordered_map<std::string, const Document*> by_url_a;
    std::unordered_map<std::string, const Document*> by_url_b;
    for (const auto& d : a)
        if (d.url) by_url_a[*d.url] = &d;
    for (const auto& d : b)
        if (d.url) by_url_b[*d.url] = &d;
    report.urls_a = by_url_a.size();
    report.urls_b = by_url_b.size();

    std::vector<std::string> common;
    for (const auto& [url, doc] : by_url_a)
        if (by_url_b.contains(url)) common.push_back(url);
    std::sort(common.begin(), common.end());
    report.common_urls = common.size();
    if (report.urls_a)
        report.url_overlap_a_in_b = static_cast<double>(common.size()) /
                                    static_cast<double>(report.urls_a);
    if (report.urls_b)
        report.url_overlap_b_in_a = static_cast<double>(common.size()) /
                                    static_cast<double>(report.urls_b);
    if (common.empty()) return report;  // n-gram phase skipped

    if (sample > common.size())
        throw std::invalid_argument("sample exceeds common URL count");
    std::mt19937_64 rng(seed);
    std::shuffle(common.begin(), common.end(), rng);
    common.resize(sample);
    report.ngram_phase_run = true;
    report.sampled_urls = sample;

    auto doc_ngrams = [](const Document& doc) {
        std::unordered_set<std::uint64_t> grams;
        for (std::uint64_t h : line_ngrams(doc.text(), 5)) grams.insert(h);
        return grams;
    };
    double sum_ab = 0.0;
    double sum_ba = 0.0;
    for (const auto& url : common) {
        auto ga = doc_ngrams(*by_url_a.at(url));
        auto gb = doc_ngrams(*by_url_b.at(url));
        std::uint64_t inter = 0;
        for (std::uint64_t h : ga)
            if (gb.contains(h)) ++inter;
        sum_ab += ga.empty() ? 0.0
                             : static_cast<double>(inter) /
                                   static_cast<double>(ga.size());
        sum_ba += gb.empty() ? 0.0
                             : static_cast<double>(inter) /
                                   static_cast<double>(gb.size());
    }
    report.mean_containment_a_in_b = sum_ab / static_cast<double>(sample);
    report.mean_containment_b_in_a = sum_ba / static_cast<double>(sample);
    return report;
}

std::string OverlapReport::to_json() const {
    json j;
    j["urls_a"] = urls_a;
    j["urls_b"] = urls_b;
    j["common_urls"] = common_urls;
    j["url_overlap_a_in_b"] = url_overlap_a_in_b;
    j["url_overlap_b_in_a"] = url_overlap_b_in_a;
    j["ngram_phase_run"] = ngram_phase_run;
    j["sampled_urls"] = sampled_urls;
    j["mean_containment_a_in_b"] = mean_containment_a_in_b;
    j["mean_containment_b_in_a"] = mean_containment_b_in_a;
    return j.dump();
}

}  // namespace finpipe
