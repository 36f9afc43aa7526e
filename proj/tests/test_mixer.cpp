#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <string>
#include <vector>

#include "finpipe/mixer.hpp"

using namespace finpipe;

namespace {

Document make_doc(std::string id, std::string source,
                  std::vector<std::string> lines) {
    Document d;
    d.id = std::move(id);
    d.source = std::move(source);
    d.lines = std::move(lines);
    return d;
}

}  // namespace

TEST_CASE("tenths formatting") {
    CHECK(format_tenths(0) == "0.0");
    CHECK(format_tenths(5) == "0.5");
    CHECK(format_tenths(227) == "22.7");
    CHECK(format_tenths(1000) == "100.0");
    CHECK(format_tenths(99) == "9.9");
}

TEST_CASE("ratios round half away from zero") {
    // 1/16 = 6.25% -> 62.5 tenths -> 63
    auto t = mixture_table({"a", "b"}, {{"a", 1}, {"b", 15}}, {});
    CHECK(t.rows[0].ratio_tenths == 63);
    CHECK(t.rows[1].ratio_tenths == 938);  // 93.75 -> 938
    // exact thirds: 33.333 -> 333
    auto t2 = mixture_table({"a", "b", "c"}, {{"a", 1}, {"b", 1}, {"c", 1}}, {});
    for (const auto& r : t2.rows) CHECK(r.ratio_tenths == 333);
}

TEST_CASE("weighted ratios use exact arithmetic with fractional weights") {
    // weights 1.5 and 0.5 on equal masses: 75% / 25%
    auto t = mixture_table({"a", "b"}, {{"a", 100}, {"b", 100}},
                           {{"a", 1.5}, {"b", 0.5}});
    CHECK(t.rows[0].weighted_ratio_tenths == 750);
    CHECK(t.rows[1].weighted_ratio_tenths == 250);
    CHECK(t.rows[0].ratio_tenths == 500);
}

// The published eleven-source corpus: counts in units of 0.1B chars with
// the per-source epoch weights. Every weighted share reproduces the
// published table exactly under half-away-from-zero rounding.
TEST_CASE("eleven-source reference table") {
    const std::vector<std::string> order = {
        "parsebank", "mc4",   "cc-fi",  "fiwiki", "lonnrot", "yle",
        "stt",       "epub",  "lehdet", "suomi24", "reddit-fi"};
    const std::map<std::string, std::uint64_t> counts = {
        {"parsebank", 350}, {"mc4", 463},    {"cc-fi", 796}, {"fiwiki", 8},
        {"lonnrot", 8},     {"yle", 16},     {"stt", 22},    {"epub", 135},
        {"lehdet", 58},     {"suomi24", 206}, {"reddit-fi", 7}};
    const std::map<std::string, double> weights = {
        {"parsebank", 1.5}, {"mc4", 1.0},    {"cc-fi", 1.0}, {"fiwiki", 3.0},
        {"lonnrot", 3.0},   {"yle", 2.0},    {"stt", 2.0},   {"epub", 1.0},
        {"lehdet", 1.0},    {"suomi24", 1.0}, {"reddit-fi", 1.0}};
    auto t = mixture_table(order, counts, weights);
    REQUIRE(t.rows.size() == 11);
    CHECK(t.total_chars == 2069);

    const std::vector<std::int64_t> expected_weighted = {
        227, 200, 344, 10, 10, 14, 19, 58, 25, 89, 3};
    const std::vector<std::int64_t> expected_raw = {
        169, 224, 385, 4, 4, 8, 11, 65, 28, 100, 3};
    for (std::size_t i = 0; i < 11; ++i) {
        CHECK(t.rows[i].weighted_ratio_tenths == expected_weighted[i]);
        CHECK(t.rows[i].ratio_tenths == expected_raw[i]);
    }

    auto text = t.to_text();
    CHECK(text.find("parsebank") != std::string::npos);
    CHECK(text.find("22.7") != std::string::npos);
    CHECK(text.find("TOTAL") != std::string::npos);
}

TEST_CASE("mixture table input validation") {
    CHECK_THROWS(mixture_table({"a"}, {{"a", 1}}, {{"tuntematon", 1.0}}));
    CHECK_THROWS(mixture_table({"a", "b"}, {{"a", 1}}, {}));  // missing count
    CHECK_THROWS(mixture_table({"a"}, {{"a", 1}}, {{"a", 0.0}}));
    CHECK_THROWS(mixture_table({}, {}, {}));  // zero total
}

TEST_CASE("sampling plan: integer weights are whole epochs") {
    SourceSpec spec{"kirjat", {}, 2.0, false, false};
    std::map<std::string, std::vector<DocRef>> docs = {
        {"kirjat", {{"d1", 100}, {"d2", 50}}}};
    auto plan = build_sampling_plan({spec}, docs, 7);
    REQUIRE(plan.sources.size() == 1);
    CHECK(plan.sources[0].full_epochs == 2);
    CHECK(plan.sources[0].fractional_doc_ids.empty());
    CHECK(plan.sources[0].total_chars == 150);
    CHECK(plan.sources[0].planned_chars == 300);
}

TEST_CASE("sampling plan: fractional weight takes a char-mass prefix") {
    SourceSpec spec{"uutiset", {}, 1.5, false, false};
    std::map<std::string, std::vector<DocRef>> docs;
    for (int i = 0; i < 100; ++i)
        docs["uutiset"].push_back({"d" + std::to_string(i), 10});
    auto plan = build_sampling_plan({spec}, docs, 7);
    const auto& sp = plan.sources[0];
    CHECK(sp.full_epochs == 1);
    // target is half of 1000 chars; prefix stops as soon as it is reached
    std::uint64_t frac_chars = sp.fractional_doc_ids.size() * 10;
    CHECK(frac_chars >= 500);
    CHECK(frac_chars < 510);
    CHECK(sp.planned_chars == 1000 + frac_chars);
}

TEST_CASE("sampling plan is deterministic in the seed") {
    SourceSpec spec{"s", {}, 1.3, false, false};
    std::map<std::string, std::vector<DocRef>> docs;
    for (int i = 0; i < 50; ++i)
        docs["s"].push_back({"d" + std::to_string(i), 5 + (i % 7)});
    auto a = build_sampling_plan({spec}, docs, 42);
    auto b = build_sampling_plan({spec}, docs, 42);
    CHECK(a.to_json() == b.to_json());
    auto c = build_sampling_plan({spec}, docs, 43);
    CHECK(a.sources[0].fractional_doc_ids != c.sources[0].fractional_doc_ids);
}

TEST_CASE("sampling plan json round trip") {
    SourceSpec spec{"s", {}, 2.5, false, false};
    std::map<std::string, std::vector<DocRef>> docs = {
        {"s", {{"x", 30}, {"y", 20}, {"z", 10}}}};
    auto plan = build_sampling_plan({spec}, docs, 1);
    auto back = SamplingPlan::from_json(plan.to_json());
    CHECK(back.to_json() == plan.to_json());
    CHECK_THROWS(SamplingPlan::from_json(R"({"version":9,"seed":0,"sources":[]})"));
}

TEST_CASE("token budget counts documents with multiplicity") {
    std::vector<Document> corpus = {
        make_doc("a", "s", {"yksi kaksi kolme"}),
        make_doc("b", "s", {"nelja viisi"})};
    auto tok = train_bpe(corpus, {4 + 256 + 5, 0});
    std::map<std::string, std::vector<Document>> by_source = {{"s", corpus}};

    auto tokens_of = [&](const Document& d) {
        return static_cast<std::uint64_t>(tok.encode(d.text()).size());
    };
    const std::uint64_t epoch = tokens_of(corpus[0]) + tokens_of(corpus[1]);

    SamplingPlan plan;
    plan.sources.push_back({"s", 1, {}, 29, 29});
    auto b1 = token_budget(plan, tok, by_source);
    CHECK(b1.total_tokens == epoch);

    // doubling the epochs doubles the budget exactly
    plan.sources[0].full_epochs = 2;
    plan.sources[0].planned_chars = 58;
    auto b2 = token_budget(plan, tok, by_source);
    CHECK(b2.total_tokens == 2 * epoch);

    // a fractional pick adds exactly that document's tokens
    plan.sources[0].fractional_doc_ids = {"b"};
    auto b3 = token_budget(plan, tok, by_source);
    CHECK(b3.total_tokens == 2 * epoch + tokens_of(corpus[1]));

    plan.sources[0].fractional_doc_ids = {"ei-ole"};
    CHECK_THROWS(token_budget(plan, tok, by_source));
}

TEST_CASE("overlap: url phase, hand-enumerated") {
    auto with_url = [](std::string id, std::string url, std::string text) {
        auto d = make_doc(std::move(id), "s", {std::move(text)});
        d.url = std::move(url);
        return d;
    };
    std::vector<Document> a = {
        with_url("a1", "u1", "yksi kaksi kolme nelja viisi kuusi"),
        with_url("a2", "u2", "toinen juttu kokonaan eri sanoilla tassa"),
        with_url("a3", "u3", "yhteinen sivu jonka sisalto on sama"),
        with_url("a4", "u4", "melkein sama sisalto mutta yksi sana eroaa")};
    std::vector<Document> b = {
        with_url("b3", "u3", "yhteinen sivu jonka sisalto on sama"),
        with_url("b4", "u4", "melkein sama sisalto mutta yksi sana toinen"),
        with_url("b5", "u5", "vain toisessa korpuksessa oleva sivu"),
        with_url("b6", "u6", "viela yksi sivu toisessa korpuksessa")};

    auto r = corpus_overlap(a, b, 2, 123);
    CHECK(r.urls_a == 4);
    CHECK(r.urls_b == 4);
    CHECK(r.common_urls == 2);
    CHECK(r.url_overlap_a_in_b == doctest::Approx(0.5));
    CHECK(r.url_overlap_b_in_a == doctest::Approx(0.5));
    CHECK(r.ngram_phase_run);
    CHECK(r.sampled_urls == 2);
    // u3: identical 7-word text -> all 3 5-grams shared -> containment 1.
    // u4: 7 words, last differs -> 3 grams each; the two grams not
    // touching the last word are shared -> containment 2/3 each way.
    // Mean over both sampled urls: (1 + 2/3) / 2 = 5/6.
    CHECK(r.mean_containment_a_in_b == doctest::Approx(5.0 / 6.0));
    CHECK(r.mean_containment_b_in_a == doctest::Approx(5.0 / 6.0));

    CHECK_THROWS(corpus_overlap(a, b, 3, 1));  // sample > common
}

TEST_CASE("overlap with no common urls skips the ngram phase") {
    auto d1 = make_doc("a", "s", {"jotain"});
    d1.url = "u1";
    auto d2 = make_doc("b", "s", {"muuta"});
    d2.url = "u2";
    auto r = corpus_overlap({d1}, {d2}, 0, 1);
    CHECK(r.common_urls == 0);
    CHECK_FALSE(r.ngram_phase_run);
    CHECK(r.url_overlap_a_in_b == 0.0);
}
