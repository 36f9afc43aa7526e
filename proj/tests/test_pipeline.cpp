#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "finpipe/ngram_lm.hpp"
#include "finpipe/pipeline.hpp"

namespace fs = std::filesystem;
using namespace finpipe;

namespace {

std::string fixture(const char* name) {
    return std::string(FIXTURES_DIR) + "/" + name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct Workspace {
    fs::path root;

    Workspace() {
        static int counter = 0;
        root = fs::temp_directory_path() /
               ("finpipe_pipe_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(root);
    }
    ~Workspace() { fs::remove_all(root); }

    std::string write_jsonl(const std::string& name,
                            const std::vector<Document>& docs) {
        auto p = (root / name).string();
        write_documents(docs, p);
        return p;
    }
};

Document make_doc(std::string id, std::string source,
                  std::vector<std::string> lines) {
    Document d;
    d.id = std::move(id);
    d.source = std::move(source);
    d.lines = std::move(lines);
    return d;
}

// Long clean lines that sail through the heuristics. Every line appears
// in exactly one document so the onion stage has nothing to trim.
const std::vector<std::string> kProse = {
    "kissa istuu ikkunalla ja katselee pihalle koko pitkan paivan ajan",
    "koira juoksee pihalla ja haukkuu iloisesti kaikille ohikulkijoille",
    "jarven rannalla kasvaa korkeita puita joiden latvat huojuvat tuulessa",
    "kaupungin kirjastossa ihmiset lukevat kirjoja ja opiskelevat hiljaa",
    "kesalla aurinko paistaa pitkaan ja illat ovat valoisia seka lampimia",
    "talvella lunta sataa paljon ja lapset rakentavat lumiukkoja pihalle",
    "opettaja kertoo oppilaille tarinan vanhasta merenkulkijasta aamulla",
    "perheen kanssa matkustamme junalla pohjoiseen katsomaan revontulia",
    "naapurin lapset pelaavat jalkapalloa kentalla aina koulun jalkeen",
    "vanha kalastaja korjaa verkkojaan sataman laiturilla joka aamu",
    "syksylla lehdet putoavat puista ja peittavat polut keltaisella matolla",
    "torilla myydaan tuoreita marjoja seka vihanneksia kesan lopulla",
    "museon nayttelyssa esitellaan seudun historiaa valokuvien avulla",
    "leipuri nostaa uunista tuoreet sampylat ennen auringonnousua",
    "saaristossa lautta kuljettaa asukkaita mantereelle kahdesti paivassa",
    "kirjailija viimeistelee romaaninsa viimeista lukua mokin hiljaisuudessa",
};

const std::string kToxicLine =
    "tama lause sisaltaa sanan myrkky mutta on muuten tavallista tekstia";
const std::string kPiiLine =
    "yhteytta saa osoitteesta testi.osoite@esimerkki.fi arkisin paivalla";

Document prose_doc(std::string id, std::string source, int a, int b, int c) {
    return make_doc(std::move(id), std::move(source),
                    {kProse[a], kProse[b], kProse[c]});
}

// A corpus with exact duplicates, a toxic doc, PII, and junk lines.
struct Inputs {
    std::string uutiset_path;
    std::string kirjat_path;
    std::string lm_path;
};

Inputs build_inputs(Workspace& ws) {
    std::vector<Document> uutiset = {
        prose_doc("u1", "uutiset", 0, 1, 2),
        prose_doc("u2", "uutiset", 3, 4, 5),
        prose_doc("u2kopio", "uutiset", 3, 4, 5),  // exact duplicate of u2
        make_doc("u_toxic", "uutiset", {kProse[6], kToxicLine, kProse[7]}),
        make_doc("u_pii", "uutiset", {kProse[8], kPiiLine, kProse[9]}),
        make_doc("u_junk", "uutiset",
                 {"!!!! ???? %%%% &&&& (((( )))) ==== ++++ $$$$ @@@@"}),
    };
    std::vector<Document> kirjat = {
        prose_doc("k1", "kirjat", 10, 11, 12),
        make_doc("k_gibberish", "kirjat",
                 {kProse[13], "zxqv wfjp lkhg mnbt rdcs yuio zxqv wfjp lkhg"
                              " mnbt rdcs yuio zxqv wfjp lkhg mnbt qqqq wwww",
                  kProse[14]}),
    };
    Inputs in;
    in.uutiset_path = ws.write_jsonl("uutiset.jsonl", uutiset);
    in.kirjat_path = ws.write_jsonl("kirjat.jsonl", kirjat);

    // The perplexity model knows every fluent line (including the toxic
    // and PII ones) but not the gibberish, so only gibberish scores high.
    std::vector<Document> train;
    for (int i = 0; i < 16; ++i)
        train.push_back(make_doc("t" + std::to_string(i), "train",
                                 {kProse[i]}));
    train.push_back(make_doc("t16", "train", {kToxicLine}));
    train.push_back(make_doc("t17", "train", {kPiiLine}));
    auto model = train_kn(train, {3, 1});
    in.lm_path = (ws.root / "model.arpa").string();
    save_arpa(model, in.lm_path);
    return in;
}

PipelineConfig base_config(const Inputs& in, const std::string& outdir) {
    PipelineConfig cfg;
    cfg.sources = {
        {"uutiset", {in.uutiset_path}, 1.5, false, false},
        {"kirjat", {in.kirjat_path}, 1.0, true, true},  // exempt source
    };
    cfg.heuristics.min_doc_chars = 60;
    cfg.heuristics.min_avg_line_length = 20;
    cfg.lm_path = in.lm_path;
    cfg.ppl_threshold = 20.0;
    cfg.lexicon_path = fixture("toxicity_lexicon.txt");
    cfg.toxicity_threshold = 0.5;
    cfg.seed = 77;
    cfg.seed_set = true;
    cfg.output_dir = outdir;
    return cfg;
}

const StageReport& report_of(const PipelineResult& r, Stage stage,
                             const std::string& source) {
    for (const auto& rep : r.reports)
        if (rep.stage == stage && rep.source == source) return rep;
    FAIL("missing report");
    static StageReport dummy;
    return dummy;
}

}  // namespace

TEST_CASE("full run: stage effects, conservation, exemptions") {
    Workspace ws;
    auto in = build_inputs(ws);
    auto cfg = base_config(in, (ws.root / "out").string());
    auto result = run_pipeline(cfg);

    // 6 stages x 2 sources
    CHECK(result.reports.size() == 12);
    CHECK(result.read_errors_by_source.at("uutiset") == 0);

    // exact dedup removed the copy of u2
    const auto& ed = report_of(result, Stage::exact_dedup, "uutiset");
    CHECK(ed.docs_in == 6);
    CHECK(ed.docs_out == 5);
    CHECK(ed.removal_reasons.at("duplicate_fingerprint") == 1);

    // heuristics removed the symbol-soup doc
    const auto& h = report_of(result, Stage::heuristic, "uutiset");
    CHECK(h.removal_reasons.size() == 1);

    // toxicity removed the lexicon hit from the non-exempt source only
    const auto& tox = report_of(result, Stage::toxicity, "uutiset");
    CHECK(tox.removal_reasons.at("toxic") == 1);
    const auto& tox_k = report_of(result, Stage::toxicity, "kirjat");
    CHECK(tox_k.docs_in == tox_k.docs_out);

    // perplexity removed the gibberish line, but kirjat is exempt
    const auto& ppl_k = report_of(result, Stage::perplexity, "kirjat");
    CHECK(ppl_k.chars_in == ppl_k.chars_out);
    bool gibberish_alive = false;
    for (const auto& d : result.corpus_by_source.at("kirjat"))
        if (d.id == "k_gibberish" && d.lines.size() == 3) gibberish_alive = true;
    CHECK(gibberish_alive);

    // PII was masked
    bool masked = false;
    for (const auto& d : result.corpus_by_source.at("uutiset"))
        if (d.text().find("[EMAIL]") != std::string::npos) masked = true;
    CHECK(masked);

    // conservation per stage: in == out + removed, and chained docs_out
    const Stage order[] = {Stage::exact_dedup, Stage::onion_dedup,
                           Stage::heuristic,   Stage::perplexity,
                           Stage::toxicity,    Stage::pii_mask};
    for (const auto& source : {"uutiset", "kirjat"}) {
        for (std::size_t i = 0; i < 6; ++i) {
            const auto& r = report_of(result, order[i], source);
            std::uint64_t removed = 0;
            for (const auto& [reason, c] : r.removal_reasons)
                if (reason != "masked_chars" && reason != "high_ppl_lines" &&
                    reason != "classifier_error_passthrough")
                    removed += c;
            CHECK(r.docs_in == r.docs_out + removed);
            if (i > 0)
                CHECK(report_of(result, order[i - 1], source).docs_out ==
                      r.docs_in);
        }
        CHECK(result.corpus_by_source.at(source).size() ==
              report_of(result, Stage::pii_mask, source).docs_out);
    }

    // outputs exist
    CHECK(fs::exists(fs::path(cfg.output_dir) / "corpus" / "uutiset.jsonl"));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "reports.json"));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "mixture.json"));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "sampling_plan.json"));
    CHECK_FALSE(fs::exists(fs::path(cfg.output_dir) / ".lock"));

    // mixture and plan reflect the weights
    REQUIRE(result.mixture.rows.size() == 2);
    CHECK(result.mixture.rows[0].source == "uutiset");
    CHECK(result.mixture.rows[0].weight == 1.5);
    REQUIRE(result.plan.has_value());
    CHECK(result.plan->sources[0].full_epochs == 1);
    CHECK_FALSE(result.plan->sources[0].fractional_doc_ids.empty());
}

TEST_CASE("two identical runs produce byte-identical outputs") {
    Workspace ws;
    auto in = build_inputs(ws);
    auto cfg1 = base_config(in, (ws.root / "out1").string());
    auto cfg2 = base_config(in, (ws.root / "out2").string());
    run_pipeline(cfg1);
    run_pipeline(cfg2);
    for (const char* rel :
         {"corpus/uutiset.jsonl", "corpus/kirjat.jsonl", "reports.json",
          "mixture.json", "sampling_plan.json"}) {
        CHECK(slurp(fs::path(cfg1.output_dir) / rel) ==
              slurp(fs::path(cfg2.output_dir) / rel));
    }
}

TEST_CASE("resume reuses checkpoints instead of recomputing") {
    Workspace ws;
    auto in = build_inputs(ws);
    auto cfg = base_config(in, (ws.root / "out").string());
    run_pipeline(cfg);
    auto first = slurp(fs::path(cfg.output_dir) / "corpus" / "uutiset.jsonl");

    // sabotage the input; a resumed run must still serve checkpointed data
    std::ofstream(in.uutiset_path, std::ios::trunc)
        << R"({"id":"x","source":"uutiset","text":"korvattu kokonaan"})"
        << '\n';
    run_pipeline(cfg, true);
    CHECK(slurp(fs::path(cfg.output_dir) / "corpus" / "uutiset.jsonl") ==
          first);

    // a fresh (non-resume) run in a new directory sees the new input
    auto cfg2 = base_config(in, (ws.root / "out2").string());
    auto r2 = run_pipeline(cfg2);
    CHECK(report_of(r2, Stage::exact_dedup, "uutiset").docs_in == 1);
}

TEST_CASE("changed config invalidates checkpoints on resume") {
    Workspace ws;
    auto in = build_inputs(ws);
    auto cfg = base_config(in, (ws.root / "out").string());
    auto r1 = run_pipeline(cfg);
    CHECK(report_of(r1, Stage::toxicity, "uutiset")
              .removal_reasons.count("toxic") == 1);

    // raising the threshold changes the fingerprint: stages recompute
    auto cfg2 = cfg;
    cfg2.toxicity_threshold = 2.0;  // nothing reaches it
    auto r2 = run_pipeline(cfg2, true);
    const auto& tox = report_of(r2, Stage::toxicity, "uutiset");
    CHECK(tox.removal_reasons.count("toxic") == 0);
    CHECK(tox.docs_in == tox.docs_out);
}

TEST_CASE("lock file blocks concurrent non-resume runs") {
    Workspace ws;
    auto in = build_inputs(ws);
    auto cfg = base_config(in, (ws.root / "out").string());
    fs::create_directories(cfg.output_dir);
    std::ofstream(fs::path(cfg.output_dir) / ".lock") << "held\n";
    CHECK_THROWS(run_pipeline(cfg));
    CHECK_NOTHROW(run_pipeline(cfg, true));
}

TEST_CASE("disabled stages are identity and produce no reports") {
    Workspace ws;
    auto in = build_inputs(ws);
    auto cfg = base_config(in, (ws.root / "out").string());
    cfg.stages = {false, false, false, false, false, false};
    auto r = run_pipeline(cfg);
    CHECK(r.reports.empty());
    // even the exact duplicate survives
    CHECK(r.corpus_by_source.at("uutiset").size() == 6);
}

TEST_CASE("cross-source duplicate lines are trimmed via shared state") {
    Workspace ws;
    std::vector<Document> a = {prose_doc("a1", "eka", 0, 1, 2)};
    std::vector<Document> b = {
        // same lines as a1 in a different order: not an exact duplicate,
        // but every line is flagged by the shared n-gram state
        make_doc("b1", "toka", {kProse[2], kProse[0], kProse[1]}),
        prose_doc("b2", "toka", 5, 6, 7),
    };
    PipelineConfig cfg;
    cfg.sources = {{"eka", {ws.write_jsonl("a.jsonl", a)}, 1.0, true, true},
                   {"toka", {ws.write_jsonl("b.jsonl", b)}, 1.0, true, true}};
    cfg.stages = {true, true, false, false, false, false};
    cfg.seed = 1;
    cfg.seed_set = true;
    cfg.output_dir = (ws.root / "out").string();
    auto r = run_pipeline(cfg);
    CHECK(r.corpus_by_source.at("eka").size() == 1);
    REQUIRE(r.corpus_by_source.at("toka").size() == 1);
    CHECK(r.corpus_by_source.at("toka")[0].id == "b2");
    CHECK(report_of(r, Stage::onion_dedup, "toka")
              .removal_reasons.at("duplicate_document") == 1);
}

TEST_CASE("tokenizer training and token budget outputs") {
    Workspace ws;
    auto in = build_inputs(ws);
    auto cfg = base_config(in, (ws.root / "out").string());
    cfg.train_tokenizer = true;
    cfg.tokenizer.target_vocab = 4 + 256 + 32;
    auto r = run_pipeline(cfg);
    CHECK(r.tokenizer_vocab > 260);
    CHECK(r.tokenizer_vocab <= 4 + 256 + 32);
    CHECK(fs::exists(fs::path(cfg.output_dir) / "tokenizer.json"));
    CHECK(fs::exists(fs::path(cfg.output_dir) / "token_budget.json"));
    auto budget = slurp(fs::path(cfg.output_dir) / "token_budget.json");
    CHECK(budget.find("total_tokens") != std::string::npos);
}

TEST_CASE("config file loading and validation") {
    Workspace ws;
    auto in = build_inputs(ws);
    auto cfg_path = (ws.root / "config.json").string();
    {
        std::ofstream out(cfg_path);
        out << R"({
  "sources": [
    {"name": "uutiset", "paths": [")" << in.uutiset_path << R"("], "weight": 1.5},
    {"name": "kirjat", "paths": [")" << in.kirjat_path
            << R"("], "weight": 1.0, "exempt_perplexity": true,
      "exempt_toxicity": true}
  ],
  "heuristics": {"min_doc_chars": 60, "min_avg_line_length": 20},
  "perplexity": {"model_path": ")" << in.lm_path << R"(", "threshold": 20.0},
  "toxicity": {"lexicon_path": ")" << fixture("toxicity_lexicon.txt") << R"("},
  "seed": 77,
  "output_dir": ")" << (ws.root / "out").string() << R"("
})";
    }
    auto cfg = load_config(cfg_path);
    CHECK(cfg.sources.size() == 2);
    CHECK(cfg.sources[0].weight == 1.5);
    CHECK(cfg.sources[1].exempt_toxicity);
    CHECK(cfg.ppl_threshold == 20.0);
    CHECK(cfg.seed == 77);
    CHECK(validate_config(cfg_path).empty());

    // the file-driven run matches the programmatic config
    auto r = run_pipeline(cfg);
    CHECK(r.reports.size() == 12);
}

TEST_CASE("validation catches the usual mistakes") {
    Workspace ws;
    auto in = build_inputs(ws);
    auto good = base_config(in, (ws.root / "out").string());
    CHECK(validate_config_object(good).empty());

    auto no_seed = good;
    no_seed.seed_set = false;
    CHECK_FALSE(validate_config_object(no_seed).empty());

    auto no_out = good;
    no_out.output_dir.clear();
    CHECK_FALSE(validate_config_object(no_out).empty());

    auto missing_path = good;
    missing_path.sources[0].paths = {"/no/such/file.jsonl"};
    CHECK_FALSE(validate_config_object(missing_path).empty());

    auto bad_weight = good;
    bad_weight.sources[0].weight = 0.0;
    CHECK_FALSE(validate_config_object(bad_weight).empty());

    auto dup_path = good;
    dup_path.sources[1].paths = good.sources[0].paths;
    CHECK_FALSE(validate_config_object(dup_path).empty());

    auto no_model = good;
    no_model.lm_path = "/no/such/model.arpa";
    CHECK_FALSE(validate_config_object(no_model).empty());

    // ...but a missing model is fine when every source is exempt
    auto exempt = no_model;
    for (auto& s : exempt.sources) s.exempt_perplexity = true;
    exempt.lm_path.clear();
    CHECK(validate_config_object(exempt).empty());

    CHECK_THROWS(run_pipeline(no_seed));
    CHECK_FALSE(validate_config("/no/such/config.json").empty());
}

TEST_CASE("malformed input lines are counted per source") {
    Workspace ws;
    auto path = (ws.root / "m.jsonl").string();
    {
        std::ofstream out(path);
        out << R"({"id":"ok","source":"s","text":"kelvollinen dokumentti tassa"})"
            << "\n{rikki\n";
    }
    PipelineConfig cfg;
    cfg.sources = {{"s", {path}, 1.0, true, true}};
    cfg.stages = {false, false, false, false, false, false};
    cfg.seed = 1;
    cfg.seed_set = true;
    cfg.output_dir = (ws.root / "out").string();
    auto r = run_pipeline(cfg);
    CHECK(r.read_errors_by_source.at("s") == 1);
    CHECK(r.corpus_by_source.at("s").size() == 1);
}
