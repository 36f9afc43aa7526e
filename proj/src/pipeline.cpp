#include "finpipe/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "finpipe/murmur3.hpp"
#include "finpipe/ngram_lm.hpp"
#include "finpipe/safety.hpp"
#include "finpipe/unicode.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace finpipe {

namespace {

json config_to_json(const PipelineConfig& c) {
    json j;
    json srcs = json::array();
    for (const auto& s : c.sources) {
        json js;
        js["name"] = s.name;
        js["paths"] = s.paths;
        js["weight"] = s.weight;
        js["exempt_perplexity"] = s.exempt_perplexity;
        js["exempt_toxicity"] = s.exempt_toxicity;
        srcs.push_back(std::move(js));
    }
    j["sources"] = std::move(srcs);
    j["stages"] = {{"exact_dedup", c.stages.exact_dedup},
                   {"onion_dedup", c.stages.onion_dedup},
                   {"heuristic", c.stages.heuristic},
                   {"perplexity", c.stages.perplexity},
                   {"toxicity", c.stages.toxicity},
                   {"pii_mask", c.stages.pii_mask}};
    j["dedup"] = {{"ngram_order", c.dedup.ngram_order},
                  {"dup_threshold", c.dedup.dup_threshold},
                  {"doc_threshold", c.dedup.doc_threshold}};
    std::string alphabet;
    {
        std::vector<char32_t> cps(c.heuristics.target_alphabet.begin(),
                                  c.heuristics.target_alphabet.end());
        std::sort(cps.begin(), cps.end());
        alphabet = encode_utf8(cps);
    }
    j["heuristics"] = {
        {"max_punct_alpha_ratio", c.heuristics.max_punct_alpha_ratio},
        {"max_digit_alpha_ratio", c.heuristics.max_digit_alpha_ratio},
        {"max_foreign_alpha_ratio", c.heuristics.max_foreign_alpha_ratio},
        {"min_type_token_ratio", c.heuristics.min_type_token_ratio},
        {"ttr_word_gate", c.heuristics.ttr_word_gate},
        {"min_avg_line_length", c.heuristics.min_avg_line_length},
        {"min_doc_chars", c.heuristics.min_doc_chars},
        {"target_alphabet", alphabet}};
    j["perplexity"] = {{"model_path", c.lm_path},
                       {"threshold", c.ppl_threshold}};
    j["toxicity"] = {{"lexicon_path", c.lexicon_path},
                     {"adapter", c.toxicity_adapter},
                     {"threshold", c.toxicity_threshold}};
    j["tokenizer"] = {{"train", c.train_tokenizer},
                      {"target_vocab", c.tokenizer.target_vocab},
                      {"sample_byte_cap", c.tokenizer.sample_byte_cap}};
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    return j;
}

}  // namespace

std::string PipelineConfig::fingerprint() const {
    auto h = murmur3_x64_128(config_to_json(*this).dump(), 0);
    std::ostringstream out;
    out << std::hex << h.h1 << h.h2;
    return out.str();
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read config: " + path);
    json j;
    in >> j;
    PipelineConfig c;
    for (const auto& js : j.at("sources")) {
        SourceSpec s;
        s.name = js.at("name").get<std::string>();
        s.paths = js.at("paths").get<std::vector<std::string>>();
        s.weight = js.value("weight", 1.0);
        s.exempt_perplexity = js.value("exempt_perplexity", false);
        s.exempt_toxicity = js.value("exempt_toxicity", false);
        c.sources.push_back(std::move(s));
    }
    if (j.contains("stages")) {
        const auto& st = j["stages"];
        c.stages.exact_dedup = st.value("exact_dedup", true);
        c.stages.onion_dedup = st.value("onion_dedup", true);
        c.stages.heuristic = st.value("heuristic", true);
        c.stages.perplexity = st.value("perplexity", true);
        c.stages.toxicity = st.value("toxicity", true);
        c.stages.pii_mask = st.value("pii_mask", true);
    }
    if (j.contains("dedup")) {
        const auto& d = j["dedup"];
        c.dedup.ngram_order = d.value("ngram_order", 5);
        c.dedup.dup_threshold = d.value("dup_threshold", 0.5);
        c.dedup.doc_threshold = d.value("doc_threshold", 0.5);
    }
    if (j.contains("heuristics")) {
        const auto& h = j["heuristics"];
        c.heuristics.max_punct_alpha_ratio =
            h.value("max_punct_alpha_ratio", 0.30);
        c.heuristics.max_digit_alpha_ratio =
            h.value("max_digit_alpha_ratio", 0.20);
        c.heuristics.max_foreign_alpha_ratio =
            h.value("max_foreign_alpha_ratio", 0.25);
        c.heuristics.min_type_token_ratio =
            h.value("min_type_token_ratio", 0.30);
        c.heuristics.ttr_word_gate = h.value("ttr_word_gate", 50);
        c.heuristics.min_avg_line_length = h.value("min_avg_line_length", 25.0);
        c.heuristics.min_doc_chars = h.value("min_doc_chars", 200);
        if (h.contains("target_alphabet")) {
            c.heuristics.target_alphabet.clear();
            for (char32_t cp :
                 decode_utf8(h["target_alphabet"].get<std::string>()))
                c.heuristics.target_alphabet.insert(to_lower(cp));
        }
    }
    if (j.contains("perplexity")) {
        c.lm_path = j["perplexity"].value("model_path", "");
        c.ppl_threshold = j["perplexity"].value("threshold", 100000.0);
    }
    if (j.contains("toxicity")) {
        c.lexicon_path = j["toxicity"].value("lexicon_path", "");
        c.toxicity_adapter = j["toxicity"].value(
            "adapter", std::vector<std::string>{});
        c.toxicity_threshold = j["toxicity"].value("threshold", 0.5);
    }
    if (j.contains("tokenizer")) {
        c.train_tokenizer = j["tokenizer"].value("train", false);
        c.tokenizer.target_vocab =
            j["tokenizer"].value("target_vocab", std::size_t{131072});
        c.tokenizer.sample_byte_cap =
            j["tokenizer"].value("sample_byte_cap", std::uint64_t{1} << 30);
    }
    if (j.contains("seed")) {
        c.seed = j["seed"].get<std::uint64_t>();
        c.seed_set = true;
    }
    c.output_dir = j.value("output_dir", "");
    return c;
}

std::vector<std::string> validate_config_object(const PipelineConfig& c) {
    std::vector<std::string> errors;
    if (!c.seed_set) errors.push_back("seed is mandatory");
    if (c.output_dir.empty()) errors.push_back("output_dir is mandatory");
    if (c.sources.empty()) errors.push_back("at least one source required");
    for (const auto& s : c.sources) {
        if (s.name.empty()) errors.push_back("source with empty name");
        if (s.weight <= 0)
            errors.push_back("source " + s.name + ": weight must be > 0");
        if (s.paths.empty())
            errors.push_back("source " + s.name + ": no input paths");
        for (const auto& p : s.paths)
            if (!fs::exists(p))
                errors.push_back("source " + s.name + ": missing path " + p);
    }
    try {
        manifest_order(c.sources);
    } catch (const std::exception& e) {
        errors.push_back(e.what());
    }
    if (c.dedup.ngram_order < 1) errors.push_back("dedup ngram_order < 1");
    if (c.dedup.dup_threshold <= 0 || c.dedup.dup_threshold > 1)
        errors.push_back("dedup dup_threshold must be in (0,1]");
    if (c.stages.perplexity) {
        bool any_nonexempt = false;
        for (const auto& s : c.sources)
            any_nonexempt = any_nonexempt || !s.exempt_perplexity;
        if (any_nonexempt) {
            if (c.lm_path.empty())
                errors.push_back("perplexity stage enabled but no model_path");
            else if (!fs::exists(c.lm_path))
                errors.push_back("perplexity model not found: " + c.lm_path);
        }
    }
    if (c.stages.toxicity && c.toxicity_adapter.empty()) {
        bool any_nonexempt = false;
        for (const auto& s : c.sources)
            any_nonexempt = any_nonexempt || !s.exempt_toxicity;
        if (any_nonexempt) {
            if (c.lexicon_path.empty())
                errors.push_back("toxicity stage enabled but no lexicon_path");
            else if (!fs::exists(c.lexicon_path))
                errors.push_back("toxicity lexicon not found: " + c.lexicon_path);
        }
    }
    if (c.train_tokenizer && c.tokenizer.target_vocab <= 260)
        errors.push_back("tokenizer target_vocab too small");
    return errors;
}

std::vector<std::string> validate_config(const std::string& path) {
    try {
        return validate_config_object(load_config(path));
    } catch (const std::exception& e) {
        return {e.what()};
    }
}

namespace {

struct Checkpoint {
    fs::path dir;
    std::string fingerprint;

    fs::path marker(const std::string& stage) const {
        return dir / (stage + ".done");
    }
    fs::path data(const std::string& stage, const std::string& source) const {
        return dir / (stage + "." + source + ".jsonl");
    }
    fs::path report(const std::string& stage) const {
        return dir / (stage + ".reports.json");
    }

    bool valid(const std::string& stage) const {
        std::ifstream in(marker(stage));
        std::string stored;
        return in && std::getline(in, stored) && stored == fingerprint;
    }
    void commit(const std::string& stage) const {
        std::ofstream out(marker(stage), std::ios::trunc);
        out << fingerprint << '\n';
    }
};

using Corpus = std::map<std::string, std::vector<Document>>;

void save_stage(const Checkpoint& cp, const std::string& stage,
                const Corpus& corpus,
                const std::vector<StageReport>& stage_reports) {
    for (const auto& [source, docs] : corpus)
        write_documents(docs, cp.data(stage, source).string());
    json jr = json::array();
    for (const auto& r : stage_reports) jr.push_back(json::parse(r.to_json()));
    std::ofstream out(cp.report(stage), std::ios::trunc);
    out << jr.dump(1) << '\n';
    cp.commit(stage);
}

void load_stage(const Checkpoint& cp, const std::string& stage, Corpus& corpus,
                std::vector<StageReport>& reports) {
    for (auto& [source, docs] : corpus) {
        std::vector<ReadError> errs;
        docs = read_documents(cp.data(stage, source).string(),
                              DocFormat::jsonl, errs);
        if (!errs.empty())
            throw std::runtime_error("corrupt checkpoint for " + source);
    }
    std::ifstream in(cp.report(stage));
    json jr;
    in >> jr;
    for (const auto& j : jr) {
        StageReport r;
        const std::string name = j.at("stage").get<std::string>();
        for (int s = 0; s <= static_cast<int>(Stage::pii_mask); ++s)
            if (name == stage_name(static_cast<Stage>(s)))
                r.stage = static_cast<Stage>(s);
        r.source = j.at("source").get<std::string>();
        r.docs_in = j.at("docs_in").get<std::uint64_t>();
        r.docs_out = j.at("docs_out").get<std::uint64_t>();
        r.chars_in = j.at("chars_in").get<std::uint64_t>();
        r.chars_out = j.at("chars_out").get<std::uint64_t>();
        r.removal_reasons =
            j.at("removal_reasons")
                .get<std::map<std::string, std::uint64_t>>();
        reports.push_back(std::move(r));
    }
}

StageReport make_report(Stage stage, const std::string& source) {
    StageReport r;
    r.stage = stage;
    r.source = source;
    return r;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, bool resume) {
    {
        auto errors = validate_config_object(config);
        if (!errors.empty())
            throw std::runtime_error("invalid config: " + errors.front());
    }
    const fs::path outdir = config.output_dir;
    fs::create_directories(outdir);
    const fs::path lock = outdir / ".lock";
    if (fs::exists(lock) && !resume)
        throw std::runtime_error("output directory locked: " + lock.string());
    {
        std::ofstream l(lock, std::ios::trunc);
        l << "finpipe\n";
    }
    Checkpoint cp{outdir / "checkpoints", config.fingerprint()};
    fs::create_directories(cp.dir);

    PipelineResult result;
    std::vector<std::string> source_order;
    Corpus corpus;

    // Ingest in manifest order.
    for (const auto& spec : config.sources) source_order.push_back(spec.name);
    for (const auto& [source, path] : manifest_order(config.sources)) {
        std::vector<ReadError> errors;
        auto docs = read_documents(path, DocFormat::jsonl, errors);
        result.read_errors_by_source[source] += errors.size();
        auto& bucket = corpus[source];
        bucket.insert(bucket.end(), std::make_move_iterator(docs.begin()),
                      std::make_move_iterator(docs.end()));
    }
    for (const auto& name : source_order)
        corpus.try_emplace(name);  // keep empty sources present

    auto spec_for = [&](const std::string& name) -> const SourceSpec& {
        for (const auto& s : config.sources)
            if (s.name == name) return s;
        throw std::logic_error("unknown source " + name);
    };

    auto run_stage = [&](const std::string& name, bool enabled, auto&& body) {
        std::vector<StageReport> stage_reports;
        if (resume && cp.valid(name)) {
            load_stage(cp, name, corpus, stage_reports);
        } else if (enabled) {
            body(stage_reports);
            save_stage(cp, name, corpus, stage_reports);
        } else {
            return;  // disabled stage: identity, no report
        }
        for (auto& r : stage_reports) result.reports.push_back(std::move(r));
    };

    SeenState seen;

    run_stage("exact_dedup", config.stages.exact_dedup,
              [&](std::vector<StageReport>& reports) {
                  for (const auto& name : source_order) {
                      auto r = make_report(Stage::exact_dedup, name);
                      auto& docs = corpus[name];
                      r.docs_in = docs.size();
                      for (const auto& d : docs) r.chars_in += d.char_count();
                      std::uint64_t dropped = 0;
                      docs = exact_dedup(docs, seen, dropped);
                      r.docs_out = docs.size();
                      for (const auto& d : docs) r.chars_out += d.char_count();
                      if (dropped) r.removal_reasons["duplicate_fingerprint"] = dropped;
                      reports.push_back(std::move(r));
                  }
              });

    run_stage("onion_dedup", config.stages.onion_dedup,
              [&](std::vector<StageReport>& reports) {
                  for (const auto& name : source_order) {
                      auto r = make_report(Stage::onion_dedup, name);
                      corpus[name] =
                          onion_dedup(corpus[name], seen, config.dedup, &r);
                      reports.push_back(std::move(r));
                  }
              });

    run_stage("heuristic", config.stages.heuristic,
              [&](std::vector<StageReport>& reports) {
                  for (const auto& name : source_order) {
                      auto r = make_report(Stage::heuristic, name);
                      std::vector<Document> kept;
                      for (auto& doc : corpus[name]) {
                          ++r.docs_in;
                          r.chars_in += doc.char_count();
                          auto verdict = heuristic_filter(doc, config.heuristics);
                          if (verdict.keep) {
                              ++r.docs_out;
                              r.chars_out += doc.char_count();
                              kept.push_back(std::move(doc));
                          } else {
                              ++r.removal_reasons[verdict.reason];
                          }
                      }
                      corpus[name] = std::move(kept);
                      reports.push_back(std::move(r));
                  }
              });

    run_stage("perplexity", config.stages.perplexity,
              [&](std::vector<StageReport>& reports) {
                  std::optional<NGramModel> model;
                  for (const auto& name : source_order) {
                      auto r = make_report(Stage::perplexity, name);
                      auto& docs = corpus[name];
                      r.docs_in = docs.size();
                      for (const auto& d : docs) r.chars_in += d.char_count();
                      if (spec_for(name).exempt_perplexity) {
                          r.docs_out = r.docs_in;
                          r.chars_out = r.chars_in;
                          reports.push_back(std::move(r));
                          continue;
                      }
                      if (!model) model = load_arpa(config.lm_path);
                      std::vector<Document> kept;
                      std::uint64_t lines_removed = 0;
                      for (auto& doc : docs) {
                          auto out = perplexity_filter(doc, *model,
                                                       config.ppl_threshold,
                                                       &lines_removed);
                          if (out) {
                              ++r.docs_out;
                              r.chars_out += out->char_count();
                              kept.push_back(std::move(*out));
                          } else {
                              ++r.removal_reasons["empty_after_ppl_filter"];
                          }
                      }
                      if (lines_removed)
                          r.removal_reasons["high_ppl_lines"] = lines_removed;
                      corpus[name] = std::move(kept);
                      reports.push_back(std::move(r));
                  }
              });

    run_stage("toxicity", config.stages.toxicity,
              [&](std::vector<StageReport>& reports) {
                  std::unique_ptr<ClassifierHook> hook;
                  if (!config.toxicity_adapter.empty())
                      hook = std::make_unique<ProcessClassifier>(
                          config.toxicity_adapter);
                  else if (!config.lexicon_path.empty())
                      hook = std::make_unique<LexiconClassifier>(
                          LexiconClassifier::from_file(config.lexicon_path));
                  for (const auto& name : source_order) {
                      auto r = make_report(Stage::toxicity, name);
                      auto& docs = corpus[name];
                      r.docs_in = docs.size();
                      for (const auto& d : docs) r.chars_in += d.char_count();
                      if (spec_for(name).exempt_toxicity || !hook) {
                          r.docs_out = r.docs_in;
                          r.chars_out = r.chars_in;
                          reports.push_back(std::move(r));
                          continue;
                      }
                      std::vector<Document> kept;
                      for (auto& doc : docs) {
                          auto decision = toxicity_filter(
                              doc, *hook, config.toxicity_threshold);
                          if (decision.classifier_error)
                              ++r.removal_reasons["classifier_error_passthrough"];
                          if (decision.doc) {
                              ++r.docs_out;
                              r.chars_out += decision.doc->char_count();
                              kept.push_back(std::move(*decision.doc));
                          } else {
                              ++r.removal_reasons["toxic"];
                          }
                      }
                      corpus[name] = std::move(kept);
                      reports.push_back(std::move(r));
                  }
              });

    run_stage("pii_mask", config.stages.pii_mask,
              [&](std::vector<StageReport>& reports) {
                  for (const auto& name : source_order) {
                      auto r = make_report(Stage::pii_mask, name);
                      std::uint64_t masked = 0;
                      for (auto& doc : corpus[name]) {
                          ++r.docs_in;
                          r.chars_in += doc.char_count();
                          auto m = mask_pii(doc);
                          masked += m.masked_chars;
                          doc = std::move(m.doc);
                          ++r.docs_out;
                          r.chars_out += doc.char_count();
                      }
                      if (masked) r.removal_reasons["masked_chars"] = masked;
                      reports.push_back(std::move(r));
                  }
              });

    // Final corpus and aggregated reports.
    const fs::path corpus_dir = outdir / "corpus";
    fs::create_directories(corpus_dir);
    for (const auto& name : source_order)
        write_documents(corpus[name],
                        (corpus_dir / (name + ".jsonl")).string());
    {
        json jr = json::array();
        for (const auto& r : result.reports)
            jr.push_back(json::parse(r.to_json()));
        std::ofstream out(outdir / "reports.json", std::ios::trunc);
        out << jr.dump(1) << '\n';
    }

    // Mixture accounting over the final corpus.
    {
        std::map<std::string, std::uint64_t> counts;
        std::map<std::string, double> weights;
        for (const auto& name : source_order) {
            std::uint64_t chars = 0;
            for (const auto& d : corpus[name]) chars += d.char_count();
            counts[name] = chars;
            weights[name] = spec_for(name).weight;
        }
        bool all_positive = true;
        for (const auto& [name, chars] : counts)
            all_positive = all_positive && chars > 0;
        if (all_positive && !counts.empty()) {
            result.mixture = mixture_table(source_order, counts, weights);
            std::ofstream out(outdir / "mixture.json", std::ios::trunc);
            out << result.mixture.to_json() << '\n';
        }
        std::map<std::string, std::vector<DocRef>> refs;
        for (const auto& name : source_order) {
            auto& v = refs[name];
            for (const auto& d : corpus[name])
                v.push_back({d.id, d.char_count()});
        }
        result.plan = build_sampling_plan(config.sources, refs, config.seed);
        std::ofstream pout(outdir / "sampling_plan.json", std::ios::trunc);
        pout << result.plan->to_json() << '\n';
    }

    if (config.train_tokenizer) {
        std::vector<Document> ordered_docs;
        for (const auto& name : source_order)
            for (const auto& d : corpus[name]) ordered_docs.push_back(d);
        auto tok = train_bpe(ordered_docs, config.tokenizer);
        tok.save((outdir / "tokenizer.json").string());
        result.tokenizer_vocab = tok.vocab_size();
        auto budget = token_budget(*result.plan, tok, corpus);
        json jb;
        jb["total_tokens"] = budget.total_tokens;
        jb["tokens_by_source"] = budget.tokens_by_source;
        jb["tokens_per_char"] = budget.tokens_per_char;
        std::ofstream out(outdir / "token_budget.json", std::ios::trunc);
        out << jb.dump(1) << '\n';
    }

    result.corpus_by_source = std::move(corpus);
    fs::remove(lock);
    return result;
}

}  // namespace finpipe
