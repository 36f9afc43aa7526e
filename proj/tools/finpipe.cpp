#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "finpipe/dedup.hpp"
#include "finpipe/document.hpp"
#include "finpipe/eval.hpp"
#include "finpipe/heuristics.hpp"
#include "finpipe/mixer.hpp"
#include "finpipe/ngram_lm.hpp"
#include "finpipe/pipeline.hpp"
#include "finpipe/safety.hpp"
#include "finpipe/tokenizer.hpp"

using nlohmann::json;
using namespace finpipe;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitConfig = 2;

std::vector<Document> read_jsonl_or_die(const std::string& path) {
    std::vector<ReadError> errors;
    auto docs = read_documents(path, DocFormat::jsonl, errors);
    for (const auto& e : errors)
        std::cerr << path << ":" << e.line_number << ": " << e.message << '\n';
    return docs;
}

std::vector<Document> read_many(const std::vector<std::string>& paths) {
    std::vector<Document> all;
    for (const auto& p : paths) {
        auto docs = read_jsonl_or_die(p);
        all.insert(all.end(), std::make_move_iterator(docs.begin()),
                   std::make_move_iterator(docs.end()));
    }
    return all;
}

std::vector<std::string> split_command(const std::string& cmd) {
    std::istringstream in(cmd);
    std::vector<std::string> argv;
    std::string word;
    while (in >> word) argv.push_back(word);
    return argv;
}

std::unique_ptr<LMBackend> make_backend(const std::string& arpa,
                                        const std::string& adapter,
                                        std::unique_ptr<NGramModel>& holder) {
    if (!adapter.empty())
        return std::make_unique<ProcessBackend>(split_command(adapter));
    if (arpa.empty())
        throw std::runtime_error("need --model or --adapter");
    holder = std::make_unique<NGramModel>(load_arpa(arpa));
    return std::make_unique<NGramBackend>(*holder);
}

void print_task_result(const TaskResult& r, int depth, std::ostream& out) {
    out << std::string(static_cast<std::size_t>(depth) * 2, ' ') << r.name
        << ": accuracy=" << r.accuracy << " examples=" << r.examples;
    if (r.errored) out << " errored=" << r.errored;
    out << '\n';
    for (const auto& sub : r.subtasks) print_task_result(sub, depth + 1, out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Corpus curation pipeline and evaluation harness"};
    app.require_subcommand(1);

    std::string config_path;
    bool resume = false;

    // --- validate ---
    auto* validate = app.add_subcommand("validate", "Check a pipeline config");
    validate->add_option("--config", config_path, "Config JSON")->required();

    // --- run ---
    auto* run = app.add_subcommand("run", "Run the full pipeline");
    run->add_option("--config", config_path, "Config JSON")->required();
    run->add_flag("--resume", resume, "Reuse matching checkpoints");

    // --- dedup ---
    std::string in_path, out_path, state_path;
    DedupParams dedup_params;
    auto* dedup = app.add_subcommand("dedup", "Exact + overlap dedup of one JSONL file");
    dedup->add_option("--input", in_path)->required();
    dedup->add_option("--output", out_path)->required();
    dedup->add_option("--state", state_path, "Seen-state file, loaded if present and saved back");
    dedup->add_option("--ngram-order", dedup_params.ngram_order);
    dedup->add_option("--dup-threshold", dedup_params.dup_threshold);
    dedup->add_option("--doc-threshold", dedup_params.doc_threshold);

    // --- filter ---
    auto* filter = app.add_subcommand("filter", "Heuristic quality filter");
    filter->add_option("--input", in_path)->required();
    filter->add_option("--output", out_path)->required();

    // --- filter-ppl ---
    std::string model_path;
    double ppl_threshold = 100000.0;
    auto* fppl = app.add_subcommand("filter-ppl", "Perplexity line filter");
    fppl->add_option("--input", in_path)->required();
    fppl->add_option("--output", out_path)->required();
    fppl->add_option("--model", model_path, "ARPA model")->required();
    fppl->add_option("--threshold", ppl_threshold);

    // --- mask ---
    auto* mask = app.add_subcommand("mask", "Mask emails and phone numbers");
    mask->add_option("--input", in_path)->required();
    mask->add_option("--output", out_path)->required();

    // --- train-lm ---
    std::vector<std::string> in_paths;
    TrainOptions lm_opts;
    auto* trainlm = app.add_subcommand("train-lm", "Train the n-gram model, write ARPA");
    trainlm->add_option("--input", in_paths)->required();
    trainlm->add_option("--output", out_path)->required();
    trainlm->add_option("--order", lm_opts.order);
    trainlm->add_option("--min-count", lm_opts.min_count);

    // --- train-tokenizer ---
    BpeTrainOptions bpe_opts;
    auto* traintok = app.add_subcommand("train-tokenizer", "Train the BPE tokenizer");
    traintok->add_option("--input", in_paths)->required();
    traintok->add_option("--output", out_path)->required();
    traintok->add_option("--vocab", bpe_opts.target_vocab);
    traintok->add_option("--byte-cap", bpe_opts.sample_byte_cap);

    // --- encode / decode ---
    std::string tok_path, text_arg;
    auto* encode = app.add_subcommand("encode", "Tokenize text to ids");
    encode->add_option("--tokenizer", tok_path)->required();
    encode->add_option("--text", text_arg, "Text; stdin when omitted");
    std::vector<std::int64_t> id_args;
    auto* decode = app.add_subcommand("decode", "Ids back to text");
    decode->add_option("--tokenizer", tok_path)->required();
    decode->add_option("ids", id_args, "Token ids");

    // --- stats ---
    auto* stats = app.add_subcommand("stats", "Document and character counts");
    stats->add_option("--input", in_paths)->required();

    // --- plan ---
    std::uint64_t seed = 0;
    auto* plan = app.add_subcommand("plan", "Sampling plan and mixture table for a config");
    plan->add_option("--config", config_path)->required();
    auto* plan_out = plan->add_option("--output", out_path, "Plan JSON path; stdout when omitted");

    // --- budget ---
    std::string plan_path;
    auto* budget = app.add_subcommand("budget", "Token budget for a sampling plan");
    budget->add_option("--config", config_path)->required();
    budget->add_option("--plan", plan_path)->required();
    budget->add_option("--tokenizer", tok_path)->required();

    // --- overlap ---
    std::string b_path;
    std::uint64_t sample = 0;
    auto* overlap = app.add_subcommand("overlap", "Cross-corpus URL and 5-gram overlap");
    overlap->add_option("--a", in_path)->required();
    overlap->add_option("--b", b_path)->required();
    overlap->add_option("--sample", sample, "Common URLs to sample for the n-gram phase");
    overlap->add_option("--seed", seed);

    // --- eval ---
    std::string task_path, adapter_cmd;
    int shots = 0;
    bool hhh = false;
    auto* eval = app.add_subcommand("eval", "Multiple-choice task accuracy");
    eval->add_option("--task", task_path)->required();
    eval->add_option("--model", model_path, "ARPA model");
    eval->add_option("--adapter", adapter_cmd, "External model command");
    eval->add_option("--shots", shots);
    eval->add_flag("--hhh", hhh, "Score as a two-choice alignment task");

    // --- eval-toxicity ---
    std::string lexicon_path, classifier_cmd;
    std::uint64_t gen_n = 100;
    int max_tokens = 128;
    auto* evaltox = app.add_subcommand("eval-toxicity", "Unprompted generation toxicity");
    evaltox->add_option("--model", model_path, "ARPA model");
    evaltox->add_option("--adapter", adapter_cmd, "External model command");
    evaltox->add_option("--lexicon", lexicon_path, "Lexicon classifier file");
    evaltox->add_option("--classifier", classifier_cmd, "External classifier command");
    evaltox->add_option("--n", gen_n);
    evaltox->add_option("--seed", seed);
    evaltox->add_option("--max-tokens", max_tokens);

    // --- eval-bias ---
    auto* evalbias = app.add_subcommand("eval-bias", "Occupation/name gender-gap report");
    evalbias->add_option("--input", in_path,
                         "JSON: {rows:[[occupation,name]...], "
                         "name_female_share:{}, reference_female_share:{}}")
        ->required();

    // --- score ---
    double acc1 = 0, acc2 = 0;
    std::uint64_t n1 = 0, n2 = 0;
    auto* score = app.add_subcommand("score", "Two-proportion z-test between runs");
    score->add_option("--acc1", acc1)->required();
    score->add_option("--n1", n1)->required();
    score->add_option("--acc2", acc2)->required();
    score->add_option("--n2", n2)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            auto errors = validate_config(config_path);
            for (const auto& e : errors) std::cerr << "config error: " << e << '\n';
            if (!errors.empty()) return kExitConfig;
            std::cout << "ok\n";
            return kExitOk;
        }

        if (run->parsed()) {
            PipelineConfig cfg;
            try {
                cfg = load_config(config_path);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfig;
            }
            if (auto errors = validate_config_object(cfg); !errors.empty()) {
                for (const auto& e : errors)
                    std::cerr << "config error: " << e << '\n';
                return kExitConfig;
            }
            auto result = run_pipeline(cfg, resume);
            for (const auto& r : result.reports) std::cout << r.to_json() << '\n';
            std::cout << result.mixture.to_text();
            return kExitOk;
        }

        if (dedup->parsed()) {
            auto docs = read_jsonl_or_die(in_path);
            SeenState state;
            if (!state_path.empty() && std::ifstream(state_path).good())
                state = SeenState::load(state_path);
            std::uint64_t dropped = 0;
            docs = exact_dedup(docs, state, dropped);
            StageReport report;
            docs = onion_dedup(docs, state, dedup_params, &report);
            write_documents(docs, out_path);
            if (!state_path.empty()) state.save(state_path);
            std::cerr << "exact drops: " << dropped << '\n'
                      << report.to_json() << '\n';
            return kExitOk;
        }

        if (filter->parsed()) {
            auto docs = read_jsonl_or_die(in_path);
            HeuristicThresholds t;
            std::vector<Document> kept;
            std::map<std::string, std::uint64_t> reasons;
            for (auto& d : docs) {
                auto v = heuristic_filter(d, t);
                if (v.keep)
                    kept.push_back(std::move(d));
                else
                    ++reasons[v.reason];
            }
            write_documents(kept, out_path);
            for (const auto& [reason, count] : reasons)
                std::cerr << reason << ": " << count << '\n';
            return kExitOk;
        }

        if (fppl->parsed()) {
            auto docs = read_jsonl_or_die(in_path);
            auto model = load_arpa(model_path);
            std::vector<Document> kept;
            std::uint64_t lines_removed = 0;
            for (const auto& d : docs)
                if (auto out = perplexity_filter(d, model, ppl_threshold,
                                                 &lines_removed))
                    kept.push_back(std::move(*out));
            write_documents(kept, out_path);
            std::cerr << "lines removed: " << lines_removed << '\n';
            return kExitOk;
        }

        if (mask->parsed()) {
            auto docs = read_jsonl_or_die(in_path);
            std::uint64_t masked = 0;
            for (auto& d : docs) {
                auto m = mask_pii(d);
                masked += m.masked_chars;
                d = std::move(m.doc);
            }
            write_documents(docs, out_path);
            std::cerr << "masked chars: " << masked << '\n';
            return kExitOk;
        }

        if (trainlm->parsed()) {
            auto docs = read_many(in_paths);
            auto model = train_kn(docs, lm_opts);
            save_arpa(model, out_path);
            std::cerr << "vocab: " << model.id_to_word.size() << '\n';
            return kExitOk;
        }

        if (traintok->parsed()) {
            auto docs = read_many(in_paths);
            auto tok = train_bpe(docs, bpe_opts);
            tok.save(out_path);
            std::cerr << "vocab: " << tok.vocab_size() << '\n';
            return kExitOk;
        }

        if (encode->parsed()) {
            auto tok = Tokenizer::load(tok_path);
            std::string text = text_arg;
            if (encode->count("--text") == 0) {
                std::ostringstream buf;
                buf << std::cin.rdbuf();
                text = buf.str();
            }
            bool first = true;
            for (auto id : tok.encode(text)) {
                if (!first) std::cout << ' ';
                std::cout << id;
                first = false;
            }
            std::cout << '\n';
            return kExitOk;
        }

        if (decode->parsed()) {
            auto tok = Tokenizer::load(tok_path);
            std::vector<std::int32_t> ids(id_args.begin(), id_args.end());
            std::cout << tok.decode(ids) << '\n';
            return kExitOk;
        }

        if (stats->parsed()) {
            json out = json::array();
            for (const auto& p : in_paths) {
                auto docs = read_jsonl_or_die(p);
                std::uint64_t chars = 0;
                std::uint64_t lines = 0;
                for (const auto& d : docs) {
                    chars += d.char_count();
                    lines += d.lines.size();
                }
                out.push_back({{"path", p},
                               {"docs", docs.size()},
                               {"lines", lines},
                               {"chars", chars}});
            }
            std::cout << out.dump(1) << '\n';
            return kExitOk;
        }

        if (plan->parsed() || budget->parsed()) {
            PipelineConfig cfg;
            try {
                cfg = load_config(config_path);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << '\n';
                return kExitConfig;
            }
            std::map<std::string, std::vector<Document>> corpus;
            for (const auto& [source, path] : manifest_order(cfg.sources)) {
                auto docs = read_jsonl_or_die(path);
                auto& bucket = corpus[source];
                bucket.insert(bucket.end(),
                              std::make_move_iterator(docs.begin()),
                              std::make_move_iterator(docs.end()));
            }
            if (plan->parsed()) {
                std::map<std::string, std::vector<DocRef>> refs;
                std::map<std::string, std::uint64_t> counts;
                std::map<std::string, double> weights;
                std::vector<std::string> order;
                for (const auto& spec : cfg.sources) {
                    order.push_back(spec.name);
                    weights[spec.name] = spec.weight;
                    std::uint64_t chars = 0;
                    for (const auto& d : corpus[spec.name]) {
                        refs[spec.name].push_back({d.id, d.char_count()});
                        chars += d.char_count();
                    }
                    counts[spec.name] = chars;
                }
                auto sp = build_sampling_plan(cfg.sources, refs, cfg.seed);
                std::cout << mixture_table(order, counts, weights).to_text();
                if (*plan_out) {
                    std::ofstream out(out_path, std::ios::trunc);
                    out << sp.to_json() << '\n';
                } else {
                    std::cout << sp.to_json() << '\n';
                }
            } else {
                std::ifstream pin(plan_path);
                std::ostringstream buf;
                buf << pin.rdbuf();
                auto sp = SamplingPlan::from_json(buf.str());
                auto tok = Tokenizer::load(tok_path);
                auto tb = token_budget(sp, tok, corpus);
                json j;
                j["total_tokens"] = tb.total_tokens;
                j["tokens_by_source"] = tb.tokens_by_source;
                j["tokens_per_char"] = tb.tokens_per_char;
                std::cout << j.dump(1) << '\n';
            }
            return kExitOk;
        }

        if (overlap->parsed()) {
            auto a = read_jsonl_or_die(in_path);
            auto b = read_jsonl_or_die(b_path);
            std::cout << corpus_overlap(a, b, sample, seed).to_json() << '\n';
            return kExitOk;
        }

        if (eval->parsed()) {
            auto task = load_task(task_path);
            std::unique_ptr<NGramModel> holder;
            auto lm = make_backend(model_path, adapter_cmd, holder);
            if (hhh) {
                auto r = hhh_score(*lm, task, shots);
                json j;
                j["overall"] = r.overall;
                j["examples"] = r.examples;
                j["per_category"] = r.per_category;
                std::cout << j.dump(1) << '\n';
            } else {
                auto r = run_task(*lm, task, shots);
                print_task_result(r, 0, std::cout);
            }
            return kExitOk;
        }

        if (evaltox->parsed()) {
            std::unique_ptr<NGramModel> holder;
            auto lm = make_backend(model_path, adapter_cmd, holder);
            std::unique_ptr<ClassifierHook> hook;
            if (!classifier_cmd.empty())
                hook = std::make_unique<ProcessClassifier>(
                    split_command(classifier_cmd));
            else if (!lexicon_path.empty())
                hook = std::make_unique<LexiconClassifier>(
                    LexiconClassifier::from_file(lexicon_path));
            else
                throw std::runtime_error("need --lexicon or --classifier");
            auto report =
                unprompted_toxicity(*lm, *hook, gen_n, seed, max_tokens);
            std::cout << report.to_json() << '\n';
            return kExitOk;
        }

        if (evalbias->parsed()) {
            std::ifstream in(in_path);
            if (!in) throw std::runtime_error("cannot read " + in_path);
            json j;
            in >> j;
            BiasInput input;
            for (const auto& row : j.at("rows"))
                input.rows.emplace_back(row.at(0).get<std::string>(),
                                        row.at(1).get<std::string>());
            input.name_female_share =
                j.at("name_female_share")
                    .get<std::map<std::string, double>>();
            input.reference_female_share =
                j.at("reference_female_share")
                    .get<std::map<std::string, double>>();
            std::cout << bias_report(input).to_json() << '\n';
            return kExitOk;
        }

        if (score->parsed()) {
            auto r = two_proportion_test(acc1, n1, acc2, n2);
            json j;
            j["z"] = r.z;
            j["p_value"] = r.p_value;
            std::cout << j.dump() << '\n';
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFatal;
    }
    return kExitFatal;  // unreachable with require_subcommand(1)
}
