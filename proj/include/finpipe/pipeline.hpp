#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "finpipe/dedup.hpp"
#include "finpipe/document.hpp"
#include "finpipe/heuristics.hpp"
#include "finpipe/mixer.hpp"
#include "finpipe/tokenizer.hpp"

namespace finpipe {

struct StageToggles {
    bool exact_dedup = true;
    bool onion_dedup = true;
    bool heuristic = true;
    bool perplexity = true;
    bool toxicity = true;
    bool pii_mask = true;
};

struct PipelineConfig {
    std::vector<SourceSpec> sources;
    StageToggles stages;
    DedupParams dedup;
    HeuristicThresholds heuristics;
    std::string lm_path;  // ARPA model for the perplexity stage
    double ppl_threshold = 100000.0;
    std::string lexicon_path;
    std::vector<std::string> toxicity_adapter;  // external classifier argv
    double toxicity_threshold = 0.5;
    bool train_tokenizer = false;
    BpeTrainOptions tokenizer;
    std::uint64_t seed = 0;
    bool seed_set = false;  // the seed is mandatory
    std::string output_dir;

    // Stable fingerprint of everything that affects outputs; used to
    // decide whether a checkpoint is reusable.
    std::string fingerprint() const;
};

PipelineConfig load_config(const std::string& path);

// All schema and cross-reference checks; never throws for content
// problems, just reports them.
std::vector<std::string> validate_config(const std::string& path);
std::vector<std::string> validate_config_object(const PipelineConfig& config);

struct PipelineResult {
    std::map<std::string, std::vector<Document>> corpus_by_source;
    std::vector<StageReport> reports;  // stage-major, source order
    std::map<std::string, std::uint64_t> read_errors_by_source;
    MixtureTable mixture;
    std::optional<SamplingPlan> plan;
    std::uint64_t tokenizer_vocab = 0;
};

// Stages run in fixed order: exact dedup, onion dedup, heuristics,
// perplexity (non-exempt), toxicity (non-exempt), PII masking; then
// optional tokenizer training and mixture planning. Each stage writes a
// checkpoint; with resume=true matching checkpoints are reloaded
// instead of recomputed.
PipelineResult run_pipeline(const PipelineConfig& config, bool resume = false);

}  // namespace finpipe
