#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace finpipe {

// One unit of text. A "line" is a newline-delimited block (paragraph,
// title, etc.); lines never contain embedded newlines.
struct Document {
    std::string id;
    std::string source;
    std::optional<std::string> url;
    std::optional<std::string> timestamp;
    std::vector<std::string> lines;

    // Full text, lines joined by single newlines.
    std::string text() const;

    // Unicode scalar values: sum of line lengths + one separator between
    // consecutive lines. All pipeline statistics use this definition.
    std::uint64_t char_count() const;
};

struct SourceSpec {
    std::string name;
    std::vector<std::string> paths;
    double weight = 1.0;
    bool exempt_perplexity = false;
    bool exempt_toxicity = false;
};

enum class Stage {
    exact_dedup,
    onion_dedup,
    heuristic,
    perplexity,
    toxicity,
    pii_mask,
};

const char* stage_name(Stage s);

struct StageReport {
    Stage stage = Stage::exact_dedup;
    std::string source;
    std::uint64_t docs_in = 0;
    std::uint64_t docs_out = 0;
    std::uint64_t chars_in = 0;
    std::uint64_t chars_out = 0;
    std::map<std::string, std::uint64_t> removal_reasons;

    std::string to_json() const;
};

struct ReadError {
    std::size_t line_number = 0;
    std::string message;
};

enum class DocFormat { jsonl, text_dir };

// Reads documents from a JSONL file ({"id","source","url","timestamp","text"})
// or a directory of .txt files. Malformed JSONL lines are skipped and
// reported in `errors`; file order (lexicographic for text_dir) is preserved.
std::vector<Document> read_documents(const std::string& path, DocFormat format,
                                     std::vector<ReadError>& errors);

// Writes JSONL via a temporary file renamed into place on success, so an
// interrupted write never leaves a partial output behind.
std::uint64_t write_documents(const std::vector<Document>& docs,
                              const std::string& path);

// Stable processing order: sources in declaration order, paths sorted
// lexicographically within each source. Throws on duplicate paths.
std::vector<std::pair<std::string, std::string>> manifest_order(
    const std::vector<SourceSpec>& specs);

}  // namespace finpipe
