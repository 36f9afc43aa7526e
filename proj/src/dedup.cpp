#include "finpipe/dedup.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "finpipe/unicode.hpp"

namespace finpipe {

namespace {
constexpr char kStateMagic[4] = {'F', 'P', 'S', 'S'};
constexpr std::uint32_t kStateVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_raw(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
}
}  // namespace

void SeenState::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write state: " + path);
    out.write(kStateMagic, 4);
    write_raw(out, kStateVersion);
    write_raw(out, static_cast<std::uint64_t>(ngram_set.size()));
    for (std::uint64_t h : ngram_set) write_raw(out, h);
    write_raw(out, static_cast<std::uint64_t>(fingerprint_set.size()));
    for (const auto& fp : fingerprint_set) {
        write_raw(out, fp.h1);
        write_raw(out, fp.h2);
    }
    if (!out) throw std::runtime_error("state write failed: " + path);
}

SeenState SeenState::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read state: " + path);
    char magic[4];
    in.read(magic, 4);
    std::uint32_t version = 0;
    read_raw(in, version);
    if (std::memcmp(magic, kStateMagic, 4) != 0 || version != kStateVersion)
        throw std::runtime_error("bad state file: " + path);
    SeenState state;
    std::uint64_t n = 0;
    read_raw(in, n);
    state.ngram_set.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t h;
        read_raw(in, h);
        state.ngram_set.insert(h);
    }
    read_raw(in, n);
    state.fingerprint_set.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Hash128 fp;
        read_raw(in, fp.h1);
        read_raw(in, fp.h2);
        state.fingerprint_set.insert(fp);
    }
    if (!in) throw std::runtime_error("truncated state file: " + path);
    return state;
}

Hash128 doc_fingerprint(const Document& doc) {
    return murmur3_x64_128(doc.text(), 0);
}

std::vector<Document> exact_dedup(const std::vector<Document>& docs,
                                  SeenState& state, std::uint64_t& dropped) {
    std::vector<Document> kept;
    kept.reserve(docs.size());
    for (const auto& doc : docs) {
        if (state.fingerprint_set.insert(doc_fingerprint(doc)).second)
            kept.push_back(doc);
        else
            ++dropped;
    }
    return kept;
}

std::vector<std::uint64_t> line_ngrams(const std::string& line, int n) {
    if (n < 1) throw std::invalid_argument("ngram order must be >= 1");
    std::vector<std::string> tokens = split_words(lowercase(line));
    std::vector<std::uint64_t> hashes;
    if (tokens.empty()) return hashes;

    auto hash_window = [](const std::vector<std::string>& toks,
                          std::size_t begin, std::size_t end) {
        std::string joined;
        for (std::size_t i = begin; i < end; ++i) {
            if (i > begin) joined.push_back(' ');
            joined += toks[i];
        }
        return murmur3_x64_64(joined, 0);
    };

    if (tokens.size() < static_cast<std::size_t>(n)) {
        hashes.push_back(hash_window(tokens, 0, tokens.size()));
        return hashes;
    }
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        hashes.push_back(hash_window(tokens, i, i + n));
    return hashes;
}

std::vector<bool> mark_duplicate_lines(const Document& doc, SeenState& state,
                                       const DedupParams& params) {
    std::vector<bool> flags(doc.lines.size(), false);
    for (std::size_t i = 0; i < doc.lines.size(); ++i) {
        auto hashes = line_ngrams(doc.lines[i], params.ngram_order);
        if (hashes.empty()) continue;  // empty lines never flagged
        std::size_t seen = 0;
        for (std::uint64_t h : hashes)
            if (state.ngram_set.contains(h)) ++seen;
        flags[i] = static_cast<double>(seen) >=
                   params.dup_threshold * static_cast<double>(hashes.size());
        for (std::uint64_t h : hashes) state.ngram_set.insert(h);
    }
    return flags;
}

std::optional<Document> trim_and_filter(const Document& doc,
                                        const std::vector<bool>& flags,
                                        double doc_threshold) {
    if (flags.size() != doc.lines.size())
        throw std::invalid_argument("flag count does not match line count");
    std::size_t begin = 0;
    std::size_t end = flags.size();
    while (begin < end && flags[begin]) ++begin;
    while (end > begin && flags[end - 1]) --end;
    if (begin == end) return std::nullopt;

    std::size_t dup = 0;
    for (std::size_t i = begin; i < end; ++i)
        if (flags[i]) ++dup;
    if (static_cast<double>(dup) >=
        doc_threshold * static_cast<double>(end - begin))
        return std::nullopt;

    Document trimmed = doc;
    trimmed.lines.assign(doc.lines.begin() + begin, doc.lines.begin() + end);
    return trimmed;
}

std::vector<Document> onion_dedup(const std::vector<Document>& docs,
                                  SeenState& state, const DedupParams& params,
                                  StageReport* report) {
    std::vector<Document> kept;
    kept.reserve(docs.size());
    for (const auto& doc : docs) {
        if (report) {
            ++report->docs_in;
            report->chars_in += doc.char_count();
        }
        auto flags = mark_duplicate_lines(doc, state, params);
        auto out = trim_and_filter(doc, flags, params.doc_threshold);
        if (out) {
            if (report) {
                ++report->docs_out;
                report->chars_out += out->char_count();
            }
            kept.push_back(std::move(*out));
        } else if (report) {
            ++report->removal_reasons["duplicate_document"];
        }
    }
    return kept;
}

}  // namespace finpipe
