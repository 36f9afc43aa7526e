#include "finpipe/document.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "finpipe/unicode.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace finpipe {

std::string Document::text() const {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

std::uint64_t Document::char_count() const {
    std::uint64_t total = 0;
    for (const auto& line : lines) total += codepoint_count(line);
    if (!lines.empty()) total += lines.size() - 1;
    return total;
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::exact_dedup: return "exact_dedup";
        case Stage::onion_dedup: return "onion_dedup";
        case Stage::heuristic: return "heuristic";
        case Stage::perplexity: return "perplexity";
        case Stage::toxicity: return "toxicity";
        case Stage::pii_mask: return "pii_mask";
    }
    return "unknown";
}

std::string StageReport::to_json() const {
    json j;
    j["stage"] = stage_name(stage);
    j["source"] = source;
    j["docs_in"] = docs_in;
    j["docs_out"] = docs_out;
    j["chars_in"] = chars_in;
    j["chars_out"] = chars_out;
    j["removal_reasons"] = removal_reasons;
    return j.dump();
}

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    if (text.empty()) return lines;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = text.find('\n', start);
        if (pos == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return lines;
}

Document doc_from_json(const json& j) {
    Document doc;
    doc.id = j.at("id").get<std::string>();
    doc.source = j.at("source").get<std::string>();
    if (j.contains("url") && !j["url"].is_null())
        doc.url = j["url"].get<std::string>();
    if (j.contains("timestamp") && !j["timestamp"].is_null())
        doc.timestamp = j["timestamp"].get<std::string>();
    doc.lines = split_lines(j.at("text").get<std::string>());
    return doc;
}

}  // namespace

std::vector<Document> read_documents(const std::string& path, DocFormat format,
                                     std::vector<ReadError>& errors) {
    std::vector<Document> docs;
    if (format == DocFormat::text_dir) {
        if (!fs::is_directory(path))
            throw std::runtime_error("not a directory: " + path);
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file() && entry.path().extension() == ".txt")
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::ifstream in(f, std::ios::binary);
            std::stringstream buf;
            buf << in.rdbuf();
            Document doc;
            doc.id = f.filename().string();
            doc.source = fs::path(path).filename().string();
            std::string text = buf.str();
            if (!text.empty() && text.back() == '\n') text.pop_back();
            doc.lines = split_lines(text);
            docs.push_back(std::move(doc));
        }
        return docs;
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            errors.push_back({lineno, "malformed JSON"});
            continue;
        }
        try {
            docs.push_back(doc_from_json(j));
        } catch (const std::exception& e) {
            errors.push_back({lineno, e.what()});
        }
    }
    return docs;
}

std::uint64_t write_documents(const std::vector<Document>& docs,
                              const std::string& path) {
    const std::string tmp = path + ".part";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + tmp);
        for (const auto& doc : docs) {
            json j;
            j["id"] = doc.id;
            j["source"] = doc.source;
            j["url"] = doc.url ? json(*doc.url) : json(nullptr);
            j["timestamp"] = doc.timestamp ? json(*doc.timestamp) : json(nullptr);
            j["text"] = doc.text();
            out << j.dump() << '\n';
        }
        out.flush();
        if (!out) {
            out.close();
            std::remove(tmp.c_str());
            throw std::runtime_error("write failed: " + path);
        }
    }
    fs::rename(tmp, path);
    return docs.size();
}

std::vector<std::pair<std::string, std::string>> manifest_order(
    const std::vector<SourceSpec>& specs) {
    std::vector<std::pair<std::string, std::string>> order;
    std::set<std::string> seen;
    for (const auto& spec : specs) {
        std::vector<std::string> paths = spec.paths;
        std::sort(paths.begin(), paths.end());
        for (const auto& p : paths) {
            if (!seen.insert(p).second)
                throw std::runtime_error("duplicate path in manifest: " + p);
            order.emplace_back(spec.name, p);
        }
    }
    return order;
}

}  // namespace finpipe
