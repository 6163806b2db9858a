#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace reinvoke {

/// Raw records keep their key order so a save/load cycle is verbatim.
using Json = nlohmann::ordered_json;

/// One tool's documentation record.
struct ToolDocument {
    std::string doc_id;
    Json raw;
    std::string text;  // render_text(raw)

    bool operator==(const ToolDocument&) const = default;
};

enum class CorpusFormat { toolbench_json, toole_json, jsonl };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format);

/// Immutable, ordered collection of tool documents with unique ids.
class Corpus {
public:
    Corpus() = default;

    /// Throws DuplicateId on the first repeated doc_id.
    Corpus(std::vector<ToolDocument> documents, std::string source_path);

    const std::vector<ToolDocument>& documents() const noexcept { return documents_; }
    const std::string& source_path() const noexcept { return source_path_; }
    std::size_t size() const noexcept { return documents_.size(); }
    bool empty() const noexcept { return documents_.empty(); }

    const ToolDocument* find(std::string_view doc_id) const;
    bool contains(std::string_view doc_id) const { return find(doc_id) != nullptr; }

    /// SHA-256 over (doc_id, text) pairs in corpus order.
    std::string content_hash() const;

private:
    std::vector<ToolDocument> documents_;
    std::string source_path_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Flattens a raw record into "field: value" lines. Known ToolBench/ToolE
/// fields come first in a fixed order, then any other field by key order.
/// Strings are emitted as-is; other values as compact JSON. Null, empty
/// string, empty array and empty object values are skipped.
/// Throws EmptyDocument when nothing is left to render.
std::string render_text(const Json& raw);

/// Builds a document from one input record. The id comes from an explicit
/// "doc_id"/"id" field, else "<tool_name>::<api_name>" (ToolBench style),
/// else "name" (ToolE style).
ToolDocument make_document(const Json& record);

Corpus corpus_from_records(const std::vector<Json>& records, std::string source_path);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Canonical JSONL: one {"doc_id": ..., "raw": {...}} object per line.
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Pairs of distinct doc_ids whose rendered text is identical.
std::vector<std::pair<std::string, std::string>> find_text_collisions(const Corpus& corpus);

struct EvalExample {
    std::string query_id;
    std::string query_text;
    std::vector<std::string> relevant_doc_ids;
    std::map<std::string, double> grades;  // absent entries mean gain 1

    double gain(std::string_view doc_id) const;
    std::map<std::string, double> relevance() const;
};

struct EvalDataset {
    std::vector<EvalExample> examples;
    /// Examples dropped because none of their relevant ids exist in the corpus
    /// (lenient loading only).
    std::size_t excluded = 0;

    const EvalExample* find(std::string_view query_id) const;
};

enum class UnresolvedIds {
    reject,  // any unknown id -> UnknownDocId
    drop,    // unknown ids removed; examples left with none are excluded
};

/// JSONL with fields query_id, query, relevant_ids[] and optional grades {id: gain}.
EvalDataset parse_eval_dataset(std::string_view jsonl, const Corpus& corpus,
                               UnresolvedIds policy = UnresolvedIds::reject,
                               const std::string& source = "<memory>");
EvalDataset load_eval_dataset(const std::filesystem::path& path, const Corpus& corpus,
                              UnresolvedIds policy = UnresolvedIds::reject);

}  // namespace reinvoke
