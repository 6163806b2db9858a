#include "reinvoke/corpus.hpp"

#include "reinvoke/error.hpp"
#include "reinvoke/util.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace reinvoke {

namespace {

// Fixed rendering order for the fields ToolBench and ToolE records carry.
constexpr std::array<std::string_view, 10> kFieldOrder = {
    "category_name", "tool_name",           "name",          "api_name",
    "tool_description", "api_description", "description", "required_parameters",
    "optional_parameters", "method",
};

constexpr std::array<std::string_view, 2> kIdFields = {"doc_id", "id"};

bool is_id_field(std::string_view key) {
    return std::find(kIdFields.begin(), kIdFields.end(), key) != kIdFields.end();
}

bool renders_empty(const Json& v) {
    if (v.is_null()) return true;
    if (v.is_string()) return trim(v.get_ref<const std::string&>()).empty();
    if (v.is_array() || v.is_object()) return v.empty();
    return false;
}

std::string render_value(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

std::string scalar_id(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    return {};
}

std::vector<Json> parse_records(const std::string& text, CorpusFormat format,
                                const std::string& source) {
    std::vector<Json> records;
    if (format == CorpusFormat::jsonl) {
        auto lines = split_lines(text);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            try {
                records.push_back(Json::parse(lines[i]));
            } catch (const Json::parse_error& e) {
                throw ParseError(source, i + 1, e.what());
            }
            if (!records.back().is_object()) throw ParseError(source, i + 1, "not a JSON object");
        }
        return records;
    }

    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(source, 0, e.what());
    }
    if (format == CorpusFormat::toole_json && doc.is_object()) {
        // ToolE also ships as a plain {name: description} map.
        for (auto& [name, desc] : doc.items()) {
            if (!desc.is_string()) throw ParseError(source, records.size(), "description of '" + name + "' is not a string");
            records.push_back(Json{{"name", name}, {"description", desc}});
        }
        return records;
    }
    if (!doc.is_array()) throw ParseError(source, 0, "expected a JSON array of records");
    for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!doc[i].is_object()) throw ParseError(source, i, "not a JSON object");
        records.push_back(std::move(doc[i]));
    }
    return records;
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
    if (name == "toolbench-json" || name == "toolbench_json") return CorpusFormat::toolbench_json;
    if (name == "toole-json" || name == "toole_json") return CorpusFormat::toole_json;
    if (name == "jsonl") return CorpusFormat::jsonl;
    throw Error("unknown corpus format: " + std::string(name));
}

std::string_view to_string(CorpusFormat format) {
    switch (format) {
        case CorpusFormat::toolbench_json: return "toolbench-json";
        case CorpusFormat::toole_json: return "toole-json";
        case CorpusFormat::jsonl: return "jsonl";
    }
    return "?";
}

Corpus::Corpus(std::vector<ToolDocument> documents, std::string source_path)
    : documents_(std::move(documents)), source_path_(std::move(source_path)) {
    by_id_.reserve(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        if (!by_id_.emplace(documents_[i].doc_id, i).second) throw DuplicateId(documents_[i].doc_id);
    }
}

const ToolDocument* Corpus::find(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    return it == by_id_.end() ? nullptr : &documents_[it->second];
}

std::string Corpus::content_hash() const {
    std::string buf;
    for (const auto& d : documents_) {
        buf += d.doc_id;
        buf.push_back('\0');
        buf += d.text;
        buf.push_back('\0');
    }
    return sha256_hex(buf);
}

std::string render_text(const Json& raw) {
    if (!raw.is_object()) throw EmptyDocument("tool record is not an object");
    std::vector<std::string> lines;
    auto emit = [&](const std::string& key, const Json& value) {
        if (!renders_empty(value)) lines.push_back(key + ": " + render_value(value));
    };
    for (auto field : kFieldOrder) {
        auto it = raw.find(std::string(field));
        if (it != raw.end()) emit(std::string(field), *it);
    }
    std::set<std::string> rest;
    for (auto& [key, _] : raw.items()) {
        if (is_id_field(key)) continue;
        if (std::find(kFieldOrder.begin(), kFieldOrder.end(), key) != kFieldOrder.end()) continue;
        rest.insert(key);
    }
    for (const auto& key : rest) emit(key, raw.at(key));

    if (lines.empty()) throw EmptyDocument("tool record has no descriptive content");
    std::string text = lines.front();
    for (std::size_t i = 1; i < lines.size(); ++i) text += "\n" + lines[i];
    return text;
}

ToolDocument make_document(const Json& record) {
    if (!record.is_object()) throw Error("tool record is not an object");

    // Canonical form written by save_corpus.
    if (record.contains("doc_id") && record.contains("raw") && record.size() == 2) {
        const auto& raw = record.at("raw");
        auto id = scalar_id(record.at("doc_id"));
        if (id.empty()) throw Error("doc_id must be a non-empty string");
        return ToolDocument{id, raw, render_text(raw)};
    }

    std::string id;
    for (auto field : kIdFields) {
        if (auto it = record.find(std::string(field)); it != record.end()) {
            id = scalar_id(*it);
            if (!id.empty()) break;
        }
    }
    if (id.empty() && record.contains("tool_name") && record.contains("api_name")) {
        id = scalar_id(record.at("tool_name")) + "::" + scalar_id(record.at("api_name"));
    }
    if (id.empty() && record.contains("name")) id = scalar_id(record.at("name"));
    if (id.empty()) throw Error("cannot derive a doc_id (need doc_id, id, tool_name+api_name or name)");
    return ToolDocument{id, record, render_text(record)};
}

Corpus corpus_from_records(const std::vector<Json>& records, std::string source_path) {
    std::vector<ToolDocument> docs;
    docs.reserve(records.size());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            docs.push_back(make_document(records[i]));
        } catch (const Error& e) {
            throw ParseError(source_path, i, e.what());
        }
        if (!seen.insert(docs.back().doc_id).second) throw DuplicateId(docs.back().doc_id);
    }
    return Corpus(std::move(docs), std::move(source_path));
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    auto text = read_file(path);
    return corpus_from_records(parse_records(text, format, path.string()), path.string());
}

std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& d : corpus.documents()) {
        Json line;
        line["doc_id"] = d.doc_id;
        line["raw"] = d.raw;
        out += line.dump();
        out.push_back('\n');
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_corpus(corpus));
}

std::vector<std::pair<std::string, std::string>> find_text_collisions(const Corpus& corpus) {
    std::unordered_map<std::string, std::string> first_by_text;
    std::vector<std::pair<std::string, std::string>> collisions;
    for (const auto& d : corpus.documents()) {
        auto [it, inserted] = first_by_text.emplace(d.text, d.doc_id);
        if (!inserted) collisions.emplace_back(it->second, d.doc_id);
    }
    return collisions;
}

double EvalExample::gain(std::string_view doc_id) const {
    if (std::find(relevant_doc_ids.begin(), relevant_doc_ids.end(), doc_id) == relevant_doc_ids.end())
        return 0.0;
    auto it = grades.find(std::string(doc_id));
    return it == grades.end() ? 1.0 : it->second;
}

std::map<std::string, double> EvalExample::relevance() const {
    std::map<std::string, double> rel;
    for (const auto& id : relevant_doc_ids) rel[id] = gain(id);
    return rel;
}

const EvalExample* EvalDataset::find(std::string_view query_id) const {
    for (const auto& ex : examples)
        if (ex.query_id == query_id) return &ex;
    return nullptr;
}

EvalDataset parse_eval_dataset(std::string_view jsonl, const Corpus& corpus, UnresolvedIds policy,
                               const std::string& source) {
    EvalDataset dataset;
    std::set<std::string> seen_queries;
    std::vector<std::string> unresolved;
    auto lines = split_lines(jsonl);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        Json rec;
        try {
            rec = Json::parse(lines[i]);
        } catch (const Json::parse_error& e) {
            throw ParseError(source, i + 1, e.what());
        }
        if (!rec.is_object()) throw ParseError(source, i + 1, "not a JSON object");

        EvalExample ex;
        if (auto it = rec.find("query_id"); it != rec.end()) ex.query_id = scalar_id(*it);
        if (ex.query_id.empty()) throw ParseError(source, i + 1, "missing query_id");
        if (!seen_queries.insert(ex.query_id).second)
            throw ParseError(source, i + 1, "duplicate query_id " + ex.query_id);
        if (auto it = rec.find("query"); it != rec.end() && it->is_string()) ex.query_text = it->get<std::string>();
        if (trim(ex.query_text).empty()) throw ParseError(source, i + 1, "missing query text");

        auto ids = rec.find("relevant_ids");
        if (ids == rec.end()) ids = rec.find("relevant_doc_ids");
        if (ids == rec.end() || !ids->is_array() || ids->empty())
            throw ParseError(source, i + 1, "relevant_ids must be a non-empty array");

        std::set<std::string> seen_ids;
        for (const auto& v : *ids) {
            auto id = scalar_id(v);
            if (id.empty()) throw ParseError(source, i + 1, "relevant id must be a string");
            if (!seen_ids.insert(id).second) continue;
            if (!corpus.contains(id)) {
                unresolved.push_back(id);
                continue;
            }
            ex.relevant_doc_ids.push_back(id);
        }
        if (auto g = rec.find("grades"); g != rec.end() && !g->is_null()) {
            if (!g->is_object()) throw ParseError(source, i + 1, "grades must be an object");
            for (auto& [id, gain] : g->items()) {
                if (!gain.is_number() || gain.get<double>() <= 0.0)
                    throw ParseError(source, i + 1, "grade for " + id + " must be positive");
                if (seen_ids.count(id) == 0)
                    throw ParseError(source, i + 1, "grade for non-relevant id " + id);
                if (corpus.contains(id)) ex.grades[id] = gain.get<double>();
            }
        }
        if (ex.relevant_doc_ids.empty()) {
            ++dataset.excluded;
            continue;
        }
        dataset.examples.push_back(std::move(ex));
    }
    if (policy == UnresolvedIds::reject && !unresolved.empty()) throw UnknownDocId(std::move(unresolved));
    return dataset;
}

EvalDataset load_eval_dataset(const std::filesystem::path& path, const Corpus& corpus,
                              UnresolvedIds policy) {
    return parse_eval_dataset(read_file(path), corpus, policy, path.string());
}

}  // namespace reinvoke
