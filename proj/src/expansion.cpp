#include "reinvoke/expansion.hpp"

#include "reinvoke/error.hpp"
#include "reinvoke/prompts.hpp"
#include "reinvoke/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <numeric>
#include <set>

namespace reinvoke {

std::string build_generation_prompt(const ToolDocument& doc) {
    return prompts::fill(prompts::kQueryGeneration, prompts::kDocumentSlot, doc.text);
}

std::string expanded_text(std::string_view doc_text, std::string_view query_text) {
    std::string out = "Documentation: ";
    out.append(doc_text);
    out.append(" Query: ");
    out.append(query_text);
    return out;
}

std::vector<SyntheticQuery> generate_copies(const ToolDocument& doc, const std::vector<std::size_t>& copy_indices,
                                            TextProvider& provider, const GenerationSettings& settings) {
    const auto prompt = build_generation_prompt(doc);
    std::vector<GenerationRequest> reqs;
    reqs.reserve(copy_indices.size());
    for (auto idx : copy_indices) {
        if (idx < 1) throw Error("copy_index must be >= 1");
        reqs.push_back({prompt, settings.temperature, settings.max_output_tokens, settings.seed_base + idx});
    }

    std::vector<std::optional<std::string>> texts(reqs.size());
    std::vector<std::size_t> pending(reqs.size());
    std::iota(pending.begin(), pending.end(), 0);
    std::size_t failed = 0;
    for (int round = 0; round <= settings.empty_retries && !pending.empty(); ++round) {
        std::vector<GenerationRequest> batch;
        for (auto i : pending) batch.push_back(reqs[i]);
        auto result = generate_many(batch, provider, settings.parallelism, settings.retry);
        std::vector<std::size_t> blank;
        for (std::size_t j = 0; j < pending.size(); ++j) {
            const auto& resp = result.responses[j];
            if (!resp) {
                ++failed;
                continue;
            }
            auto text = trim(resp->text);
            if (text.empty())
                blank.push_back(pending[j]);
            else
                texts[pending[j]] = std::move(text);
        }
        for (const auto& f : result.failures)
            spdlog::warn("query generation for {} copy {} failed: {}", doc.doc_id, copy_indices[pending[f.index]],
                         f.message);
        pending = std::move(blank);
    }
    if (failed * 2 > reqs.size())
        throw GenerationError(doc.doc_id + ": " + std::to_string(failed) + " of " + std::to_string(reqs.size()) +
                              " generation calls failed");

    std::vector<SyntheticQuery> out;
    out.reserve(reqs.size());
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        SyntheticQuery q{doc.doc_id, copy_indices[i], {}, settings.temperature, *reqs[i].seed, false};
        if (texts[i]) {
            q.text = std::move(*texts[i]);
        } else {
            q.text = doc.text;
            q.fallback = true;
        }
        out.push_back(std::move(q));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.copy_index < b.copy_index; });
    return out;
}

std::vector<SyntheticQuery> generate_synthetic_queries(const ToolDocument& doc, std::size_t m,
                                                       TextProvider& provider, const GenerationSettings& settings) {
    if (m < 1) throw Error("m must be at least 1");
    std::vector<std::size_t> indices(m);
    std::iota(indices.begin(), indices.end(), 1);
    return generate_copies(doc, indices, provider, settings);
}

std::vector<ExpandedDocument> expand_document(const ToolDocument& doc, const std::vector<SyntheticQuery>& queries) {
    std::vector<const SyntheticQuery*> sorted;
    std::set<std::size_t> seen;
    for (const auto& q : queries) {
        if (q.doc_id != doc.doc_id)
            throw MismatchedDoc("query for " + q.doc_id + " cannot expand " + doc.doc_id);
        if (!seen.insert(q.copy_index).second)
            throw MismatchedDoc(doc.doc_id + ": duplicate copy_index " + std::to_string(q.copy_index));
        sorted.push_back(&q);
    }
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->copy_index < b->copy_index; });
    std::vector<ExpandedDocument> out;
    out.reserve(sorted.size());
    for (const auto* q : sorted) out.push_back({doc.doc_id, q->copy_index, expanded_text(doc.text, q->text)});
    return out;
}

std::string serialize_expansion(const Expansion& expansion) {
    if (expansion.queries.size() != expansion.documents.size())
        throw Error("expansion queries and documents differ in length");
    std::string out;
    for (std::size_t i = 0; i < expansion.queries.size(); ++i) {
        const auto& q = expansion.queries[i];
        Json line;
        line["doc_id"] = q.doc_id;
        line["copy_index"] = q.copy_index;
        line["synthetic_query"] = q.text;
        line["expanded_text"] = expansion.documents[i].text;
        line["seed"] = q.seed;
        line["temperature"] = q.temperature;
        line["fallback"] = q.fallback;
        out += line.dump();
        out.push_back('\n');
    }
    return out;
}

Expansion parse_expansion(std::string_view jsonl, const std::string& source) {
    Expansion expansion;
    auto lines = split_lines(jsonl);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            auto j = Json::parse(lines[i]);
            SyntheticQuery q;
            q.doc_id = j.at("doc_id").get<std::string>();
            q.copy_index = j.at("copy_index").get<std::size_t>();
            q.text = j.at("synthetic_query").get<std::string>();
            q.seed = j.value("seed", std::uint64_t{0});
            q.temperature = j.value("temperature", 0.7);
            q.fallback = j.value("fallback", false);
            expansion.documents.push_back({q.doc_id, q.copy_index, j.at("expanded_text").get<std::string>()});
            expansion.queries.push_back(std::move(q));
        } catch (const Json::exception& e) {
            throw ParseError(source, i + 1, e.what());
        }
    }
    return expansion;
}

Expansion load_expansion(const std::filesystem::path& path) {
    return parse_expansion(read_file(path), path.string());
}

Expansion expand_corpus(const Corpus& corpus, std::size_t m, TextProvider& provider,
                        const GenerationSettings& settings) {
    Expansion expansion;
    for (const auto& doc : corpus.documents()) {
        auto queries = generate_synthetic_queries(doc, m, provider, settings);
        auto docs = expand_document(doc, queries);
        expansion.queries.insert(expansion.queries.end(), queries.begin(), queries.end());
        expansion.documents.insert(expansion.documents.end(), docs.begin(), docs.end());
    }
    return expansion;
}

}  // namespace reinvoke
