#pragma once

#include "reinvoke/corpus.hpp"
#include "reinvoke/llm.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace reinvoke {

struct SyntheticQuery {
    std::string doc_id;
    std::size_t copy_index = 0;  // 1-based
    std::string text;
    double temperature = 0.7;
    std::uint64_t seed = 0;
    bool fallback = false;  // generation failed or came back empty; text is the document itself

    bool operator==(const SyntheticQuery&) const = default;
};

/// Copy `copy_index` of a tool document with one synthetic query appended.
struct ExpandedDocument {
    std::string doc_id;
    std::size_t copy_index = 0;
    std::string text;

    bool operator==(const ExpandedDocument&) const = default;
};

struct GenerationSettings {
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::uint64_t seed_base = 0;  // copy i is requested with seed seed_base + i
    std::size_t parallelism = 1;
    RetryPolicy retry{};
    int empty_retries = 2;  // extra attempts for blank completions before falling back
};

std::string build_generation_prompt(const ToolDocument& doc);

/// "Documentation: <doc> Query: <query>".
std::string expanded_text(std::string_view doc_text, std::string_view query_text);

/// One independent sampled call per requested copy index. Blank completions
/// are retried, then replaced by the document text. Throws GenerationError
/// when more than half of the calls fail outright; the failures that are
/// tolerated fall back to the document text as well.
std::vector<SyntheticQuery> generate_copies(const ToolDocument& doc, const std::vector<std::size_t>& copy_indices,
                                            TextProvider& provider, const GenerationSettings& settings = {});

/// Copies 1..m.
std::vector<SyntheticQuery> generate_synthetic_queries(const ToolDocument& doc, std::size_t m,
                                                       TextProvider& provider,
                                                       const GenerationSettings& settings = {});

/// One expanded copy per query, ordered by copy_index. Throws MismatchedDoc
/// if a query belongs to another document or repeats a copy index.
std::vector<ExpandedDocument> expand_document(const ToolDocument& doc, const std::vector<SyntheticQuery>& queries);

/// Persisted expansion: JSONL of {doc_id, copy_index, synthetic_query,
/// expanded_text, seed, temperature, fallback}.
struct Expansion {
    std::vector<SyntheticQuery> queries;
    std::vector<ExpandedDocument> documents;  // parallel to queries
};

std::string serialize_expansion(const Expansion& expansion);
Expansion parse_expansion(std::string_view jsonl, const std::string& source = "<memory>");
Expansion load_expansion(const std::filesystem::path& path);

/// Expands every document, in corpus order.
Expansion expand_corpus(const Corpus& corpus, std::size_t m, TextProvider& provider,
                        const GenerationSettings& settings = {});

}  // namespace reinvoke
