#pragma once

#include "reinvoke/corpus.hpp"
#include "reinvoke/embedding.hpp"
#include "reinvoke/expansion.hpp"
#include "reinvoke/intent.hpp"
#include "reinvoke/llm.hpp"

#include <compare>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace reinvoke {

enum class Aggregation {
    mean,  // one averaged vector per tool
    max,   // keep per-copy vectors; similarity is the best copy
};

Aggregation parse_aggregation(std::string_view name);
std::string_view to_string(Aggregation agg);

/// The texts indexed for one tool, in copy_index order.
struct DocCopies {
    std::string doc_id;
    std::vector<std::string> texts;
};

/// Expanded copies grouped per tool in corpus order. Throws MissingCopies
/// for a tool without any copy and MismatchedDoc for copies of unknown tools.
std::vector<DocCopies> copies_from_expansion(const Corpus& corpus, const std::vector<ExpandedDocument>& expanded);

/// Each tool's own text as its single copy (expansion disabled).
std::vector<DocCopies> copies_from_raw(const Corpus& corpus);

struct DocIndexEntry {
    std::string doc_id;
    std::size_t copy_count = 0;
    /// mean aggregation: exactly one vector, the average of the copies.
    /// max aggregation: one vector per copy.
    std::vector<EmbeddingVector> vectors;

    const EmbeddingVector& agg_vector() const { return vectors.front(); }
};

/// Immutable tool index with the encoder fitted to its collection.
class ToolIndex {
public:
    ToolIndex(std::vector<DocIndexEntry> entries, std::shared_ptr<const Encoder> encoder, Aggregation aggregation);

    const std::vector<DocIndexEntry>& entries() const noexcept { return entries_; }
    const Encoder& encoder() const noexcept { return *encoder_; }
    std::shared_ptr<const Encoder> encoder_ptr() const noexcept { return encoder_; }
    Aggregation aggregation() const noexcept { return aggregation_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::vector<std::string> doc_ids() const;
    /// Largest copy count over the tools.
    std::size_t copies_per_doc() const noexcept;
    /// Dense dimension, 0 for sparse indexes.
    std::size_t dim() const noexcept;

    /// One score per tool, in index order.
    std::vector<double> similarities(const EmbeddingVector& query) const;

private:
    std::vector<DocIndexEntry> entries_;
    std::shared_ptr<const Encoder> encoder_;
    Aggregation aggregation_;
};

/// Fits an encoder on every copy text (each copy one document), encodes the
/// copies and aggregates them per tool. The mean is summed in copy order and
/// divided by the copy count, so it is bit-reproducible.
ToolIndex build_index(const std::vector<DocCopies>& docs, const EncoderFactory& factory,
                      Aggregation aggregation = Aggregation::mean, std::size_t jobs = 1);

// ---------------------------------------------------------------- ranking

/// Ordering key (reversed rank, similarity), compared lexicographically.
struct RankKey {
    std::size_t reversed_rank = 0;
    double sim = 0.0;

    friend auto operator<=>(const RankKey&, const RankKey&) = default;
};

struct IntentScore {
    std::size_t intent_index = 0;
    std::string doc_id;
    double sim = 0.0;
    std::size_t reversed_rank = 0;  // 1 = lowest similarity within the intent

    RankKey key() const { return {reversed_rank, sim}; }
};

/// rows[i][j]: intent i against tool doc_ids[j].
struct ScoreMatrix {
    std::vector<std::string> doc_ids;
    std::vector<std::vector<IntentScore>> rows;
};

/// Assigns reversed ranks per row: sorting a row ascending by (sim, doc_id)
/// gives reversed rank 1, 2, ..., |D|. Doc ids must be unique.
ScoreMatrix rank_within_intents(std::vector<std::string> doc_ids, const std::vector<std::vector<double>>& sims);

/// Encodes each intent with the index encoder and scores it against every tool.
ScoreMatrix score_intents(const std::vector<Intent>& intents, const ToolIndex& index);

enum class Method { reinvoke, bm25, dense, hyde };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);

struct RankedDoc {
    std::string doc_id;
    RankKey key;
};

struct RetrievalResult {
    std::string query_id;
    Method method = Method::reinvoke;
    std::vector<RankedDoc> ranked;  // best first
};

/// Per tool, the lexicographic maximum of its (reversed rank, sim) keys over
/// all intents, in doc_ids order.
std::vector<RankKey> retrieval_keys(const ScoreMatrix& scores);

/// Top-k tools by retrieval key, descending; equal keys go doc_id ascending.
/// k is clamped to the number of tools.
RetrievalResult multiview_rank(const ScoreMatrix& scores, std::size_t k, std::string query_id = {});

/// Plain similarity ordering used by the baselines: descending sim, with
/// equal sims resolved the same way reversed ranks resolve them (larger
/// doc_id first). The key's reversed rank is |D| minus the position.
RetrievalResult rank_by_similarity(const std::vector<std::string>& doc_ids, const std::vector<double>& sims,
                                   std::size_t k, std::string query_id, Method method);

// ---------------------------------------------------------------- retrieval

/// Multi-view ranking of the given intents over an (expanded) index.
RetrievalResult reinvoke_rank(const std::vector<Intent>& intents, const ToolIndex& index, std::size_t k,
                              const std::string& query_id, ScoreMatrix* explain = nullptr);

/// Raw query against raw tool documents.
RetrievalResult baseline_retrieve(const Query& query, const ToolIndex& raw_index, std::size_t k, Method label);

struct HydeSettings {
    double temperature = 0.0;
    int max_output_tokens = 1024;
    RetryPolicy retry{};
};

std::string build_hyde_prompt(std::string_view query_text);

/// Generates one hypothetical tool document for the query and ranks the real
/// tools by their similarity to it. Falls back to baseline_retrieve on
/// generation failure or an empty document.
RetrievalResult hyde_retrieve(const Query& query, const ToolIndex& raw_index, std::size_t k, TextProvider& provider,
                              const HydeSettings& settings = {});

struct RetrievalSetup {
    const ToolIndex* expanded = nullptr;   // reinvoke
    const ToolIndex* raw_bm25 = nullptr;   // bm25 baseline (and hyde when encoder is bm25)
    const ToolIndex* raw_dense = nullptr;  // dense baseline (and hyde when encoder is dense)
    EncoderKind hyde_encoder = EncoderKind::bm25;
    TextProvider* llm = nullptr;           // intents and hyde; nullptr disables intent extraction
    IntentSettings intent{};
    HydeSettings hyde{};
};

struct RetrievalTrace {
    std::vector<Intent> intents;
    ScoreMatrix scores;
};

/// Dispatches to the chosen method. Throws Error if the setup lacks what
/// the method needs.
RetrievalResult retrieve(const Query& query, const RetrievalSetup& setup, std::size_t k, Method method,
                         RetrievalTrace* trace = nullptr);

// ---------------------------------------------------------------- persistence

/// Writes manifest.json, encoder.json and vectors.bin into `dir`.
void save_index(const ToolIndex& index, const std::filesystem::path& dir, const std::string& corpus_hash);

nlohmann::json read_index_manifest(const std::filesystem::path& dir);

/// Reloads an index. Dense indexes need the embedding provider used to build
/// them. Throws ChecksumError when vectors.bin does not match the manifest.
ToolIndex load_index(const std::filesystem::path& dir, std::shared_ptr<EmbeddingProvider> dense_provider = nullptr,
                     std::shared_ptr<EmbeddingCache> cache = nullptr);

/// TREC-style run lines: "query_id doc_id rank score method".
std::string format_run(const std::vector<RetrievalResult>& results);
std::vector<RetrievalResult> parse_run(std::string_view text, const std::string& source = "<memory>");

}  // namespace reinvoke
