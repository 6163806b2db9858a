#pragma once

#include "reinvoke/corpus.hpp"
#include "reinvoke/embedding.hpp"
#include "reinvoke/eval.hpp"
#include "reinvoke/http.hpp"
#include "reinvoke/index.hpp"
#include "reinvoke/llm.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace reinvoke::pipeline {

/// "mock" or "http". Mock generation may carry a script file mapping slot
/// text to canned responses; the mock embedder has a dimension.
struct ProviderSettings {
    std::string kind = "mock";
    HttpEndpoint endpoint{};
    std::filesystem::path script;
    std::size_t dim = 256;
};

struct PipelineConfig {
    std::filesystem::path corpus;
    CorpusFormat corpus_format = CorpusFormat::jsonl;
    std::filesystem::path dataset;
    ProviderSettings generation{};
    ProviderSettings embedding{};
    std::size_t m = 10;  // 0 disables expansion
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::size_t max_intents = 8;
    bool intent_extraction = true;
    std::vector<std::size_t> ks{1, 5, 10};
    EncoderKind encoder = EncoderKind::bm25;
    Aggregation aggregation = Aggregation::mean;
    std::vector<Method> methods{Method::reinvoke, Method::bm25};
    std::filesystem::path work_dir = "reinvoke-out";
    std::filesystem::path cache_dir;  // defaults to work_dir/cache
    std::size_t jobs = 1;
    std::uint64_t seed = 0;
    int retries = 3;

    /// Relative paths are resolved against base_dir.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    nlohmann::ordered_json to_json() const;

    std::filesystem::path effective_cache_dir() const;
    std::size_t retrieval_depth() const;
};

PipelineConfig load_config(const std::filesystem::path& path);

std::unique_ptr<TextProvider> make_text_provider(const ProviderSettings& settings);
std::shared_ptr<EmbeddingProvider> make_embedding_provider(const ProviderSettings& settings);

// Artifact locations; every directory name carries a digest of its inputs so
// runs with different settings never overwrite each other.
std::filesystem::path expansion_path(const PipelineConfig& config, const Corpus& corpus);
std::filesystem::path reinvoke_index_dir(const PipelineConfig& config, const Corpus& corpus);
std::filesystem::path raw_index_dir(const PipelineConfig& config, const Corpus& corpus, EncoderKind encoder);
std::filesystem::path run_path(const PipelineConfig& config, Method method);
std::filesystem::path intents_path(const PipelineConfig& config, const Corpus& corpus);

struct NormalizeResult {
    std::size_t documents = 0;
    std::size_t text_collisions = 0;
    std::filesystem::path output;
};

/// Loads the corpus in its declared format and writes canonical JSONL.
NormalizeResult cmd_normalize(const PipelineConfig& config, const std::filesystem::path& output, std::ostream& log);

struct ExpandResult {
    std::size_t generated = 0;
    std::size_t skipped = 0;  // already present
    std::size_t fallbacks = 0;
    std::filesystem::path output;
};

/// Generates the missing (doc_id, copy_index) pairs for copies 1..m and
/// rewrites the expansion file with old and new records.
ExpandResult cmd_expand(const PipelineConfig& config, std::ostream& log);

struct IndexInfo {
    std::string name;
    std::filesystem::path dir;
    std::size_t documents = 0;
};

/// Builds the expanded-document index and the raw-document indexes the configured
/// methods need.
std::vector<IndexInfo> cmd_index(const PipelineConfig& config, std::ostream& log);

struct RetrieveOptions {
    std::optional<std::string> query_text;  // ad-hoc query instead of the dataset
    std::optional<std::string> query_id;    // one dataset query
    bool explain = false;                   // print per-intent rows (reinvoke)
};

/// Writes one run file per configured method (dataset mode) or prints the
/// ranking of a single query.
std::vector<std::filesystem::path> cmd_retrieve(const PipelineConfig& config, const RetrieveOptions& options,
                                                std::ostream& out);

struct EvaluateResult {
    RunEvaluation evaluation;
    std::string table;
    std::filesystem::path json_path;
    std::filesystem::path table_path;
};

/// Evaluates run files (default: the configured methods' runs).
EvaluateResult cmd_evaluate(const PipelineConfig& config, const std::vector<std::filesystem::path>& run_files,
                            std::ostream& out);

struct RoundtripResult {
    std::vector<EvalReport> reports;
    std::filesystem::path json_path;
};

/// Round-trip recall@k of the synthetic queries against the expanded index.
RoundtripResult cmd_roundtrip(const PipelineConfig& config, std::ostream& out);

}  // namespace reinvoke::pipeline
