#pragma once

#include "reinvoke/retry.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace reinvoke {

/// Lowercases ASCII and splits on every ASCII character that is not a letter
/// or digit. Bytes >= 0x80 are kept as word characters so UTF-8 words survive.
std::vector<std::string> tokenize(std::string_view text);

/// term -> weight; zero weights are never stored.
struct SparseVector {
    std::map<std::string, double> entries;

    void add(const std::string& term, double weight);
    std::size_t size() const noexcept { return entries.size(); }
    bool operator==(const SparseVector&) const = default;

    /// Term counts of tokenize(text).
    static SparseVector counts(std::string_view text);
};

struct DenseVector {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const DenseVector&) const = default;
};

using EmbeddingVector = std::variant<SparseVector, DenseVector>;

double dot(const SparseVector& a, const SparseVector& b);
double dot(const DenseVector& a, const DenseVector& b);  // DimensionMismatch

/// Dot product. Sparse with dense, or dense vectors of different dims,
/// throw DimensionMismatch.
double similarity(const EmbeddingVector& q, const EmbeddingVector& d);

/// Scales to unit L2 norm; the zero vector is left unchanged.
void l2_normalize(DenseVector& v);

/// Arithmetic mean, summed in input order then divided by the count.
/// All inputs must share a representation (and dim, if dense).
EmbeddingVector mean_vector(std::span<const EmbeddingVector> vectors);

// ---------------------------------------------------------------- BM25

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
};

struct Bm25Stats {
    std::size_t doc_count = 0;
    double avg_doc_len = 0.0;
    std::unordered_map<std::string, std::size_t> doc_freq;
    double k1 = 1.5;
    double b = 0.75;

    /// ln(1 + (N - df + 0.5) / (df + 0.5)); df = 0 for unseen terms.
    double idf(const std::string& term) const;

    nlohmann::json to_json() const;
    static Bm25Stats from_json(const nlohmann::json& j);
};

/// Statistics over `texts`, each text one document. Throws EmptyCorpus.
Bm25Stats bm25_fit(const std::vector<std::string>& texts, Bm25Params params = {});

/// Document-side weights: idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avg_len)).
/// Dotting with SparseVector::counts(query) gives the BM25 score.
SparseVector bm25_doc_vector(std::string_view doc_text, const Bm25Stats& stats);

// ---------------------------------------------------------------- dense

/// Backend that maps a batch of texts to raw (unnormalized) float arrays.
/// Must be safe for concurrent calls.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string id() const = 0;
    virtual std::string model() const = 0;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

/// Signed feature hashing of the tokens into `dim` buckets. Texts sharing
/// vocabulary get high cosine; identical texts get identical vectors.
class MockEmbeddingProvider : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(std::size_t dim = 256) : dim_(dim) {}

    std::string id() const override { return "mock-embedding"; }
    std::string model() const override { return "hash-" + std::to_string(dim_); }
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
    std::size_t dim_;
};

/// On-disk vector cache keyed by (provider id, model, content hash).
/// Each vector lives in "<key>.f64" (u32 dim, then dim little-endian
/// doubles); "manifest.json" indexes the keys. Files are replaced
/// atomically, so concurrent writers of the same key are last-write-wins.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::filesystem::path dir);

    static std::string key(std::string_view provider_id, std::string_view model, std::string_view text);

    std::optional<std::vector<double>> get(const std::string& key) const;
    void put(const std::string& key, const std::vector<double>& values, std::string_view provider_id,
             std::string_view model);

    /// Merges pending manifest entries into manifest.json.
    void flush();

    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
    nlohmann::json pending_ = nlohmann::json::object();
};

struct DenseEncodeOptions {
    std::size_t batch_size = 64;
    std::size_t jobs = 1;
    RetryPolicy retry{};
};

/// One L2-normalized vector per text, in input order. Cached vectors are
/// reused; misses are deduplicated and sent in batches. Throws
/// DimensionMismatch if the provider returns inconsistent dims.
std::vector<DenseVector> dense_encode(const std::vector<std::string>& texts, EmbeddingProvider& provider,
                                      EmbeddingCache* cache = nullptr, const DenseEncodeOptions& options = {});

// ---------------------------------------------------------------- encoders

enum class EncoderKind { bm25, dense };

EncoderKind parse_encoder_kind(std::string_view name);
std::string_view to_string(EncoderKind kind);

/// Maps documents and queries into a shared vector space.
class Encoder {
public:
    virtual ~Encoder() = default;
    virtual EncoderKind kind() const = 0;
    virtual std::vector<EmbeddingVector> encode_documents(const std::vector<std::string>& texts) const = 0;
    virtual std::vector<EmbeddingVector> encode_queries(const std::vector<std::string>& texts) const = 0;
    /// Enough state to rebuild the encoder after a reload.
    virtual nlohmann::json state() const = 0;
};

/// Documents become BM25 weight vectors over the fitted collection; queries
/// become raw term counts.
class Bm25Encoder final : public Encoder {
public:
    explicit Bm25Encoder(Bm25Stats stats) : stats_(std::move(stats)) {}

    EncoderKind kind() const override { return EncoderKind::bm25; }
    std::vector<EmbeddingVector> encode_documents(const std::vector<std::string>& texts) const override;
    std::vector<EmbeddingVector> encode_queries(const std::vector<std::string>& texts) const override;
    nlohmann::json state() const override { return stats_.to_json(); }

    const Bm25Stats& stats() const noexcept { return stats_; }

private:
    Bm25Stats stats_;
};

class DenseEncoder final : public Encoder {
public:
    DenseEncoder(std::shared_ptr<EmbeddingProvider> provider, std::shared_ptr<EmbeddingCache> cache = nullptr,
                 DenseEncodeOptions options = {});

    EncoderKind kind() const override { return EncoderKind::dense; }
    std::vector<EmbeddingVector> encode_documents(const std::vector<std::string>& texts) const override;
    std::vector<EmbeddingVector> encode_queries(const std::vector<std::string>& texts) const override;
    nlohmann::json state() const override;

private:
    std::shared_ptr<EmbeddingProvider> provider_;
    std::shared_ptr<EmbeddingCache> cache_;
    DenseEncodeOptions options_;
};

/// Produces an encoder fitted to a document collection (BM25 needs the
/// collection statistics; dense encoders ignore it).
using EncoderFactory = std::function<std::shared_ptr<const Encoder>(const std::vector<std::string>& collection)>;

EncoderFactory bm25_encoder_factory(Bm25Params params = {});
EncoderFactory dense_encoder_factory(std::shared_ptr<EmbeddingProvider> provider,
                                     std::shared_ptr<EmbeddingCache> cache = nullptr,
                                     DenseEncodeOptions options = {});

}  // namespace reinvoke
