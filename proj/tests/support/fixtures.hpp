#pragma once

#include "reinvoke/corpus.hpp"
#include "reinvoke/embedding.hpp"
#include "reinvoke/llm.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write(const std::filesystem::path& path, const std::string& contents);

/// Unique token j of tool i; tokens of different tools never coincide.
std::string token(std::size_t tool, std::size_t j);

/// `n` tools named tool000, tool001, ... whose descriptions use only their
/// own `words` tokens.
std::vector<reinvoke::Json> disjoint_records(std::size_t n, std::size_t words = 8);
reinvoke::Corpus disjoint_corpus(std::size_t n, std::size_t words = 8);

/// Eight travel/household tools with disjoint vocabularies, including a
/// flight booker (flights::book_flight) and a restaurant finder
/// (dining::find_restaurant).
reinvoke::Corpus travel_corpus();
extern const char* const kFlightRestaurantQuery;

/// Calls fn for every completion and counts calls. Thread-safe if fn is.
class FnProvider : public reinvoke::TextProvider {
public:
    using Fn = std::function<std::string(const reinvoke::GenerationRequest&, int call)>;
    explicit FnProvider(Fn fn, std::string id = "fn") : fn_(std::move(fn)), id_(std::move(id)) {}

    std::string id() const override { return id_; }
    reinvoke::GenerationResponse complete(const reinvoke::GenerationRequest& req) override {
        int call = calls_.fetch_add(1);
        return {fn_(req, call), id_, 0};
    }
    int calls() const { return calls_.load(); }

private:
    Fn fn_;
    std::string id_;
    std::atomic<int> calls_{0};
};

/// Embedding provider wrapper that counts texts sent to the backend.
class CountingEmbedder : public reinvoke::EmbeddingProvider {
public:
    explicit CountingEmbedder(std::size_t dim = 64) : inner_(dim) {}
    std::string id() const override { return inner_.id(); }
    std::string model() const override { return inner_.model(); }
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        texts_sent += static_cast<int>(texts.size());
        ++batches;
        return inner_.embed(texts);
    }
    std::atomic<int> texts_sent{0};
    std::atomic<int> batches{0};

private:
    reinvoke::MockEmbeddingProvider inner_;
};

reinvoke::RetryPolicy fast_retry(int retries);

using Rng = std::mt19937_64;
std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi);  // inclusive
double uniform_real(Rng& rng, double lo, double hi);

/// Random text over a small vocabulary "t0".."t{vocab-1}".
std::string random_text(Rng& rng, std::size_t vocab, std::size_t min_len, std::size_t max_len);

}  // namespace fixtures
