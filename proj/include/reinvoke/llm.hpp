#pragma once

#include "reinvoke/error.hpp"
#include "reinvoke/retry.hpp"

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reinvoke {

struct GenerationRequest {
    std::string prompt;
    double temperature = 0.7;
    int max_output_tokens = 1024;
    std::optional<std::uint64_t> seed;  // honored only by the mock provider

    /// Throws Error when temperature is outside [0, 2] or max_output_tokens < 1.
    void validate() const;
};

struct GenerationResponse {
    std::string text;  // may be empty; callers decide what that means
    std::string provider_id;
    std::int64_t latency_ms = 0;
};

/// A text-generation backend. complete() is a single attempt and must be
/// safe to call from several threads at once. Failures are reported by
/// throwing ProviderError, Timeout or AuthError.
class TextProvider {
public:
    virtual ~TextProvider() = default;
    virtual std::string id() const = 0;
    virtual GenerationResponse complete(const GenerationRequest& req) = 0;
};

/// One completion with retry. Transient ProviderError and Timeout are
/// retried up to policy.max_retries times with exponential backoff;
/// AuthError and non-transient errors are rethrown immediately.
GenerationResponse generate(const GenerationRequest& req, TextProvider& provider,
                            const RetryPolicy& policy = {});

struct BatchResult {
    std::vector<std::optional<GenerationResponse>> responses;  // responses[i] answers request i
    std::vector<BatchFailure> failures;                        // sorted by index

    bool ok() const noexcept { return failures.empty(); }

    /// All responses, or BatchError listing the failed indices.
    std::vector<GenerationResponse> take_all() &&;
};

/// Runs generate() over reqs with at most `parallelism` requests in flight.
BatchResult generate_many(std::span<const GenerationRequest> reqs, TextProvider& provider,
                          std::size_t parallelism, const RetryPolicy& policy = {});

struct MockOptions {
    std::string id = "mock";
    /// Exact slot text -> canned response; consulted before the built-in behaviors.
    std::map<std::string, std::string> script;
    /// Word window copied out of the tool document for synthetic queries.
    std::size_t query_words = 12;
};

/// Deterministic offline provider. It recognizes the three pipeline prompts
/// and answers each from the slot contents:
///   query generation  -> a seeded window of the document's words
///   intent extraction -> each "[[...]]" segment of the query on its own
///                        line, or the whole query when none is marked
///   hypothetical doc  -> a small JSON API record describing the query
/// Anything else gets a hash-derived filler. When the request carries a seed,
/// " (variant <seed>)" is appended, so output is a pure function of
/// (prompt, seed) and distinct seeds never collide.
class MockProvider : public TextProvider {
public:
    explicit MockProvider(MockOptions options = {});

    std::string id() const override { return options_.id; }
    GenerationResponse complete(const GenerationRequest& req) override;

private:
    std::string respond(const std::string& prompt, std::optional<std::uint64_t> seed) const;

    MockOptions options_;
};

}  // namespace reinvoke
