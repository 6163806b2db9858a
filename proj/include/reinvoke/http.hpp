#pragma once

#include "reinvoke/embedding.hpp"
#include "reinvoke/llm.hpp"

#include <chrono>
#include <string>

namespace reinvoke {

/// An OpenAI-compatible endpoint. The credential is read from the
/// environment variable named by api_key_env at request time; an empty name
/// sends no Authorization header.
struct HttpEndpoint {
    std::string base_url;  // e.g. "https://api.example.com/v1"
    std::string model;
    std::string api_key_env;
    std::chrono::seconds timeout{60};
};

/// POST {base_url}/chat/completions with a single user message.
/// 401/403 -> AuthError; 408, 429 and 5xx -> transient ProviderError;
/// other statuses -> non-transient ProviderError; connect/read timeouts -> Timeout.
class HttpChatProvider : public TextProvider {
public:
    explicit HttpChatProvider(HttpEndpoint endpoint);

    std::string id() const override;
    GenerationResponse complete(const GenerationRequest& req) override;

private:
    HttpEndpoint endpoint_;
};

/// POST {base_url}/embeddings with {"model", "input": [texts]}; reads
/// data[i].embedding, ordered by data[i].index when present.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpEndpoint endpoint);

    std::string id() const override;
    std::string model() const override { return endpoint_.model; }
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
    HttpEndpoint endpoint_;
};

}  // namespace reinvoke
