#include "reinvoke/http.hpp"

#include "reinvoke/error.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <regex>

namespace reinvoke {

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // without trailing slash
};

ParsedUrl parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw Error("invalid base URL: " + url);
    std::string path = m[2].matched ? m[2].str() : "";
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {m[1].str(), path};
}

std::string endpoint_id(const HttpEndpoint& ep) {
    return parse_url(ep.base_url).origin + "#" + ep.model;
}

nlohmann::json post_json(const HttpEndpoint& ep, const std::string& route, const nlohmann::json& body) {
    auto url = parse_url(ep.base_url);
    httplib::Client client(url.origin);
    client.set_connection_timeout(ep.timeout);
    client.set_read_timeout(ep.timeout);
    client.set_write_timeout(ep.timeout);

    httplib::Headers headers;
    if (!ep.api_key_env.empty()) {
        const char* key = std::getenv(ep.api_key_env.c_str());
        if (!key || !*key) throw AuthError("credential variable " + ep.api_key_env + " is not set", 0);
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = client.Post(url.path + route, headers, body.dump(), "application/json");
    if (!res) {
        auto err = res.error();
        auto msg = url.origin + url.path + route + ": " + httplib::to_string(err);
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) throw Timeout(msg);
        throw ProviderError(msg);
    }
    const int status = res->status;
    if (status == 401 || status == 403) throw AuthError("HTTP " + std::to_string(status) + ": " + res->body, status);
    if (status < 200 || status >= 300) {
        bool transient = status == 408 || status == 429 || status >= 500;
        throw ProviderError("HTTP " + std::to_string(status) + ": " + res->body, status, transient);
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("malformed response body: ") + e.what(), status, false);
    }
}

}  // namespace

HttpChatProvider::HttpChatProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    parse_url(endpoint_.base_url);
}

std::string HttpChatProvider::id() const {
    return endpoint_id(endpoint_);
}

GenerationResponse HttpChatProvider::complete(const GenerationRequest& req) {
    nlohmann::json body = {
        {"model", endpoint_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}})},
        {"temperature", req.temperature},
        {"max_tokens", req.max_output_tokens},
        {"n", 1},
    };
    auto reply = post_json(endpoint_, "/chat/completions", body);
    try {
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        return GenerationResponse{content.is_null() ? std::string{} : content.get<std::string>(), id(), 0};
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected completion shape: ") + e.what(), 200, false);
    }
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    parse_url(endpoint_.base_url);
}

std::string HttpEmbeddingProvider::id() const {
    return endpoint_id(endpoint_);
}

std::vector<std::vector<double>> HttpEmbeddingProvider::embed(std::span<const std::string> texts) {
    nlohmann::json body = {{"model", endpoint_.model},
                           {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    auto reply = post_json(endpoint_, "/embeddings", body);
    try {
        const auto& data = reply.at("data");
        std::vector<std::vector<double>> out(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            auto slot = data[i].contains("index") ? data[i].at("index").get<std::size_t>() : i;
            if (slot >= out.size()) throw ProviderError("embedding index out of range", 200, false);
            out[slot] = data[i].at("embedding").get<std::vector<double>>();
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected embedding shape: ") + e.what(), 200, false);
    }
}

}  // namespace reinvoke
