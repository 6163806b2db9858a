#include "reinvoke/llm.hpp"

#include "reinvoke/parallel.hpp"
#include "reinvoke/prompts.hpp"
#include "reinvoke/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <sstream>

namespace reinvoke {

void GenerationRequest::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0))
        throw Error("temperature must be in [0, 2], got " + format_double(temperature));
    if (max_output_tokens < 1) throw Error("max_output_tokens must be positive");
}

GenerationResponse generate(const GenerationRequest& req, TextProvider& provider,
                            const RetryPolicy& policy) {
    req.validate();
    return with_retry(policy, provider.id(), [&] {
        auto start = std::chrono::steady_clock::now();
        auto resp = provider.complete(req);
        resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - start)
                              .count();
        if (resp.provider_id.empty()) resp.provider_id = provider.id();
        return resp;
    });
}

std::vector<GenerationResponse> BatchResult::take_all() && {
    if (!failures.empty()) throw BatchError(std::move(failures));
    std::vector<GenerationResponse> out;
    out.reserve(responses.size());
    for (auto& r : responses) out.push_back(std::move(*r));
    return out;
}

BatchResult generate_many(std::span<const GenerationRequest> reqs, TextProvider& provider,
                          std::size_t parallelism, const RetryPolicy& policy) {
    if (parallelism < 1) throw Error("parallelism must be at least 1");
    BatchResult result;
    result.responses.resize(reqs.size());
    std::vector<std::optional<std::string>> errors(reqs.size());
    parallel_for(reqs.size(), parallelism, [&](std::size_t i) {
        try {
            result.responses[i] = generate(reqs[i], provider, policy);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (errors[i]) result.failures.push_back({i, *errors[i]});
    return result;
}

namespace {

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::istringstream in{std::string(text)};
    for (std::string w; in >> w;) words.push_back(std::move(w));
    return words;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> marked_segments(std::string_view query) {
    std::vector<std::string> segments;
    std::size_t pos = 0;
    while (true) {
        auto open = query.find("[[", pos);
        if (open == std::string_view::npos) break;
        auto close = query.find("]]", open + 2);
        if (close == std::string_view::npos) break;
        auto seg = trim(query.substr(open + 2, close - open - 2));
        if (!seg.empty()) segments.push_back(std::move(seg));
        pos = close + 2;
    }
    return segments;
}

std::string one_line(std::string_view text) {
    std::string out(text);
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return trim(out);
}

}  // namespace

MockProvider::MockProvider(MockOptions options) : options_(std::move(options)) {}

GenerationResponse MockProvider::complete(const GenerationRequest& req) {
    return GenerationResponse{respond(req.prompt, req.seed), options_.id, 0};
}

std::string MockProvider::respond(const std::string& prompt, std::optional<std::uint64_t> seed) const {
    std::string body;
    auto scripted = [&](const std::string& slot) -> bool {
        auto it = options_.script.find(trim(slot));
        if (it == options_.script.end()) return false;
        body = it->second;
        return true;
    };

    if (auto doc = prompts::extract_slot(prompts::kQueryGeneration, prompts::kDocumentSlot, prompt)) {
        if (!scripted(*doc)) {
            auto words = split_words(*doc);
            auto len = std::min(options_.query_words, words.size());
            std::size_t start = 0;
            if (words.size() > len) {
                auto h = stable_hash64(*doc + '\0' + std::to_string(seed.value_or(0)));
                start = h % (words.size() - len + 1);
            }
            body = join({words.begin() + static_cast<std::ptrdiff_t>(start),
                         words.begin() + static_cast<std::ptrdiff_t>(start + len)},
                        " ");
        }
    } else if (auto query = prompts::extract_slot(prompts::kIntentExtraction, prompts::kQuerySlot, prompt)) {
        if (!scripted(*query)) {
            auto segments = marked_segments(*query);
            body = segments.empty() ? one_line(*query) : join(segments, "\n");
        }
    } else if (auto hq = prompts::extract_slot(prompts::kHypotheticalDocument, prompts::kQuerySlot, prompt)) {
        if (!scripted(*hq)) {
            nlohmann::ordered_json doc;
            doc["api_name"] = "hypothetical_api";
            doc["api_description"] = one_line(*hq);
            doc["required_parameters"] = nlohmann::ordered_json::array();
            body = doc.dump(4);
        }
    } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(stable_hash64(prompt)));
        body = std::string("mock completion ") + buf;
    }

    if (seed) body += " (variant " + std::to_string(*seed) + ")";
    return body;
}

}  // namespace reinvoke
