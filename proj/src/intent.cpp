#include "reinvoke/intent.hpp"

#include "reinvoke/error.hpp"
#include "reinvoke/prompts.hpp"
#include "reinvoke/util.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

namespace reinvoke {

namespace {

constexpr std::string_view kIntentLabel = "Intent:";

std::string fold_newlines(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool gap = false;
    for (char c : text) {
        if (c == '\n' || c == '\r') {
            gap = true;
            continue;
        }
        if (gap && !out.empty() && out.back() != ' ') out.push_back(' ');
        gap = false;
        out.push_back(c);
    }
    return trim(out);
}

}  // namespace

std::string build_intent_prompt(std::string_view query_text) {
    if (trim(query_text).empty()) throw InvalidQuery("query text is empty");
    return prompts::fill(prompts::kIntentExtraction, prompts::kQuerySlot, query_text);
}

std::vector<std::string> parse_intent_response(std::string_view raw) {
    std::vector<std::string> intents;
    for (const auto& line : split_lines(raw)) {
        auto text = trim(line);
        if (text.substr(0, kIntentLabel.size()) == kIntentLabel) text = trim(text.substr(kIntentLabel.size()));
        if (!text.empty()) intents.push_back(std::move(text));
    }
    if (intents.empty()) throw NoIntents();
    return intents;
}

std::vector<Intent> passthrough_intent(const Query& query) {
    return {Intent{query.id, 1, fold_newlines(query.text)}};
}

std::vector<Intent> extract_intents(const Query& query, TextProvider& provider, const IntentSettings& settings) {
    if (settings.max_intents < 1) throw Error("max_intents must be at least 1");
    auto prompt = build_intent_prompt(query.text);
    std::vector<std::string> lines;
    try {
        auto resp = generate({prompt, settings.temperature, settings.max_output_tokens, std::nullopt}, provider,
                             settings.retry);
        lines = parse_intent_response(resp.text);
    } catch (const Error& e) {
        spdlog::warn("intent extraction for query {} fell back to the raw query: {}", query.id, e.what());
        return passthrough_intent(query);
    }

    std::vector<Intent> intents;
    std::set<std::string> seen;
    for (auto& line : lines) {
        if (intents.size() == settings.max_intents) break;
        if (!seen.insert(line).second) continue;
        intents.push_back({query.id, intents.size() + 1, std::move(line)});
    }
    return intents;
}

std::string serialize_intents(const std::vector<Intent>& intents) {
    std::string out;
    for (const auto& in : intents) {
        nlohmann::ordered_json j;
        j["query_id"] = in.query_id;
        j["intent_index"] = in.intent_index;
        j["text"] = in.text;
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

std::map<std::string, std::vector<Intent>> parse_intents(std::string_view jsonl, const std::string& source) {
    std::map<std::string, std::vector<Intent>> by_query;
    auto lines = split_lines(jsonl);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        Intent in;
        try {
            auto j = nlohmann::json::parse(lines[i]);
            in.query_id = j.at("query_id").get<std::string>();
            in.intent_index = j.at("intent_index").get<std::size_t>();
            in.text = j.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(source, i + 1, e.what());
        }
        auto& list = by_query[in.query_id];
        if (in.intent_index != list.size() + 1)
            throw ParseError(source, i + 1, "intent_index not contiguous for query " + in.query_id);
        list.push_back(std::move(in));
    }
    return by_query;
}

}  // namespace reinvoke
