#pragma once

#include "reinvoke/llm.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace reinvoke {

struct Query {
    std::string id;
    std::string text;
};

/// One tool-related request extracted from a user query.
struct Intent {
    std::string query_id;
    std::size_t intent_index = 0;  // contiguous from 1 within a query
    std::string text;              // single line

    bool operator==(const Intent&) const = default;
};

/// Throws InvalidQuery for an empty or all-whitespace query.
std::string build_intent_prompt(std::string_view query_text);

/// One intent per non-blank line, trimmed, with any leading "Intent:" label
/// removed. Throws NoIntents when nothing remains.
std::vector<std::string> parse_intent_response(std::string_view raw);

struct IntentSettings {
    std::size_t max_intents = 8;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    RetryPolicy retry{};
};

/// Asks the provider for the query's intents. Duplicate lines are dropped
/// and the list is cut to max_intents. Any failure (provider error, no
/// parsable intents) yields passthrough_intent(query) instead.
std::vector<Intent> extract_intents(const Query& query, TextProvider& provider,
                                    const IntentSettings& settings = {});

/// The query itself as the only intent (newlines folded to spaces).
std::vector<Intent> passthrough_intent(const Query& query);

/// JSONL of {query_id, intent_index, text}.
std::string serialize_intents(const std::vector<Intent>& intents);
std::map<std::string, std::vector<Intent>> parse_intents(std::string_view jsonl,
                                                         const std::string& source = "<memory>");

}  // namespace reinvoke
