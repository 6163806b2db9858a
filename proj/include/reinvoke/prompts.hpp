#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace reinvoke::prompts {

inline constexpr std::string_view kDocumentSlot = "<tool document>";
inline constexpr std::string_view kQuerySlot = "<user query>";

/// Synthetic query generation; the document goes into kDocumentSlot.
inline constexpr std::string_view kQueryGeneration =
    R"(Suppose you are an assistant and you have access to the following API to answer user's queries.
You are provided with a tool and its available API function including the description and
parameters.

Your task is to generate a possible user query that can be handled by the API.

You must include the input parameters required in the API call. Please be creative and generate
random but specific information for the required parameters.
Now you are given the API documentation below:

<tool document>

Please generate a user query that you will need to call this tool. Note the generated query should
be complex enough to describe the scenarios that you will need to call the provided API to address
them.

The relevant query is:)";

/// Few-shot intent extraction; the user query goes into kQuerySlot.
inline constexpr std::string_view kIntentExtraction =
    R"(**Instructions**
Suppose you are a query analyzer and your task is to extract the underlying user intents from the
input query. You should preserve all the underlying user request and the extracted user intents
should be easily understood without extra context information.
You should carefully read the given user query to understand its different intents. Then identify
what are the specific intents. Each individual intent should be separated by a newline.

Here are some examples of how you should solve the task.

**Example**
Query: I'm planning to travel to Paris next weekend to visit my family, could you help me book a
round trip flight ticket? I want to fly in economy class.
Intent:
book a round-trip flight ticket in economy class to Paris next weekend

Query: I'm a potential buyer looking for a condominium in the city of Miami. I am specifically
interested in properties that have a minimum of two bathrooms. It should have walkable distance to
the grocery stores.
Intent:
buy a real estate in Miami with a minimum of two bathrooms and walkable distance to the grocery
stores

Query: I want to learn Spanish by talking to the native speakers at any time. Additionally, can you
recommend some interesting books, preferably fictions, so that I can learn by reading? Also include
the websites that I can buy them.
Intent:
learn Spanish by talking to the native speakers
recommend fictions to learn Spanish by reading
suggest the websites to buy Sanish fictions

**Begin!**
Query: <user query>
Intent:)";

/// One-shot hypothetical tool document generation; the query goes into kQuerySlot.
inline constexpr std::string_view kHypotheticalDocument =
    R"(Suppose you are an assistant and you have access to the API documentation to answer user's queries.
Please generate an API documentation in the JSON format that can be called to handle this query.
The API documentation should be general enough to handle the cases beyond the provided queries.
Please provide detailed descriptions on the parameters.

**Examples**
Query: I'm planning to travel to Paris next weekend to visit my family, could you help me book a
round trip flight ticket? I want to fly in economy class.
The API documentation is:
{
    "api_name": "flights",
    "api_description": "Search the flight ticket on a specific travel date."
    "required_parameters": [
        {
            "name": "departure_date",
            "type" DATETIME,
            "description": "The departure date for the flight."
        },
        {
            "name": "from",
            "type" STRING,
            "description": "The city where the flight departs."
        },
        {
            "name": "to",
            "type" STRING,
            "description": "The city where the flight arrives."
        },
        {
            "name": "fare_class",
            "type": STRING,
            "description": "The fare class for the flight, economy, business or first."
        }
    ],
    "optional_parameters": [
        {
            "name": "return_date",
            "type": DATETIME,
            "description": "The return date for the flight."
        }
    ]
}

**Begin!**
Query: <user query>
The API documentation is:)";

/// Replaces the single occurrence of `slot` in `tmpl` with `value`.
std::string fill(std::string_view tmpl, std::string_view slot, std::string_view value);

/// Inverse of fill: returns the slot contents if `prompt` was produced from `tmpl`.
std::optional<std::string> extract_slot(std::string_view tmpl, std::string_view slot,
                                        std::string_view prompt);

}  // namespace reinvoke::prompts
