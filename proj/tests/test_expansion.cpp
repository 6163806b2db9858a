#include "reinvoke/error.hpp"
#include "reinvoke/expansion.hpp"
#include "reinvoke/prompts.hpp"
#include "reinvoke/util.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace reinvoke;
using fixtures::FnProvider;

namespace {

ToolDocument doc_with_text(const std::string& id, const std::string& text) {
    return make_document(Json{{"doc_id", id}, {"description", text}});
}

}  // namespace

TEST_CASE("generation prompt fills only the document slot") {
    auto a = doc_with_text("a", "alpha");
    auto b = doc_with_text("b", "beta\nsecond line");
    auto pa = build_generation_prompt(a);
    auto pb = build_generation_prompt(b);
    CHECK(pa.find("The relevant query is:") != std::string::npos);
    CHECK(pb.find("description: beta\nsecond line") != std::string::npos);
    CHECK(*prompts::extract_slot(prompts::kQueryGeneration, prompts::kDocumentSlot, pa) == a.text);
    CHECK(*prompts::extract_slot(prompts::kQueryGeneration, prompts::kDocumentSlot, pb) == b.text);
}

TEST_CASE("expanded text template") {
    CHECK(expanded_text("T", "Q") == "Documentation: T Query: Q");
}

TEST_CASE("m synthetic queries with distinct seeds") {
    MockProvider mock;
    auto doc = fixtures::travel_corpus().documents()[0];
    auto qs = generate_synthetic_queries(doc, 10, mock);
    REQUIRE(qs.size() == 10);
    std::set<std::string> texts;
    for (std::size_t i = 0; i < qs.size(); ++i) {
        CHECK(qs[i].doc_id == doc.doc_id);
        CHECK(qs[i].copy_index == i + 1);
        CHECK(qs[i].seed == i + 1);
        CHECK(qs[i].temperature == 0.7);
        CHECK_FALSE(qs[i].fallback);
        CHECK(qs[i].text == trim(qs[i].text));
        texts.insert(qs[i].text);
    }
    CHECK(texts.size() == 10);

    auto one = generate_synthetic_queries(doc, 1, mock);
    REQUIRE(one.size() == 1);
    CHECK(one[0].copy_index == 1);
    CHECK(one[0] == qs[0]);
}

TEST_CASE("seed_base shifts every seed") {
    MockProvider mock;
    auto doc = fixtures::travel_corpus().documents()[1];
    GenerationSettings s;
    s.seed_base = 100;
    auto qs = generate_synthetic_queries(doc, 3, mock, s);
    CHECK(qs[2].seed == 103);
}

TEST_CASE("empty completions are regenerated, then fall back to the document") {
    auto doc = doc_with_text("d", "some tool");
    SUBCASE("recovers on the second attempt") {
        FnProvider p([](const GenerationRequest&, int call) { return call < 2 ? std::string("   ") : "real query"; });
        auto qs = generate_synthetic_queries(doc, 2, p);
        CHECK(qs[0].text == "real query");
        CHECK(qs[1].text == "real query");
        CHECK_FALSE(qs[0].fallback);
    }
    SUBCASE("exhausted budget") {
        FnProvider p([](const GenerationRequest&, int) { return std::string("\n"); });
        GenerationSettings s;
        s.empty_retries = 2;
        auto qs = generate_synthetic_queries(doc, 2, p, s);
        CHECK(p.calls() == 6);
        CHECK(qs[0].fallback);
        CHECK(qs[0].text == doc.text);
    }
}

TEST_CASE("more than half failing is a GenerationError") {
    auto doc = doc_with_text("d", "some tool");
    GenerationSettings s;
    s.retry = RetryPolicy::none();
    FnProvider half([](const GenerationRequest& r, int) -> std::string {
        if (*r.seed % 2 == 0) throw ProviderError("down", 500, true);
        return "q";
    });
    auto qs = generate_synthetic_queries(doc, 4, half, s);  // exactly half fail: tolerated
    CHECK(qs[0].text == "q");
    CHECK(qs[1].fallback);
    CHECK(qs[1].text == doc.text);
    CHECK_FALSE(qs[2].fallback);

    FnProvider most([](const GenerationRequest& r, int) -> std::string {
        if (*r.seed != 1) throw ProviderError("down", 500, true);
        return "q";
    });
    CHECK_THROWS_AS(generate_synthetic_queries(doc, 3, most, s), GenerationError);
}

TEST_CASE("expand_document") {
    MockProvider mock;
    auto doc = fixtures::travel_corpus().documents()[2];
    auto qs = generate_synthetic_queries(doc, 10, mock);
    std::reverse(qs.begin(), qs.end());
    auto copies = expand_document(doc, qs);
    REQUIRE(copies.size() == 10);
    for (std::size_t i = 0; i < copies.size(); ++i) {
        CHECK(copies[i].copy_index == i + 1);
        CHECK(copies[i].doc_id == doc.doc_id);
        CHECK(copies[i].text.find(doc.text) != std::string::npos);
        CHECK(copies[i].text == expanded_text(doc.text, qs[9 - i].text));
    }

    auto foreign = qs;
    foreign[3].doc_id = "other";
    CHECK_THROWS_AS(expand_document(doc, foreign), MismatchedDoc);
    auto dup = qs;
    dup[3].copy_index = dup[4].copy_index;
    CHECK_THROWS_AS(expand_document(doc, dup), MismatchedDoc);
}

TEST_CASE("expansion persistence and reproducibility") {
    MockProvider mock;
    auto corpus = fixtures::travel_corpus();
    GenerationSettings s;
    s.parallelism = 3;
    auto a = expand_corpus(corpus, 3, mock, s);
    auto b = expand_corpus(corpus, 3, mock);
    CHECK(serialize_expansion(a) == serialize_expansion(b));
    REQUIRE(a.queries.size() == corpus.size() * 3);
    CHECK(a.queries[3].doc_id == corpus.documents()[1].doc_id);

    auto back = parse_expansion(serialize_expansion(a));
    CHECK(back.queries == a.queries);
    CHECK(back.documents == a.documents);

    fixtures::TempDir dir;
    fixtures::write(dir / "e.jsonl", serialize_expansion(a));
    CHECK(load_expansion(dir / "e.jsonl").documents == a.documents);
    CHECK_THROWS_AS(parse_expansion("{\"doc_id\":\"x\"}"), ParseError);
}
