#include "reinvoke/error.hpp"
#include "reinvoke/index.hpp"
#include "reinvoke/util.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

using namespace reinvoke;
using fixtures::TempDir;

namespace {

/// Encoder returning fixed vectors per text, for aggregation checks.
class TableEncoder : public Encoder {
public:
    explicit TableEncoder(std::map<std::string, EmbeddingVector> table) : table_(std::move(table)) {}
    EncoderKind kind() const override { return EncoderKind::dense; }
    std::vector<EmbeddingVector> encode_documents(const std::vector<std::string>& texts) const override {
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) out.push_back(table_.at(t));
        return out;
    }
    std::vector<EmbeddingVector> encode_queries(const std::vector<std::string>& texts) const override {
        return encode_documents(texts);
    }
    nlohmann::json state() const override { return nlohmann::json::object(); }

private:
    std::map<std::string, EmbeddingVector> table_;
};

EncoderFactory table_factory(std::map<std::string, EmbeddingVector> table) {
    return [table](const std::vector<std::string>&) { return std::make_shared<TableEncoder>(table); };
}

SparseVector sparse(std::initializer_list<std::pair<const std::string, double>> entries) {
    SparseVector v;
    for (const auto& [t, w] : entries) v.add(t, w);
    return v;
}

}  // namespace

TEST_CASE("mean aggregation") {
    auto idx = build_index({{"d", {"x", "y"}}}, table_factory({{"x", DenseVector{{1, 0}}}, {"y", DenseVector{{0, 1}}}}));
    CHECK(std::get<DenseVector>(idx.entries()[0].agg_vector()).values == std::vector<double>{0.5, 0.5});
    CHECK(idx.entries()[0].copy_count == 2);
    CHECK(idx.dim() == 2);

    auto single = build_index({{"d", {"x"}}}, table_factory({{"x", DenseVector{{0.6, 0.8}}}}));
    CHECK(std::get<DenseVector>(single.entries()[0].agg_vector()).values == std::vector<double>{0.6, 0.8});

    auto sp = build_index({{"d", {"p", "q"}}}, table_factory({{"p", sparse({{"a", 2}})}, {"q", sparse({{"a", 0}, {"b", 4}})}}));
    CHECK(std::get<SparseVector>(sp.entries()[0].agg_vector()).entries == std::map<std::string, double>{{"a", 1}, {"b", 2}});
}

TEST_CASE("max aggregation keeps per-copy vectors") {
    auto f = table_factory({{"x", DenseVector{{1, 0}}}, {"y", DenseVector{{0, 1}}}, {"q", DenseVector{{0.2, 0.9}}}});
    auto idx = build_index({{"d", {"x", "y"}}}, f, Aggregation::max);
    CHECK(idx.entries()[0].vectors.size() == 2);
    CHECK(idx.similarities(DenseVector{{0.2, 0.9}})[0] == doctest::Approx(0.9));
    auto mean = build_index({{"d", {"x", "y"}}}, f, Aggregation::mean);
    CHECK(mean.similarities(DenseVector{{0.2, 0.9}})[0] == doctest::Approx(0.55));
}

TEST_CASE("sparse mean is linear in the BM25 scores") {
    fixtures::Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<DocCopies> docs;
        std::vector<std::string> flat;
        for (std::size_t d = 0; d < 4; ++d) {
            DocCopies c{"d" + std::to_string(d), {}};
            for (std::size_t i = 0; i < fixtures::uniform(rng, 1, 4); ++i) {
                c.texts.push_back(fixtures::random_text(rng, 12, 1, 10));
                flat.push_back(c.texts.back());
            }
            docs.push_back(c);
        }
        auto idx = build_index(docs, bm25_encoder_factory());
        auto query = fixtures::random_text(rng, 14, 1, 5);
        auto sims = idx.similarities(idx.encoder().encode_queries({query})[0]);
        std::size_t offset = 0;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            double mean = 0;
            for (std::size_t i = 0; i < docs[d].texts.size(); ++i) mean += oracle::bm25_score(query, flat, offset + i);
            mean /= static_cast<double>(docs[d].texts.size());
            offset += docs[d].texts.size();
            CHECK(std::abs(sims[d] - mean) < 1e-9);
        }
    }
}

TEST_CASE("copies from an expansion") {
    auto corpus = fixtures::disjoint_corpus(3);
    MockProvider mock;
    auto exp = expand_corpus(corpus, 2, mock);
    auto copies = copies_from_expansion(corpus, exp.documents);
    REQUIRE(copies.size() == 3);
    CHECK(copies[1].doc_id == "tool001");
    CHECK(copies[1].texts.size() == 2);

    auto missing = exp.documents;
    missing.erase(missing.begin(), missing.begin() + 2);
    CHECK_THROWS_AS(copies_from_expansion(corpus, missing), MissingCopies);
    auto stray = exp.documents;
    stray[0].doc_id = "ghost";
    CHECK_THROWS_AS(copies_from_expansion(corpus, stray), MismatchedDoc);
    CHECK_THROWS_AS(build_index({{"x", {}}}, bm25_encoder_factory()), MissingCopies);
    CHECK_THROWS_AS(build_index({}, bm25_encoder_factory()), EmptyCorpus);
}

TEST_CASE("parallel index building matches serial") {
    auto corpus = fixtures::disjoint_corpus(20);
    MockProvider mock;
    auto copies = copies_from_expansion(corpus, expand_corpus(corpus, 3, mock).documents);
    auto a = build_index(copies, bm25_encoder_factory(), Aggregation::mean, 1);
    auto b = build_index(copies, bm25_encoder_factory(), Aggregation::mean, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.entries()[i].vectors == b.entries()[i].vectors);
}

TEST_CASE("index persistence") {
    TempDir dir;
    auto corpus = fixtures::disjoint_corpus(3);
    MockProvider mock;
    auto copies = copies_from_expansion(corpus, expand_corpus(corpus, 2, mock).documents);

    SUBCASE("bm25 round trip") {
        auto idx = build_index(copies, bm25_encoder_factory());
        save_index(idx, dir / "bm25", corpus.content_hash());
        auto manifest = read_index_manifest(dir / "bm25");
        CHECK(manifest["encoder"] == "bm25");
        CHECK(manifest["m"] == 2);
        CHECK(manifest["doc_count"] == 3);
        CHECK(manifest["aggregation"] == "mean");
        CHECK(manifest["corpus_hash"] == corpus.content_hash());
        auto back = load_index(dir / "bm25");
        REQUIRE(back.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) CHECK(back.entries()[i].vectors == idx.entries()[i].vectors);
        auto q = back.encoder().encode_queries({"k001x3"})[0];
        CHECK(back.similarities(q) == idx.similarities(idx.encoder().encode_queries({"k001x3"})[0]));
    }
    SUBCASE("dense round trip needs the same provider") {
        auto provider = std::make_shared<MockEmbeddingProvider>(16);
        auto idx = build_index(copies, dense_encoder_factory(provider), Aggregation::max);
        save_index(idx, dir / "dense", corpus.content_hash());
        auto back = load_index(dir / "dense", provider);
        CHECK(back.aggregation() == Aggregation::max);
        CHECK(back.dim() == 16);
        CHECK(back.entries()[2].vectors == idx.entries()[2].vectors);
        CHECK_THROWS_AS(load_index(dir / "dense"), Error);
        CHECK_THROWS_AS(load_index(dir / "dense", std::make_shared<MockEmbeddingProvider>(8)), Error);
    }
    SUBCASE("corruption is detected") {
        auto idx = build_index(copies, bm25_encoder_factory());
        save_index(idx, dir / "bad", corpus.content_hash());
        auto bytes = read_file(dir / "bad/vectors.bin");
        bytes[bytes.size() / 2] ^= 0x5a;
        write_file_atomic(dir / "bad/vectors.bin", bytes);
        CHECK_THROWS_AS(load_index(dir / "bad"), ChecksumError);
        write_file_atomic(dir / "bad/vectors.bin", bytes.substr(0, 10));
        CHECK_THROWS_AS(load_index(dir / "bad"), ChecksumError);
    }
}

TEST_CASE("run files") {
    std::vector<RetrievalResult> results{
        {"q1", Method::reinvoke, {{"a", {3, 0.5}}, {"tool with space", {2, 0.1}}, {"50%", {1, -0.0}}}},
        {"q 2", Method::bm25, {{"b", {1, 1.0 / 3.0}}}},
    };
    auto text = format_run(results);
    CHECK(text.find("q1 tool%20with%20space 2 0.10000000000000001 reinvoke\n") != std::string::npos);
    auto back = parse_run(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].ranked[1].doc_id == "tool with space");
    CHECK(back[0].ranked[2].doc_id == "50%");
    CHECK(back[1].query_id == "q 2");
    CHECK(back[1].method == Method::bm25);
    CHECK(back[1].ranked[0].key.sim == 1.0 / 3.0);
    CHECK(format_run(back) == text);

    CHECK_THROWS_AS(parse_run("q a 2 0.1 bm25\n"), ParseError);
    CHECK_THROWS_AS(parse_run("q a one 0.1 bm25\n"), ParseError);
    CHECK_THROWS_AS(parse_run("q a 1 0.1x bm25\n"), ParseError);
    CHECK(parse_run("q a 1 4.9406564584124654e-324 bm25\n")[0].ranked[0].key.sim > 0.0);
    CHECK_THROWS_AS(parse_run("q a 1 0.1 magic\n"), Error);
}

TEST_CASE("retrieve dispatch") {
    auto corpus = fixtures::travel_corpus();
    auto raw = build_index(copies_from_raw(corpus), bm25_encoder_factory());
    auto dense = build_index(copies_from_raw(corpus), dense_encoder_factory(std::make_shared<MockEmbeddingProvider>()));
    MockProvider mock;
    auto expanded = build_index(copies_from_expansion(corpus, expand_corpus(corpus, 3, mock).documents),
                                bm25_encoder_factory());
    RetrievalSetup setup{&expanded, &raw, &dense, EncoderKind::bm25, &mock};

    Query weather{"w", "weather forecast with rain"};
    CHECK(retrieve(weather, setup, 3, Method::bm25).ranked[0].doc_id == "meteo::get_forecast");
    CHECK(retrieve(weather, setup, 3, Method::dense).ranked[0].doc_id == "meteo::get_forecast");
    CHECK(retrieve(weather, setup, 3, Method::reinvoke).ranked[0].doc_id == "meteo::get_forecast");
    CHECK(retrieve(weather, setup, 3, Method::hyde).ranked[0].doc_id == "meteo::get_forecast");

    auto full = retrieve(weather, setup, 100, Method::bm25);
    CHECK(full.ranked.size() == corpus.size());
    for (std::size_t i = 1; i < full.ranked.size(); ++i) CHECK(full.ranked[i - 1].key.sim >= full.ranked[i].key.sim);

    RetrievalTrace trace;
    auto r = retrieve({"q", fixtures::kFlightRestaurantQuery}, setup, 2, Method::reinvoke, &trace);
    CHECK(trace.intents.size() == 2);
    CHECK(trace.scores.rows.size() == 2);
    std::set<std::string> top{r.ranked[0].doc_id, r.ranked[1].doc_id};
    CHECK(top == std::set<std::string>{"flights::book_flight", "dining::find_restaurant"});
    CHECK(retrieve({"q", fixtures::kFlightRestaurantQuery}, setup, 2, Method::reinvoke).ranked[0].doc_id ==
          r.ranked[0].doc_id);

    RetrievalSetup empty;
    CHECK_THROWS_AS(retrieve(weather, empty, 3, Method::bm25), Error);
}

TEST_CASE("hyde") {
    auto corpus = fixtures::travel_corpus();
    auto raw = build_index(copies_from_raw(corpus), bm25_encoder_factory());
    auto target = corpus.find("cars::rent_car")->text;
    fixtures::FnProvider echo([&](const GenerationRequest& r, int) {
        CHECK(r.prompt.find("generate an API documentation in the JSON format") != std::string::npos);
        return target;
    });
    CHECK(hyde_retrieve({"q", "anything at all"}, raw, 3, echo).ranked[0].doc_id == "cars::rent_car");

    MockProvider mock;
    auto hyp = mock.complete({build_hyde_prompt("book a flight to Rome on May 3"), 0.0}).text;
    CHECK(nlohmann::json::parse(hyp).contains("api_description"));

    HydeSettings s;
    s.retry = RetryPolicy::none();
    fixtures::FnProvider down([](const GenerationRequest&, int) -> std::string { throw ProviderError("outage"); });
    Query q{"q", "rent a car at the airport"};
    auto fallback = hyde_retrieve(q, raw, 5, down, s);
    auto base = baseline_retrieve(q, raw, 5, Method::hyde);
    REQUIRE(fallback.ranked.size() == base.ranked.size());
    for (std::size_t i = 0; i < base.ranked.size(); ++i) CHECK(fallback.ranked[i].doc_id == base.ranked[i].doc_id);
    CHECK(fallback.method == Method::hyde);
}
