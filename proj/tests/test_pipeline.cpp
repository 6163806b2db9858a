#include "reinvoke/error.hpp"
#include "reinvoke/expansion.hpp"
#include "reinvoke/pipeline.hpp"
#include "reinvoke/util.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace reinvoke;
using namespace reinvoke::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Workspace {
    fixtures::TempDir dir;
    PipelineConfig config;

    explicit Workspace(const Corpus& corpus) {
        fixtures::write(dir / "corpus.jsonl", serialize_corpus(corpus));
        std::string dataset;
        for (const auto& d : corpus.documents())
            dataset += Json{{"query_id", "q-" + d.doc_id}, {"query", d.text}, {"relevant_ids", {d.doc_id}}}.dump() +
                       "\n";
        dataset += R"({"query_id":"q-missing","query":"nothing","relevant_ids":["not-a-tool"]})"
                   "\n";
        fixtures::write(dir / "dataset.jsonl", dataset);
        config.corpus = dir / "corpus.jsonl";
        config.dataset = dir / "dataset.jsonl";
        config.work_dir = dir / "work";
        config.m = 2;
        config.ks = {1, 5};
        config.embedding.dim = 32;
    }
};

}  // namespace

TEST_CASE("config defaults and parsing") {
    auto d = PipelineConfig::from_json(Json::object());
    CHECK(d.m == 10);
    CHECK(d.temperature == 0.7);
    CHECK(d.max_intents == 8);
    CHECK(d.ks == std::vector<std::size_t>{1, 5, 10});
    CHECK(d.aggregation == Aggregation::mean);

    auto c = PipelineConfig::from_json(
        Json::parse(R"({"corpus":"tools.json","corpus_format":"toolbench-json","m":3,"k":[2],"methods":["bm25","hyde"],
                        "encoder":"dense","aggregation":"max","generation":{"provider":"mock"}})"),
        "/base");
    CHECK(c.corpus == fs::path("/base/tools.json"));
    CHECK(c.corpus_format == CorpusFormat::toolbench_json);
    CHECK(c.m == 3);
    CHECK(c.ks == std::vector<std::size_t>{2});
    CHECK(c.methods == std::vector<Method>{Method::bm25, Method::hyde});
    CHECK(c.encoder == EncoderKind::dense);
    CHECK(c.aggregation == Aggregation::max);
    CHECK(c.effective_cache_dir() == c.work_dir / "cache");

    CHECK_THROWS_AS(PipelineConfig::from_json(Json::parse(R"({"temperature":3})")), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(Json::parse(R"({"k":[0]})")), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(Json::parse(R"({"max_intents":0})")), Error);
    CHECK_THROWS_AS(PipelineConfig::from_json(Json::parse(R"({"generation":{"provider":"carrier-pigeon"}})")), Error);
}

TEST_CASE("artifact paths depend on their inputs") {
    Workspace ws(fixtures::disjoint_corpus(3));
    auto corpus = load_corpus(ws.config.corpus, CorpusFormat::jsonl);
    auto other = ws.config;
    other.temperature = 0.2;
    CHECK(expansion_path(ws.config, corpus) != expansion_path(other, corpus));
    auto agg = ws.config;
    agg.aggregation = Aggregation::max;
    CHECK(reinvoke_index_dir(ws.config, corpus) != reinvoke_index_dir(agg, corpus));
    CHECK(raw_index_dir(ws.config, corpus, EncoderKind::bm25) == raw_index_dir(agg, corpus, EncoderKind::bm25));
    CHECK(run_path(ws.config, Method::bm25).filename() == "bm25.run");
}

TEST_CASE("expand is incremental") {
    Workspace ws(fixtures::disjoint_corpus(3));
    std::ostringstream log;
    auto first = cmd_expand(ws.config, log);
    CHECK(first.generated == 6);
    CHECK(first.skipped == 0);
    auto exp = load_expansion(first.output);
    REQUIRE(exp.documents.size() == 6);
    CHECK(exp.documents[1].doc_id == "tool000");
    CHECK(exp.documents[1].copy_index == 2);

    auto again = cmd_expand(ws.config, log);
    CHECK(again.generated == 0);
    CHECK(again.skipped == 6);
    CHECK(slurp(again.output) == slurp(first.output));

    ws.config.m = 3;
    auto more = cmd_expand(ws.config, log);
    CHECK(more.output == first.output);
    CHECK(more.generated == 3);
    CHECK(more.skipped == 6);
    auto grown = load_expansion(more.output);
    REQUIRE(grown.documents.size() == 9);
    CHECK(grown.documents[2].copy_index == 3);
    CHECK(grown.documents[0] == exp.documents[0]);

    ws.config.m = 0;
    CHECK(cmd_expand(ws.config, log).generated == 0);
}

TEST_CASE("index, retrieve, evaluate and roundtrip") {
    Workspace ws(fixtures::travel_corpus());
    ws.config.methods = {Method::reinvoke, Method::bm25, Method::dense};
    std::ostringstream log;

    CHECK_THROWS_AS(cmd_index(ws.config, log), IoError);
    cmd_expand(ws.config, log);
    auto more = ws.config;
    more.m = 3;
    CHECK(expansion_path(more, load_corpus(ws.config.corpus, CorpusFormat::jsonl)) ==
          expansion_path(ws.config, load_corpus(ws.config.corpus, CorpusFormat::jsonl)));
    CHECK_THROWS_AS(cmd_index(more, log), MissingCopies);
    auto infos = cmd_index(ws.config, log);
    REQUIRE(infos.size() == 3);
    for (const auto& info : infos) {
        CHECK(info.documents == 8);
        CHECK(fs::exists(info.dir / "vectors.bin"));
    }
    auto manifest = read_index_manifest(infos[0].dir);
    CHECK(manifest["m"] == 2);
    CHECK(manifest["aggregation"] == "mean");

    SUBCASE("dataset runs and evaluation") {
        std::ostringstream out;
        auto runs = cmd_retrieve(ws.config, {}, out);
        REQUIRE(runs.size() == 3);
        CHECK(out.str().find("1 queries excluded") != std::string::npos);
        auto parsed = parse_run(slurp(runs[0]));
        CHECK(parsed.size() == 8);
        CHECK(parsed[0].ranked.size() == 5);

        std::ostringstream eval_out;
        auto ev = cmd_evaluate(ws.config, {}, eval_out);
        CHECK(fs::exists(ev.json_path));
        CHECK(ev.evaluation.excluded_queries == 1);
        for (const auto& r : ev.evaluation.reports)
            if (r.k == 5) CHECK(r.value == 1.0);  // each query is its tool's own text
        CHECK(eval_out.str().find("macro-averaged") != std::string::npos);

        CHECK_THROWS_AS(cmd_evaluate(ws.config, {ws.dir / "absent.run"}, eval_out), IoError);
    }
    SUBCASE("single queries") {
        std::ostringstream out;
        RetrieveOptions opts;
        opts.query_text = fixtures::kFlightRestaurantQuery;
        opts.explain = true;
        cmd_retrieve(ws.config, opts, out);
        CHECK(out.str().find("intent 1: book a flight") != std::string::npos);
        CHECK(out.str().find("intent 2: find highly rated restaurants") != std::string::npos);
        CHECK(out.str().find("intent 3:") == std::string::npos);

        RetrieveOptions bad;
        bad.query_id = "nope";
        CHECK_THROWS_AS(cmd_retrieve(ws.config, bad, out), UnknownQuery);

        auto big = ws.config;
        big.ks = {50};
        std::ostringstream clamped;
        RetrieveOptions one;
        one.query_id = "q-meteo::get_forecast";
        cmd_retrieve(big, one, clamped);
        CHECK(clamped.str().find("  8. ") != std::string::npos);
        CHECK(clamped.str().find("  9. ") == std::string::npos);
    }
    SUBCASE("roundtrip") {
        std::ostringstream out;
        auto rt = cmd_roundtrip(ws.config, out);
        REQUIRE(rt.reports.size() == 2);
        CHECK(rt.reports[0].per_query.size() == 16);
        CHECK(fs::exists(rt.json_path));
        ws.config.m = 0;
        CHECK_THROWS_AS(cmd_roundtrip(ws.config, out), Error);
    }
    SUBCASE("corrupted vectors are detected") {
        {
            std::fstream f(infos[0].dir / "vectors.bin", std::ios::in | std::ios::out | std::ios::binary);
            f.seekp(20);
            f.put('\x7f');
        }
        std::ostringstream out;
        CHECK_THROWS_AS(cmd_retrieve(ws.config, {}, out), ChecksumError);
    }
}

TEST_CASE("normalize writes canonical jsonl") {
    fixtures::TempDir dir;
    fixtures::write(dir / "tools.json", R"({"weather_now":"current weather","translate":"translate text"})");
    PipelineConfig c;
    c.corpus = dir / "tools.json";
    c.corpus_format = CorpusFormat::toole_json;
    c.work_dir = dir / "work";
    std::ostringstream log;
    auto res = cmd_normalize(c, {}, log);
    CHECK(res.documents == 2);
    CHECK(res.text_collisions == 0);
    CHECK(res.output == c.work_dir / "corpus.jsonl");
    auto back = load_corpus(res.output, CorpusFormat::jsonl);
    CHECK(back.size() == 2);
    CHECK(back.content_hash() == load_corpus(c.corpus, CorpusFormat::toole_json).content_hash());

    c.corpus = dir / "missing.json";
    CHECK_THROWS_AS(cmd_normalize(c, {}, log), Error);
}
