#include "reinvoke/error.hpp"
#include "reinvoke/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

using namespace reinvoke;
namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::string config;
    std::string corpus;
    std::string corpus_format;
    std::string dataset;
    std::string work_dir;
    std::string cache_dir;
    std::optional<std::size_t> m;
    std::optional<double> temperature;
    std::optional<std::size_t> max_intents;
    std::vector<std::size_t> ks;
    std::string encoder;
    std::string aggregation;
    std::vector<std::string> methods;
    std::optional<std::size_t> jobs;
    std::optional<std::uint64_t> seed;
    bool no_intents = false;
    bool mock = false;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "pipeline configuration (JSON)");
    cmd->add_option("--corpus", o.corpus, "tool corpus file");
    cmd->add_option("--corpus-format", o.corpus_format, "toolbench-json | toole-json | jsonl");
    cmd->add_option("--dataset", o.dataset, "evaluation queries (JSONL)");
    cmd->add_option("--work-dir", o.work_dir, "artifact directory");
    cmd->add_option("--cache-dir", o.cache_dir, "embedding cache directory");
    cmd->add_option("-m,--copies", o.m, "synthetic queries per tool (0 disables expansion)");
    cmd->add_option("--temperature", o.temperature, "query generation temperature");
    cmd->add_option("--max-intents", o.max_intents, "cap on extracted intents");
    cmd->add_option("-k,--k", o.ks, "cutoffs (repeatable)");
    cmd->add_option("--encoder", o.encoder, "bm25 | dense");
    cmd->add_option("--aggregation", o.aggregation, "mean | max");
    cmd->add_option("--method", o.methods, "reinvoke | bm25 | dense | hyde (repeatable)");
    cmd->add_option("-j,--jobs", o.jobs, "parallel provider calls");
    cmd->add_option("--seed", o.seed, "base generation seed");
    cmd->add_flag("--no-intents", o.no_intents, "use the raw query as the single intent");
    cmd->add_flag("--mock", o.mock, "force mock generation and embedding providers");
    cmd->add_flag("-v,--verbose", o.verbose, "debug logging");
}

pipeline::PipelineConfig build_config(const Overrides& o) {
    auto c = o.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(o.config);
    if (!o.corpus.empty()) c.corpus = o.corpus;
    if (!o.corpus_format.empty()) c.corpus_format = parse_corpus_format(o.corpus_format);
    if (!o.dataset.empty()) c.dataset = o.dataset;
    if (!o.work_dir.empty()) c.work_dir = o.work_dir;
    if (!o.cache_dir.empty()) c.cache_dir = o.cache_dir;
    if (o.m) c.m = *o.m;
    if (o.temperature) {
        if (!(*o.temperature >= 0.0 && *o.temperature <= 2.0)) throw Error("temperature must be in [0, 2]");
        c.temperature = *o.temperature;
    }
    if (o.max_intents) {
        if (*o.max_intents < 1) throw Error("max_intents must be at least 1");
        c.max_intents = *o.max_intents;
    }
    if (!o.ks.empty()) {
        for (auto k : o.ks)
            if (k == 0) throw Error("k values must be positive");
        c.ks = o.ks;
    }
    if (!o.encoder.empty()) c.encoder = parse_encoder_kind(o.encoder);
    if (!o.aggregation.empty()) c.aggregation = parse_aggregation(o.aggregation);
    if (!o.methods.empty()) {
        c.methods.clear();
        for (const auto& m : o.methods) c.methods.push_back(parse_method(m));
    }
    if (o.jobs) c.jobs = std::max<std::size_t>(1, *o.jobs);
    if (o.seed) c.seed = *o.seed;
    if (o.no_intents) c.intent_extraction = false;
    if (o.mock) {
        c.generation = {};
        c.embedding = {};
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tool retrieval with synthetic-query expansion and multi-view ranking"};
    app.require_subcommand(1);
    Overrides o;

    auto* normalize = app.add_subcommand("normalize", "write the corpus as canonical JSONL");
    std::string normalize_out;
    normalize->add_option("-o,--output", normalize_out, "output file (default: <work_dir>/corpus.jsonl)");
    auto* expand = app.add_subcommand("expand", "generate synthetic queries and expanded documents");
    auto* index = app.add_subcommand("index", "build and persist the retrieval indexes");
    auto* retrieve = app.add_subcommand("retrieve", "rank tools for the dataset or a single query");
    pipeline::RetrieveOptions retrieve_options;
    std::string query_text, query_id;
    retrieve->add_option("-q,--query", query_text, "ad-hoc query text");
    retrieve->add_option("--query-id", query_id, "a single dataset query");
    retrieve->add_flag("--explain", retrieve_options.explain, "print per-intent similarities and reversed ranks");
    auto* evaluate = app.add_subcommand("evaluate", "score run files against the dataset");
    std::vector<std::string> run_files;
    evaluate->add_option("runs", run_files, "run files (default: the configured methods' runs)");
    auto* roundtrip = app.add_subcommand("roundtrip", "round-trip recall of the synthetic queries");
    for (auto* cmd : {normalize, expand, index, retrieve, evaluate, roundtrip}) add_common(cmd, o);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("reinvoke"));
    spdlog::set_level(o.verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        auto config = build_config(o);
        if (normalize->parsed()) {
            pipeline::cmd_normalize(config, normalize_out, std::cout);
        } else if (expand->parsed()) {
            pipeline::cmd_expand(config, std::cout);
        } else if (index->parsed()) {
            pipeline::cmd_index(config, std::cout);
        } else if (retrieve->parsed()) {
            if (!query_text.empty()) retrieve_options.query_text = query_text;
            if (!query_id.empty()) retrieve_options.query_id = query_id;
            if (retrieve_options.explain && !retrieve_options.query_text && !retrieve_options.query_id)
                throw Error("--explain needs --query or --query-id");
            pipeline::cmd_retrieve(config, retrieve_options, std::cout);
        } else if (evaluate->parsed()) {
            std::vector<fs::path> files(run_files.begin(), run_files.end());
            pipeline::cmd_evaluate(config, files, std::cout);
        } else if (roundtrip->parsed()) {
            pipeline::cmd_roundtrip(config, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
