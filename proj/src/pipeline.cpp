#include "reinvoke/pipeline.hpp"

#include "reinvoke/error.hpp"
#include "reinvoke/expansion.hpp"
#include "reinvoke/intent.hpp"
#include "reinvoke/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

namespace reinvoke::pipeline {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

ProviderSettings provider_from_json(const nlohmann::json& j, const fs::path& base) {
    ProviderSettings s;
    s.kind = j.value("provider", "mock");
    if (s.kind != "mock" && s.kind != "http") throw Error("provider must be 'mock' or 'http', got " + s.kind);
    s.endpoint.base_url = j.value("base_url", "");
    s.endpoint.model = j.value("model", "");
    s.endpoint.api_key_env = j.value("api_key_env", "");
    s.endpoint.timeout = std::chrono::seconds(j.value("timeout_s", 60));
    if (j.contains("script")) s.script = resolve(base, j.at("script").get<std::string>());
    s.dim = j.value("dim", std::size_t{256});
    if (s.kind == "http" && (s.endpoint.base_url.empty() || s.endpoint.model.empty()))
        throw Error("http provider needs base_url and model");
    return s;
}

nlohmann::ordered_json provider_to_json(const ProviderSettings& s) {
    nlohmann::ordered_json j;
    j["provider"] = s.kind;
    if (s.kind == "http") {
        j["base_url"] = s.endpoint.base_url;
        j["model"] = s.endpoint.model;
        j["api_key_env"] = s.endpoint.api_key_env;
        j["timeout_s"] = s.endpoint.timeout.count();
    } else {
        if (!s.script.empty()) j["script"] = s.script.string();
        j["dim"] = s.dim;
    }
    return j;
}

/// Identity of a provider for cache keys; a mock's script contents count.
std::string provider_fingerprint(const ProviderSettings& s, bool embedding) {
    if (s.kind == "http") return "http|" + s.endpoint.base_url + "|" + s.endpoint.model;
    std::string fp = "mock";
    if (embedding) fp += "|dim=" + std::to_string(s.dim);
    if (!embedding && !s.script.empty()) fp += "|script=" + sha256_hex(read_file(s.script));
    return fp;
}

std::string digest12(const std::string& s) {
    return sha256_hex(s).substr(0, 12);
}

Corpus load_config_corpus(const PipelineConfig& config) {
    if (config.corpus.empty()) throw Error("config has no corpus path");
    return load_corpus(config.corpus, config.corpus_format);
}

EvalDataset load_config_dataset(const PipelineConfig& config, const Corpus& corpus) {
    if (config.dataset.empty()) throw Error("config has no dataset path");
    return load_eval_dataset(config.dataset, corpus, UnresolvedIds::drop);
}

std::string expansion_key(const PipelineConfig& config, const Corpus& corpus) {
    return digest12(corpus.content_hash() + "|" + provider_fingerprint(config.generation, false) + "|t=" +
                    format_double(config.temperature) + "|seed=" + std::to_string(config.seed) +
                    "|max_tokens=" + std::to_string(config.max_output_tokens));
}

std::string embedding_key(const PipelineConfig& config, EncoderKind encoder) {
    return encoder == EncoderKind::bm25 ? std::string("bm25") : "dense|" + provider_fingerprint(config.embedding, true);
}

EncoderFactory make_factory(const PipelineConfig& config, EncoderKind kind) {
    if (kind == EncoderKind::bm25) return bm25_encoder_factory();
    auto cache = std::make_shared<EmbeddingCache>(config.effective_cache_dir() / "embeddings");
    return dense_encoder_factory(make_embedding_provider(config.embedding), cache,
                                 DenseEncodeOptions{64, config.jobs, RetryPolicy{config.retries}});
}

ToolIndex load_config_index(const PipelineConfig& config, const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) throw IoError("index not found at " + dir.string() + "; run `index` first");
    auto manifest = read_index_manifest(dir);
    if (manifest.at("encoder").get<std::string>() == "dense") {
        auto cache = std::make_shared<EmbeddingCache>(config.effective_cache_dir() / "embeddings");
        return load_index(dir, make_embedding_provider(config.embedding), cache);
    }
    return load_index(dir);
}

bool uses(const PipelineConfig& config, Method m) {
    return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end();
}

std::set<EncoderKind> raw_encoders_needed(const PipelineConfig& config) {
    std::set<EncoderKind> kinds;
    if (uses(config, Method::bm25)) kinds.insert(EncoderKind::bm25);
    if (uses(config, Method::dense)) kinds.insert(EncoderKind::dense);
    if (uses(config, Method::hyde)) kinds.insert(config.encoder);
    return kinds;
}

/// Expansion records for copies 1..m, grouped per document in corpus order.
Expansion expansion_for_index(const PipelineConfig& config, const Corpus& corpus) {
    auto path = expansion_path(config, corpus);
    if (!fs::exists(path)) throw IoError("expansion not found at " + path.string() + "; run `expand` first");
    auto all = load_expansion(path);
    Expansion selected;
    std::map<std::string, std::set<std::size_t>> have;
    for (std::size_t i = 0; i < all.queries.size(); ++i) {
        if (all.queries[i].copy_index > config.m) continue;
        have[all.queries[i].doc_id].insert(all.queries[i].copy_index);
        selected.queries.push_back(all.queries[i]);
        selected.documents.push_back(all.documents[i]);
    }
    for (const auto& doc : corpus.documents()) {
        if (have[doc.doc_id].size() != config.m)
            throw MissingCopies(doc.doc_id + " (has " + std::to_string(have[doc.doc_id].size()) + " of " +
                                std::to_string(config.m) + " copies; run `expand`)");
    }
    return selected;
}

std::size_t clamp_depth(std::size_t k, std::size_t docs) {
    if (k > docs) {
        spdlog::warn("k={} exceeds the {} indexed tools; clamping", k, docs);
        return docs;
    }
    return k;
}

void print_ranking(std::ostream& out, const RetrievalResult& r) {
    out << "[" << to_string(r.method) << "] " << r.query_id << "\n";
    for (std::size_t p = 0; p < r.ranked.size(); ++p) {
        const auto& d = r.ranked[p];
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", d.key.sim);
        out << "  " << (p + 1) << ". " << d.doc_id << "  sim=" << buf;
        if (r.method == Method::reinvoke) out << "  reversed_rank=" << d.key.reversed_rank;
        out << "\n";
    }
}

void print_explain(std::ostream& out, const RetrievalTrace& trace) {
    for (std::size_t i = 0; i < trace.intents.size(); ++i) {
        out << "intent " << trace.intents[i].intent_index << ": " << trace.intents[i].text << "\n";
        auto row = trace.scores.rows[i];
        std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.reversed_rank > b.reversed_rank; });
        for (const auto& s : row) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f", s.sim);
            out << "    " << s.doc_id << "  sim=" << buf << "  reversed_rank=" << s.reversed_rank << "\n";
        }
    }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
    PipelineConfig c;
    if (j.contains("corpus")) c.corpus = resolve(base_dir, j.at("corpus").get<std::string>());
    if (j.contains("corpus_format")) c.corpus_format = parse_corpus_format(j.at("corpus_format").get<std::string>());
    if (j.contains("dataset")) c.dataset = resolve(base_dir, j.at("dataset").get<std::string>());
    if (j.contains("generation")) c.generation = provider_from_json(j.at("generation"), base_dir);
    if (j.contains("embedding")) c.embedding = provider_from_json(j.at("embedding"), base_dir);
    c.m = j.value("m", c.m);
    c.temperature = j.value("temperature", c.temperature);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.max_intents = j.value("max_intents", c.max_intents);
    c.intent_extraction = j.value("intent_extraction", c.intent_extraction);
    if (j.contains("k")) c.ks = j.at("k").get<std::vector<std::size_t>>();
    if (j.contains("encoder")) c.encoder = parse_encoder_kind(j.at("encoder").get<std::string>());
    if (j.contains("aggregation")) c.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
    if (j.contains("methods")) {
        c.methods.clear();
        for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("work_dir")) c.work_dir = resolve(base_dir, j.at("work_dir").get<std::string>());
    if (j.contains("cache_dir")) c.cache_dir = resolve(base_dir, j.at("cache_dir").get<std::string>());
    c.jobs = j.value("jobs", c.jobs);
    c.seed = j.value("seed", c.seed);
    c.retries = j.value("retries", c.retries);

    if (!(c.temperature >= 0.0 && c.temperature <= 2.0)) throw Error("temperature must be in [0, 2]");
    if (c.max_intents < 1) throw Error("max_intents must be at least 1");
    if (c.ks.empty() || std::find(c.ks.begin(), c.ks.end(), 0u) != c.ks.end())
        throw Error("k values must be positive");
    if (c.jobs < 1) throw Error("jobs must be at least 1");
    return c;
}

nlohmann::ordered_json PipelineConfig::to_json() const {
    nlohmann::ordered_json j;
    j["corpus"] = corpus.string();
    j["corpus_format"] = to_string(corpus_format);
    j["dataset"] = dataset.string();
    j["generation"] = provider_to_json(generation);
    j["embedding"] = provider_to_json(embedding);
    j["m"] = m;
    j["temperature"] = temperature;
    j["max_output_tokens"] = max_output_tokens;
    j["max_intents"] = max_intents;
    j["intent_extraction"] = intent_extraction;
    j["k"] = ks;
    j["encoder"] = to_string(encoder);
    j["aggregation"] = to_string(aggregation);
    auto methods_json = nlohmann::ordered_json::array();
    for (auto m : methods) methods_json.push_back(to_string(m));
    j["methods"] = methods_json;
    j["work_dir"] = work_dir.string();
    j["cache_dir"] = effective_cache_dir().string();
    j["jobs"] = jobs;
    j["seed"] = seed;
    j["retries"] = retries;
    return j;
}

fs::path PipelineConfig::effective_cache_dir() const {
    return cache_dir.empty() ? work_dir / "cache" : cache_dir;
}

std::size_t PipelineConfig::retrieval_depth() const {
    return *std::max_element(ks.begin(), ks.end());
}

PipelineConfig load_config(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    return PipelineConfig::from_json(j, path.parent_path());
}

std::unique_ptr<TextProvider> make_text_provider(const ProviderSettings& settings) {
    if (settings.kind == "http") return std::make_unique<HttpChatProvider>(settings.endpoint);
    MockOptions options;
    if (!settings.script.empty()) {
        auto script = nlohmann::json::parse(read_file(settings.script));
        for (auto& [slot, response] : script.items()) options.script[trim(slot)] = response.get<std::string>();
    }
    return std::make_unique<MockProvider>(std::move(options));
}

std::shared_ptr<EmbeddingProvider> make_embedding_provider(const ProviderSettings& settings) {
    if (settings.kind == "http") return std::make_shared<HttpEmbeddingProvider>(settings.endpoint);
    return std::make_shared<MockEmbeddingProvider>(settings.dim);
}

fs::path expansion_path(const PipelineConfig& config, const Corpus& corpus) {
    return config.work_dir / "expansion" / expansion_key(config, corpus) / "expanded.jsonl";
}

fs::path reinvoke_index_dir(const PipelineConfig& config, const Corpus& corpus) {
    std::string source = config.m == 0 ? std::string("raw") : "expansion=" + expansion_key(config, corpus);
    auto key = digest12(corpus.content_hash() + "|" + source + "|m=" + std::to_string(config.m) + "|" +
                        embedding_key(config, config.encoder) + "|" + std::string(to_string(config.aggregation)));
    return config.work_dir / "index" /
           ("reinvoke-" + std::string(to_string(config.encoder)) + "-" + std::string(to_string(config.aggregation)) +
            "-m" + std::to_string(config.m) + "-" + key);
}

fs::path raw_index_dir(const PipelineConfig& config, const Corpus& corpus, EncoderKind encoder) {
    auto key = digest12(corpus.content_hash() + "|raw|" + embedding_key(config, encoder));
    return config.work_dir / "index" / ("raw-" + std::string(to_string(encoder)) + "-" + key);
}

fs::path run_path(const PipelineConfig& config, Method method) {
    return config.work_dir / "runs" / (std::string(to_string(method)) + ".run");
}

fs::path intents_path(const PipelineConfig& config, const Corpus& corpus) {
    auto key = digest12(corpus.content_hash() + "|" + provider_fingerprint(config.generation, false) +
                        "|max_intents=" + std::to_string(config.max_intents) + "|" +
                        (config.dataset.empty() ? std::string{} : sha256_hex(read_file(config.dataset))));
    return config.work_dir / "intents" / key / "intents.jsonl";
}

NormalizeResult cmd_normalize(const PipelineConfig& config, const fs::path& output, std::ostream& log) {
    auto corpus = load_config_corpus(config);
    auto collisions = find_text_collisions(corpus);
    for (const auto& [a, b] : collisions) log << "warning: " << a << " and " << b << " render to identical text\n";
    auto out = output.empty() ? config.work_dir / "corpus.jsonl" : output;
    save_corpus(corpus, out);
    log << "normalized " << corpus.size() << " documents -> " << out.string() << "\n";
    return {corpus.size(), collisions.size(), out};
}

ExpandResult cmd_expand(const PipelineConfig& config, std::ostream& log) {
    auto corpus = load_config_corpus(config);
    ExpandResult result;
    result.output = expansion_path(config, corpus);
    if (config.m == 0) {
        log << "m = 0: expansion disabled, nothing to do\n";
        return result;
    }

    Expansion existing;
    if (fs::exists(result.output)) existing = load_expansion(result.output);
    std::map<std::string, std::map<std::size_t, std::size_t>> have;  // doc -> copy -> record
    for (std::size_t i = 0; i < existing.queries.size(); ++i)
        have[existing.queries[i].doc_id][existing.queries[i].copy_index] = i;

    auto provider = make_text_provider(config.generation);
    GenerationSettings settings;
    settings.temperature = config.temperature;
    settings.max_output_tokens = config.max_output_tokens;
    settings.seed_base = config.seed;
    settings.parallelism = config.jobs;
    settings.retry.max_retries = config.retries;

    Expansion added;
    auto write_all = [&] {
        // Corpus order, then copy index; records of other copy counts are kept.
        std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::pair<const Expansion*, std::size_t>>> rows;
        std::map<std::string, std::size_t> position;
        for (std::size_t i = 0; i < corpus.size(); ++i) position[corpus.documents()[i].doc_id] = i;
        for (const auto* exp : {&existing, &added})
            for (std::size_t i = 0; i < exp->queries.size(); ++i) {
                auto it = position.find(exp->queries[i].doc_id);
                auto pos = it == position.end() ? corpus.size() : it->second;
                rows.push_back({{pos, exp->queries[i].copy_index}, {exp, i}});
            }
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        Expansion merged;
        for (const auto& [_, src] : rows) {
            merged.queries.push_back(src.first->queries[src.second]);
            merged.documents.push_back(src.first->documents[src.second]);
        }
        write_file_atomic(result.output, serialize_expansion(merged));
    };

    try {
        for (const auto& doc : corpus.documents()) {
            std::vector<std::size_t> missing;
            for (std::size_t c = 1; c <= config.m; ++c) {
                if (have[doc.doc_id].count(c))
                    ++result.skipped;
                else
                    missing.push_back(c);
            }
            if (missing.empty()) continue;
            auto queries = generate_copies(doc, missing, *provider, settings);
            auto docs = expand_document(doc, queries);
            for (const auto& q : queries) result.fallbacks += q.fallback ? 1 : 0;
            result.generated += queries.size();
            added.queries.insert(added.queries.end(), queries.begin(), queries.end());
            added.documents.insert(added.documents.end(), docs.begin(), docs.end());
        }
    } catch (...) {
        if (!added.queries.empty()) write_all();
        throw;
    }
    if (result.generated > 0 || !fs::exists(result.output)) write_all();
    log << "expanded " << corpus.size() << " documents (m=" << config.m << "): " << result.generated
        << " generated, " << result.skipped << " cached, " << result.fallbacks << " fallbacks -> "
        << result.output.string() << "\n";
    return result;
}

std::vector<IndexInfo> cmd_index(const PipelineConfig& config, std::ostream& log) {
    auto corpus = load_config_corpus(config);
    const auto corpus_hash = corpus.content_hash();
    std::vector<IndexInfo> built;
    auto save = [&](const ToolIndex& index, const fs::path& dir, const std::string& name) {
        save_index(index, dir, corpus_hash);
        log << "indexed " << name << ": " << index.size() << " tools, encoder=" << to_string(index.encoder().kind())
            << ", aggregation=" << to_string(index.aggregation()) << ", m=" << index.copies_per_doc()
            << ", corpus_hash=" << corpus_hash << " -> " << dir.string() << "\n";
        built.push_back({name, dir, index.size()});
    };

    if (uses(config, Method::reinvoke)) {
        std::vector<DocCopies> copies;
        if (config.m == 0) {
            copies = copies_from_raw(corpus);
        } else {
            copies = copies_from_expansion(corpus, expansion_for_index(config, corpus).documents);
        }
        auto index = build_index(copies, make_factory(config, config.encoder), config.aggregation, config.jobs);
        save(index, reinvoke_index_dir(config, corpus), "reinvoke");
    }
    for (auto kind : raw_encoders_needed(config)) {
        auto index = build_index(copies_from_raw(corpus), make_factory(config, kind), Aggregation::mean, config.jobs);
        save(index, raw_index_dir(config, corpus, kind), "raw-" + std::string(to_string(kind)));
    }
    return built;
}

std::vector<fs::path> cmd_retrieve(const PipelineConfig& config, const RetrieveOptions& options, std::ostream& out) {
    auto corpus = load_config_corpus(config);

    std::optional<ToolIndex> expanded, raw_bm25, raw_dense;
    if (uses(config, Method::reinvoke)) expanded = load_config_index(config, reinvoke_index_dir(config, corpus));
    auto raw_kinds = raw_encoders_needed(config);
    if (raw_kinds.count(EncoderKind::bm25))
        raw_bm25 = load_config_index(config, raw_index_dir(config, corpus, EncoderKind::bm25));
    if (raw_kinds.count(EncoderKind::dense))
        raw_dense = load_config_index(config, raw_index_dir(config, corpus, EncoderKind::dense));

    auto llm = make_text_provider(config.generation);
    RetrievalSetup setup;
    setup.expanded = expanded ? &*expanded : nullptr;
    setup.raw_bm25 = raw_bm25 ? &*raw_bm25 : nullptr;
    setup.raw_dense = raw_dense ? &*raw_dense : nullptr;
    setup.hyde_encoder = config.encoder;
    setup.llm = llm.get();
    setup.intent.max_intents = config.max_intents;
    setup.intent.max_output_tokens = config.max_output_tokens;
    setup.intent.retry.max_retries = config.retries;
    setup.hyde.max_output_tokens = config.max_output_tokens;
    setup.hyde.retry.max_retries = config.retries;

    const auto k = clamp_depth(config.retrieval_depth(), corpus.size());

    auto intents_for = [&](const Query& q) {
        return config.intent_extraction ? extract_intents(q, *llm, setup.intent) : passthrough_intent(q);
    };

    if (options.query_text || options.query_id) {
        Query query;
        if (options.query_id) {
            auto dataset = load_config_dataset(config, corpus);
            const auto* ex = dataset.find(*options.query_id);
            if (!ex) throw UnknownQuery(*options.query_id);
            query = {ex->query_id, ex->query_text};
        } else {
            query = {"query", *options.query_text};
        }
        for (auto method : config.methods) {
            if (method == Method::reinvoke) {
                RetrievalTrace trace;
                trace.intents = intents_for(query);
                auto result = reinvoke_rank(trace.intents, *expanded, k, query.id, &trace.scores);
                if (options.explain) print_explain(out, trace);
                print_ranking(out, result);
            } else {
                print_ranking(out, retrieve(query, setup, k, method));
            }
        }
        return {};
    }

    auto dataset = load_config_dataset(config, corpus);
    if (dataset.excluded) out << "note: " << dataset.excluded << " queries excluded (no relevant tool in corpus)\n";

    // Intents are cached per dataset so reruns do not call the LLM again.
    std::map<std::string, std::vector<Intent>> intents;
    auto cache_path = intents_path(config, corpus);
    if (uses(config, Method::reinvoke) && config.intent_extraction) {
        if (fs::exists(cache_path)) intents = parse_intents(read_file(cache_path), cache_path.string());
        std::vector<Intent> all;
        bool added = false;
        for (const auto& ex : dataset.examples) {
            auto& list = intents[ex.query_id];
            if (list.empty()) {
                list = intents_for({ex.query_id, ex.query_text});
                added = true;
            }
            all.insert(all.end(), list.begin(), list.end());
        }
        if (added) write_file_atomic(cache_path, serialize_intents(all));
    }

    std::vector<fs::path> written;
    for (auto method : config.methods) {
        std::vector<RetrievalResult> results;
        for (const auto& ex : dataset.examples) {
            Query q{ex.query_id, ex.query_text};
            if (method == Method::reinvoke) {
                auto in = config.intent_extraction ? intents.at(ex.query_id) : passthrough_intent(q);
                results.push_back(reinvoke_rank(in, *expanded, k, q.id));
            } else {
                results.push_back(retrieve(q, setup, k, method));
            }
        }
        auto path = run_path(config, method);
        write_file_atomic(path, format_run(results));
        out << "wrote " << results.size() << " queries (" << to_string(method) << ") -> " << path.string() << "\n";
        written.push_back(path);
    }
    return written;
}

EvaluateResult cmd_evaluate(const PipelineConfig& config, const std::vector<fs::path>& run_files, std::ostream& out) {
    auto corpus = load_config_corpus(config);
    auto dataset = load_config_dataset(config, corpus);
    std::vector<fs::path> files = run_files;
    if (files.empty())
        for (auto m : config.methods) files.push_back(run_path(config, m));

    std::vector<RetrievalResult> results;
    for (const auto& f : files) {
        if (!fs::exists(f)) throw IoError("run file not found: " + f.string());
        auto parsed = parse_run(read_file(f), f.string());
        results.insert(results.end(), parsed.begin(), parsed.end());
    }

    EvaluateResult result;
    result.evaluation = evaluate_run(results, dataset, config.ks);
    auto sort_k = std::find(config.ks.begin(), config.ks.end(), 5u) != config.ks.end() ? 5 : config.ks.front();
    result.table = format_table(result.evaluation.reports, Metric::ndcg, sort_k);

    result.json_path = config.work_dir / "reports" / "report.json";
    result.table_path = config.work_dir / "reports" / "report.txt";
    std::string header = "queries: " + std::to_string(dataset.examples.size()) + " evaluated, " +
                         std::to_string(dataset.excluded) + " excluded (no relevant tool in corpus); " +
                         "metrics are macro-averaged over queries\n";
    write_file_atomic(result.json_path, to_json(result.evaluation).dump(2) + "\n");
    write_file_atomic(result.table_path, header + result.table);
    out << header << result.table;
    return result;
}

RoundtripResult cmd_roundtrip(const PipelineConfig& config, std::ostream& out) {
    auto corpus = load_config_corpus(config);
    if (config.m == 0) throw Error("round-trip needs expansion (m > 0)");
    auto expansion = expansion_for_index(config, corpus);
    if (expansion.queries.empty()) throw Error("expansion is empty");
    auto index = load_config_index(config, reinvoke_index_dir(config, corpus));

    RoundtripResult result;
    result.reports = roundtrip_consistency(expansion.queries, index, config.ks);
    result.json_path = config.work_dir / "reports" / "roundtrip.json";
    nlohmann::ordered_json j;
    j["synthetic_queries"] = expansion.queries.size();
    j["encoder"] = to_string(config.encoder);
    j["reports"] = to_json(result.reports);
    write_file_atomic(result.json_path, j.dump(2) + "\n");
    out << "round-trip over " << expansion.queries.size() << " synthetic queries\n" << format_table(result.reports);
    return result;
}

}  // namespace reinvoke::pipeline
