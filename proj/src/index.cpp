#include "reinvoke/index.hpp"

#include "reinvoke/error.hpp"
#include "reinvoke/parallel.hpp"
#include "reinvoke/prompts.hpp"
#include "reinvoke/util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace reinvoke {

Aggregation parse_aggregation(std::string_view name) {
    if (name == "mean") return Aggregation::mean;
    if (name == "max") return Aggregation::max;
    throw Error("unknown aggregation: " + std::string(name));
}

std::string_view to_string(Aggregation agg) {
    return agg == Aggregation::mean ? "mean" : "max";
}

Method parse_method(std::string_view name) {
    if (name == "reinvoke") return Method::reinvoke;
    if (name == "bm25") return Method::bm25;
    if (name == "dense") return Method::dense;
    if (name == "hyde") return Method::hyde;
    throw Error("unknown method: " + std::string(name));
}

std::string_view to_string(Method method) {
    switch (method) {
        case Method::reinvoke: return "reinvoke";
        case Method::bm25: return "bm25";
        case Method::dense: return "dense";
        case Method::hyde: return "hyde";
    }
    return "?";
}

std::vector<DocCopies> copies_from_expansion(const Corpus& corpus, const std::vector<ExpandedDocument>& expanded) {
    std::unordered_map<std::string, std::vector<const ExpandedDocument*>> by_doc;
    for (const auto& e : expanded) {
        if (!corpus.contains(e.doc_id)) throw MismatchedDoc("expanded copy for unknown tool " + e.doc_id);
        by_doc[e.doc_id].push_back(&e);
    }
    std::vector<DocCopies> out;
    out.reserve(corpus.size());
    for (const auto& doc : corpus.documents()) {
        auto it = by_doc.find(doc.doc_id);
        if (it == by_doc.end()) throw MissingCopies(doc.doc_id);
        auto& copies = it->second;
        std::stable_sort(copies.begin(), copies.end(),
                         [](auto* a, auto* b) { return a->copy_index < b->copy_index; });
        DocCopies dc{doc.doc_id, {}};
        for (const auto* c : copies) dc.texts.push_back(c->text);
        out.push_back(std::move(dc));
    }
    return out;
}

std::vector<DocCopies> copies_from_raw(const Corpus& corpus) {
    std::vector<DocCopies> out;
    out.reserve(corpus.size());
    for (const auto& doc : corpus.documents()) out.push_back({doc.doc_id, {doc.text}});
    return out;
}

ToolIndex::ToolIndex(std::vector<DocIndexEntry> entries, std::shared_ptr<const Encoder> encoder,
                     Aggregation aggregation)
    : entries_(std::move(entries)), encoder_(std::move(encoder)), aggregation_(aggregation) {
    if (!encoder_) throw Error("index needs an encoder");
    std::set<std::string> seen;
    std::size_t dim = 0;
    for (const auto& e : entries_) {
        if (!seen.insert(e.doc_id).second) throw DuplicateId(e.doc_id);
        if (e.vectors.empty()) throw MissingCopies(e.doc_id);
        for (const auto& v : e.vectors) {
            if (const auto* dv = std::get_if<DenseVector>(&v)) {
                if (dim == 0) dim = dv->dim();
                if (dv->dim() != dim) throw DimensionMismatch(dim, dv->dim());
            }
        }
    }
}

std::vector<std::string> ToolIndex::doc_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries_.size());
    for (const auto& e : entries_) ids.push_back(e.doc_id);
    return ids;
}

std::size_t ToolIndex::copies_per_doc() const noexcept {
    std::size_t m = 0;
    for (const auto& e : entries_) m = std::max(m, e.copy_count);
    return m;
}

std::size_t ToolIndex::dim() const noexcept {
    if (entries_.empty()) return 0;
    const auto* dv = std::get_if<DenseVector>(&entries_.front().vectors.front());
    return dv ? dv->dim() : 0;
}

std::vector<double> ToolIndex::similarities(const EmbeddingVector& query) const {
    std::vector<double> sims(entries_.size());
    for (std::size_t j = 0; j < entries_.size(); ++j) {
        const auto& vecs = entries_[j].vectors;
        double best = similarity(query, vecs.front());
        for (std::size_t c = 1; c < vecs.size(); ++c) best = std::max(best, similarity(query, vecs[c]));
        sims[j] = best;
    }
    return sims;
}

ToolIndex build_index(const std::vector<DocCopies>& docs, const EncoderFactory& factory, Aggregation aggregation,
                      std::size_t jobs) {
    if (docs.empty()) throw EmptyCorpus();
    std::vector<std::string> flat;
    std::vector<std::size_t> offsets;
    for (const auto& d : docs) {
        if (d.texts.empty()) throw MissingCopies(d.doc_id);
        offsets.push_back(flat.size());
        flat.insert(flat.end(), d.texts.begin(), d.texts.end());
    }
    auto encoder = factory(flat);
    auto vectors = encoder->encode_documents(flat);
    if (vectors.size() != flat.size()) throw Error("encoder returned the wrong number of vectors");

    std::vector<DocIndexEntry> entries(docs.size());
    std::vector<std::exception_ptr> errors(docs.size());
    parallel_for(docs.size(), jobs, [&](std::size_t i) {
        try {
            auto first = vectors.begin() + static_cast<std::ptrdiff_t>(offsets[i]);
            std::span<const EmbeddingVector> copies(&*first, docs[i].texts.size());
            DocIndexEntry entry{docs[i].doc_id, copies.size(), {}};
            if (aggregation == Aggregation::mean)
                entry.vectors.push_back(mean_vector(copies));
            else
                entry.vectors.assign(copies.begin(), copies.end());
            entries[i] = std::move(entry);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
    return ToolIndex(std::move(entries), std::move(encoder), aggregation);
}

// ---------------------------------------------------------------- ranking

ScoreMatrix rank_within_intents(std::vector<std::string> doc_ids, const std::vector<std::vector<double>>& sims) {
    ScoreMatrix m;
    m.doc_ids = std::move(doc_ids);
    const auto n_docs = m.doc_ids.size();
    for (std::size_t i = 0; i < sims.size(); ++i) {
        const auto& row = sims[i];
        if (row.size() != n_docs) throw DimensionMismatch(n_docs, row.size());
        std::vector<std::size_t> order(n_docs);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (row[a] != row[b]) return row[a] < row[b];
            return m.doc_ids[a] < m.doc_ids[b];
        });
        std::vector<IntentScore> scores(n_docs);
        for (std::size_t p = 0; p < n_docs; ++p) {
            auto j = order[p];
            scores[j] = IntentScore{i + 1, m.doc_ids[j], row[j], p + 1};
        }
        m.rows.push_back(std::move(scores));
    }
    return m;
}

ScoreMatrix score_intents(const std::vector<Intent>& intents, const ToolIndex& index) {
    if (intents.empty()) throw Error("at least one intent is required");
    if (index.size() == 0) throw EmptyCorpus();
    std::vector<std::string> texts;
    texts.reserve(intents.size());
    for (const auto& in : intents) texts.push_back(in.text);
    auto qvecs = index.encoder().encode_queries(texts);
    std::vector<std::vector<double>> sims;
    sims.reserve(qvecs.size());
    for (const auto& q : qvecs) sims.push_back(index.similarities(q));
    auto m = rank_within_intents(index.doc_ids(), sims);
    for (std::size_t i = 0; i < intents.size(); ++i)
        for (auto& s : m.rows[i]) s.intent_index = intents[i].intent_index;
    return m;
}

std::vector<RankKey> retrieval_keys(const ScoreMatrix& scores) {
    std::vector<RankKey> keys(scores.doc_ids.size());
    for (const auto& row : scores.rows)
        for (std::size_t j = 0; j < row.size(); ++j) keys[j] = std::max(keys[j], row[j].key());
    return keys;
}

RetrievalResult multiview_rank(const ScoreMatrix& scores, std::size_t k, std::string query_id) {
    if (scores.rows.empty()) throw Error("at least one intent row is required");
    auto keys = retrieval_keys(scores);
    std::vector<std::size_t> order(keys.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (keys[a] != keys[b]) return keys[a] > keys[b];
        return scores.doc_ids[a] < scores.doc_ids[b];
    });
    RetrievalResult result{std::move(query_id), Method::reinvoke, {}};
    k = std::min(k, order.size());
    for (std::size_t p = 0; p < k; ++p) result.ranked.push_back({scores.doc_ids[order[p]], keys[order[p]]});
    return result;
}

RetrievalResult rank_by_similarity(const std::vector<std::string>& doc_ids, const std::vector<double>& sims,
                                   std::size_t k, std::string query_id, Method method) {
    if (doc_ids.size() != sims.size()) throw DimensionMismatch(doc_ids.size(), sims.size());
    std::vector<std::size_t> order(doc_ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sims[a] != sims[b]) return sims[a] > sims[b];
        return doc_ids[a] > doc_ids[b];
    });
    RetrievalResult result{std::move(query_id), method, {}};
    k = std::min(k, order.size());
    for (std::size_t p = 0; p < k; ++p)
        result.ranked.push_back({doc_ids[order[p]], RankKey{order.size() - p, sims[order[p]]}});
    return result;
}

// ---------------------------------------------------------------- retrieval

RetrievalResult reinvoke_rank(const std::vector<Intent>& intents, const ToolIndex& index, std::size_t k,
                              const std::string& query_id, ScoreMatrix* explain) {
    auto scores = score_intents(intents, index);
    auto result = multiview_rank(scores, k, query_id);
    if (explain) *explain = std::move(scores);
    return result;
}

RetrievalResult baseline_retrieve(const Query& query, const ToolIndex& raw_index, std::size_t k, Method label) {
    auto qvec = raw_index.encoder().encode_queries({query.text});
    return rank_by_similarity(raw_index.doc_ids(), raw_index.similarities(qvec.front()), k, query.id, label);
}

std::string build_hyde_prompt(std::string_view query_text) {
    if (trim(query_text).empty()) throw InvalidQuery("query text is empty");
    return prompts::fill(prompts::kHypotheticalDocument, prompts::kQuerySlot, query_text);
}

RetrievalResult hyde_retrieve(const Query& query, const ToolIndex& raw_index, std::size_t k, TextProvider& provider,
                              const HydeSettings& settings) {
    std::string hypothetical;
    try {
        auto resp = generate({build_hyde_prompt(query.text), settings.temperature, settings.max_output_tokens,
                              std::nullopt},
                             provider, settings.retry);
        hypothetical = trim(resp.text);
        if (hypothetical.empty()) throw GenerationError("empty hypothetical document");
    } catch (const Error& e) {
        spdlog::warn("hyde for query {} fell back to the raw query: {}", query.id, e.what());
        return baseline_retrieve(query, raw_index, k, Method::hyde);
    }
    auto qvec = raw_index.encoder().encode_queries({hypothetical});
    return rank_by_similarity(raw_index.doc_ids(), raw_index.similarities(qvec.front()), k, query.id, Method::hyde);
}

RetrievalResult retrieve(const Query& query, const RetrievalSetup& setup, std::size_t k, Method method,
                         RetrievalTrace* trace) {
    auto need = [](const ToolIndex* index, std::string_view what) -> const ToolIndex& {
        if (!index) throw Error("retrieval setup has no " + std::string(what) + " index");
        return *index;
    };
    switch (method) {
        case Method::reinvoke: {
            const auto& index = need(setup.expanded, "expanded");
            auto intents = setup.llm ? extract_intents(query, *setup.llm, setup.intent) : passthrough_intent(query);
            ScoreMatrix scores;
            auto result = reinvoke_rank(intents, index, k, query.id, trace ? &scores : nullptr);
            if (trace) *trace = RetrievalTrace{std::move(intents), std::move(scores)};
            return result;
        }
        case Method::bm25: return baseline_retrieve(query, need(setup.raw_bm25, "raw bm25"), k, Method::bm25);
        case Method::dense: return baseline_retrieve(query, need(setup.raw_dense, "raw dense"), k, Method::dense);
        case Method::hyde: {
            const auto& index = setup.hyde_encoder == EncoderKind::bm25 ? need(setup.raw_bm25, "raw bm25")
                                                                        : need(setup.raw_dense, "raw dense");
            if (!setup.llm) throw Error("hyde needs a generation provider");
            return hyde_retrieve(query, index, k, *setup.llm, setup.hyde);
        }
    }
    throw Error("unknown method");
}

// ---------------------------------------------------------------- persistence

namespace {

constexpr char kMagic[4] = {'R', 'I', 'V', 'X'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
public:
    void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::string take() && { return std::move(buf_); }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}
    void bytes(void* p, std::size_t n) {
        if (pos_ + n > data_.size()) throw ChecksumError("vectors.bin is truncated");
        std::memcpy(p, data_.data() + pos_, n);
        pos_ += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, sizeof v);
        return v;
    }
    std::string str() {
        auto n = u32();
        if (pos_ + n > data_.size()) throw ChecksumError("vectors.bin is truncated");
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    bool done() const noexcept { return pos_ == data_.size(); }

private:
    std::string_view data_;
    std::size_t pos_ = 0;
};

void write_vector(Writer& w, const EmbeddingVector& v) {
    if (const auto* sv = std::get_if<SparseVector>(&v)) {
        w.u8(0);
        w.u32(static_cast<std::uint32_t>(sv->size()));
        for (const auto& [term, weight] : sv->entries) {
            w.str(term);
            w.f64(weight);
        }
        return;
    }
    const auto& dv = std::get<DenseVector>(v);
    w.u8(1);
    w.u32(static_cast<std::uint32_t>(dv.dim()));
    for (double x : dv.values) w.f64(x);
}

EmbeddingVector read_vector(Reader& r) {
    auto kind = r.u8();
    auto n = r.u32();
    if (kind == 0) {
        SparseVector sv;
        for (std::uint32_t i = 0; i < n; ++i) {
            auto term = r.str();
            sv.entries.emplace(std::move(term), r.f64());
        }
        return sv;
    }
    if (kind != 1) throw ChecksumError("vectors.bin has an unknown vector kind");
    DenseVector dv{std::vector<double>(n)};
    for (auto& x : dv.values) x = r.f64();
    return dv;
}

}  // namespace

void save_index(const ToolIndex& index, const std::filesystem::path& dir, const std::string& corpus_hash) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(index.size()));
    for (const auto& e : index.entries()) {
        w.str(e.doc_id);
        w.u32(static_cast<std::uint32_t>(e.copy_count));
        w.u32(static_cast<std::uint32_t>(e.vectors.size()));
        for (const auto& v : e.vectors) write_vector(w, v);
    }
    auto payload = std::move(w).take();

    nlohmann::ordered_json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["encoder"] = to_string(index.encoder().kind());
    manifest["dim"] = index.dim();
    manifest["m"] = index.copies_per_doc();
    manifest["aggregation"] = to_string(index.aggregation());
    manifest["corpus_hash"] = corpus_hash;
    manifest["doc_count"] = index.size();
    manifest["vectors_file"] = "vectors.bin";
    manifest["vectors_sha256"] = sha256_hex(payload);

    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "vectors.bin", payload);
    write_file_atomic(dir / "encoder.json", index.encoder().state().dump(1) + "\n");
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

nlohmann::json read_index_manifest(const std::filesystem::path& dir) {
    try {
        return nlohmann::json::parse(read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError((dir / "manifest.json").string(), 0, e.what());
    }
}

ToolIndex load_index(const std::filesystem::path& dir, std::shared_ptr<EmbeddingProvider> dense_provider,
                     std::shared_ptr<EmbeddingCache> cache) {
    auto manifest = read_index_manifest(dir);
    if (manifest.value("format_version", 0u) != kFormatVersion) throw Error("unsupported index format version");
    auto payload = read_file(dir / manifest.at("vectors_file").get<std::string>());
    if (sha256_hex(payload) != manifest.at("vectors_sha256").get<std::string>())
        throw ChecksumError("vectors.bin checksum does not match manifest in " + dir.string());

    nlohmann::json state;
    try {
        state = nlohmann::json::parse(read_file(dir / "encoder.json"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError((dir / "encoder.json").string(), 0, e.what());
    }
    std::shared_ptr<const Encoder> encoder;
    auto kind = parse_encoder_kind(manifest.at("encoder").get<std::string>());
    if (kind == EncoderKind::bm25) {
        encoder = std::make_shared<Bm25Encoder>(Bm25Stats::from_json(state));
    } else {
        if (!dense_provider) throw Error("dense index needs an embedding provider to load");
        if (state.value("provider", "") != dense_provider->id() || state.value("model", "") != dense_provider->model())
            throw Error("index was built with embedding provider " + state.value("provider", "?") + "/" +
                        state.value("model", "?") + ", not " + dense_provider->id() + "/" + dense_provider->model());
        encoder = std::make_shared<DenseEncoder>(std::move(dense_provider), std::move(cache));
    }

    Reader r(payload);
    char magic[4];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw ChecksumError("vectors.bin has a bad magic number");
    if (r.u32() != kFormatVersion) throw Error("unsupported vectors.bin version");
    auto count = r.u32();
    std::vector<DocIndexEntry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        DocIndexEntry e;
        e.doc_id = r.str();
        e.copy_count = r.u32();
        auto nvec = r.u32();
        for (std::uint32_t v = 0; v < nvec; ++v) e.vectors.push_back(read_vector(r));
        entries.push_back(std::move(e));
    }
    if (!r.done()) throw ChecksumError("vectors.bin has trailing bytes");
    return ToolIndex(std::move(entries), std::move(encoder),
                     parse_aggregation(manifest.at("aggregation").get<std::string>()));
}

namespace {

// Run files are whitespace separated, so ids escape whitespace and '%'.
std::string escape_id(const std::string& id) {
    std::string out;
    for (char c : id) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '%') {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", static_cast<unsigned char>(c));
            out += buf;
        } else {
            out += c;
        }
    }
    return out;
}

std::string unescape_id(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
            std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
            out += static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16));
            i += 2;
        } else {
            out += s[i];
        }
    }
    return out;
}

}  // namespace

std::string format_run(const std::vector<RetrievalResult>& results) {
    std::string out;
    for (const auto& r : results) {
        if (r.query_id.empty()) throw Error("empty query_id cannot be written to a run file");
        const auto qid = escape_id(r.query_id);
        for (std::size_t p = 0; p < r.ranked.size(); ++p) {
            const auto& d = r.ranked[p];
            out += qid + ' ' + escape_id(d.doc_id) + ' ' + std::to_string(p + 1) + ' ' + format_double(d.key.sim) +
                   ' ' + std::string(to_string(r.method)) + '\n';
        }
    }
    return out;
}

std::vector<RetrievalResult> parse_run(std::string_view text, const std::string& source) {
    std::vector<RetrievalResult> results;
    std::unordered_map<std::string, std::size_t> slot;
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        std::istringstream in(lines[i]);
        std::string qid, doc, score_text, method;
        std::size_t rank = 0;
        if (!(in >> qid >> doc >> rank >> score_text >> method))
            throw ParseError(source, i + 1, "expected 'query_id doc_id rank score method'");
        // strtod, unlike operator>>, accepts subnormal scores
        char* end = nullptr;
        double score = std::strtod(score_text.c_str(), &end);
        if (end != score_text.c_str() + score_text.size()) throw ParseError(source, i + 1, "bad score " + score_text);
        auto m = parse_method(method);
        qid = unescape_id(qid);
        doc = unescape_id(doc);
        auto [it, inserted] = slot.emplace(qid + '\0' + method, results.size());
        if (inserted) results.push_back({qid, m, {}});
        auto& r = results[it->second];
        if (rank != r.ranked.size() + 1) throw ParseError(source, i + 1, "ranks must be 1, 2, ... per query");
        r.ranked.push_back({doc, RankKey{0, score}});
    }
    return results;
}

}  // namespace reinvoke
