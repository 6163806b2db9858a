#include "reinvoke/embedding.hpp"

#include "reinvoke/error.hpp"
#include "reinvoke/parallel.hpp"
#include "reinvoke/util.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <fstream>
#include <numeric>

namespace reinvoke {

static_assert(std::endian::native == std::endian::little, "vector files assume a little-endian host");

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
        if (word) {
            cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

void SparseVector::add(const std::string& term, double weight) {
    if (weight == 0.0) return;
    auto [it, inserted] = entries.emplace(term, weight);
    if (!inserted) {
        it->second += weight;
        if (it->second == 0.0) entries.erase(it);
    }
}

SparseVector SparseVector::counts(std::string_view text) {
    SparseVector v;
    for (const auto& t : tokenize(text)) v.entries[t] += 1.0;
    return v;
}

double dot(const SparseVector& a, const SparseVector& b) {
    // Iterating the smaller map in term order makes the summation order the
    // sorted order of shared terms either way round, so dot is symmetric.
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    double sum = 0.0;
    for (const auto& [term, w] : small.entries) {
        auto it = large.entries.find(term);
        if (it != large.entries.end()) sum += w * it->second;
    }
    return sum;
}

double dot(const DenseVector& a, const DenseVector& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) sum += a.values[i] * b.values[i];
    return sum;
}

double similarity(const EmbeddingVector& q, const EmbeddingVector& d) {
    if (q.index() != d.index()) throw DimensionMismatch("cannot compare sparse and dense vectors");
    if (const auto* qs = std::get_if<SparseVector>(&q)) return dot(*qs, std::get<SparseVector>(d));
    return dot(std::get<DenseVector>(q), std::get<DenseVector>(d));
}

void l2_normalize(DenseVector& v) {
    double norm2 = 0.0;
    for (double x : v.values) norm2 += x * x;
    if (norm2 == 0.0) return;
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v.values) x *= inv;
}

EmbeddingVector mean_vector(std::span<const EmbeddingVector> vectors) {
    if (vectors.empty()) throw Error("mean of zero vectors");
    const auto n = static_cast<double>(vectors.size());
    if (std::holds_alternative<SparseVector>(vectors.front())) {
        std::map<std::string, double> sum;
        for (const auto& v : vectors) {
            const auto* sv = std::get_if<SparseVector>(&v);
            if (!sv) throw DimensionMismatch("mixed sparse and dense vectors");
            for (const auto& [term, w] : sv->entries) sum[term] += w;
        }
        SparseVector mean;
        for (const auto& [term, w] : sum) mean.add(term, w / n);
        return mean;
    }
    const auto dim = std::get<DenseVector>(vectors.front()).dim();
    DenseVector mean{std::vector<double>(dim, 0.0)};
    for (const auto& v : vectors) {
        const auto* dv = std::get_if<DenseVector>(&v);
        if (!dv) throw DimensionMismatch("mixed sparse and dense vectors");
        if (dv->dim() != dim) throw DimensionMismatch(dim, dv->dim());
        for (std::size_t i = 0; i < dim; ++i) mean.values[i] += dv->values[i];
    }
    for (double& x : mean.values) x /= n;
    return mean;
}

// ---------------------------------------------------------------- BM25

double Bm25Stats::idf(const std::string& term) const {
    auto it = doc_freq.find(term);
    double df = it == doc_freq.end() ? 0.0 : static_cast<double>(it->second);
    double n = static_cast<double>(doc_count);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

nlohmann::json Bm25Stats::to_json() const {
    // Sorted so the serialized stats are byte-stable.
    std::map<std::string, std::size_t> sorted(doc_freq.begin(), doc_freq.end());
    return nlohmann::json{{"doc_count", doc_count}, {"avg_doc_len", avg_doc_len}, {"k1", k1}, {"b", b},
                          {"doc_freq", sorted}};
}

Bm25Stats Bm25Stats::from_json(const nlohmann::json& j) {
    Bm25Stats s;
    s.doc_count = j.at("doc_count").get<std::size_t>();
    s.avg_doc_len = j.at("avg_doc_len").get<double>();
    s.k1 = j.at("k1").get<double>();
    s.b = j.at("b").get<double>();
    for (auto& [term, df] : j.at("doc_freq").items()) s.doc_freq[term] = df.get<std::size_t>();
    return s;
}

Bm25Stats bm25_fit(const std::vector<std::string>& texts, Bm25Params params) {
    if (texts.empty()) throw EmptyCorpus();
    Bm25Stats stats;
    stats.k1 = params.k1;
    stats.b = params.b;
    stats.doc_count = texts.size();
    std::size_t total_len = 0;
    for (const auto& text : texts) {
        auto counts = SparseVector::counts(text);
        for (const auto& [term, tf] : counts.entries) {
            total_len += static_cast<std::size_t>(tf);
            ++stats.doc_freq[term];
        }
    }
    stats.avg_doc_len = static_cast<double>(total_len) / static_cast<double>(texts.size());
    // An all-empty collection has no meaningful length norm; treat it as 1.
    if (stats.avg_doc_len == 0.0) stats.avg_doc_len = 1.0;
    return stats;
}

SparseVector bm25_doc_vector(std::string_view doc_text, const Bm25Stats& stats) {
    auto counts = SparseVector::counts(doc_text);
    double len = 0.0;
    for (const auto& [_, tf] : counts.entries) len += tf;
    const double norm = stats.k1 * (1.0 - stats.b + stats.b * len / stats.avg_doc_len);
    SparseVector v;
    for (const auto& [term, tf] : counts.entries) {
        v.add(term, stats.idf(term) * tf * (stats.k1 + 1.0) / (tf + norm));
    }
    return v;
}

// ---------------------------------------------------------------- dense

std::vector<std::vector<double>> MockEmbeddingProvider::embed(std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> v(dim_, 0.0);
        for (const auto& tok : tokenize(text)) {
            auto h = stable_hash64(tok);
            v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
        }
        out.push_back(std::move(v));
    }
    return out;
}

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string EmbeddingCache::key(std::string_view provider_id, std::string_view model, std::string_view text) {
    std::string buf;
    buf.append(provider_id).push_back('\0');
    buf.append(model).push_back('\0');
    buf.append(text);
    return sha256_hex(buf);
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& key) const {
    auto path = dir_ / (key + ".f64");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::uint32_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    std::vector<double> values(dim);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(dim * sizeof(double)));
    if (!in || in.peek() != std::char_traits<char>::eof()) return std::nullopt;  // truncated; recompute
    return values;
}

void EmbeddingCache::put(const std::string& key, const std::vector<double>& values, std::string_view provider_id,
                         std::string_view model) {
    std::string bytes(sizeof(std::uint32_t) + values.size() * sizeof(double), '\0');
    auto dim = static_cast<std::uint32_t>(values.size());
    std::memcpy(bytes.data(), &dim, sizeof dim);
    std::memcpy(bytes.data() + sizeof dim, values.data(), values.size() * sizeof(double));
    write_file_atomic(dir_ / (key + ".f64"), bytes);
    std::lock_guard lock(mu_);
    pending_[key] = {{"dim", values.size()}, {"provider", provider_id}, {"model", model}};
}

void EmbeddingCache::flush() {
    std::lock_guard lock(mu_);
    if (pending_.empty()) return;
    auto path = dir_ / "manifest.json";
    nlohmann::json manifest = {{"format", "u32 dim + f64le values"}, {"entries", nlohmann::json::object()}};
    if (std::filesystem::exists(path)) {
        try {
            manifest = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::exception&) {
            // rebuilt from this process's entries
        }
    }
    for (auto& [k, v] : pending_.items()) manifest["entries"][k] = v;
    write_file_atomic(path, manifest.dump(1));
    pending_ = nlohmann::json::object();
}

std::vector<DenseVector> dense_encode(const std::vector<std::string>& texts, EmbeddingProvider& provider,
                                      EmbeddingCache* cache, const DenseEncodeOptions& options) {
    if (options.batch_size < 1) throw Error("batch_size must be positive");
    const auto provider_id = provider.id();
    const auto model = provider.model();

    std::vector<std::optional<DenseVector>> out(texts.size());
    // Distinct uncached texts, each with the output slots it fills.
    std::vector<std::string> misses;
    std::vector<std::string> miss_keys;
    std::unordered_map<std::string, std::size_t> miss_slot;
    std::vector<std::vector<std::size_t>> miss_targets;

    for (std::size_t i = 0; i < texts.size(); ++i) {
        auto key = EmbeddingCache::key(provider_id, model, texts[i]);
        if (cache) {
            if (auto hit = cache->get(key)) {
                out[i] = DenseVector{std::move(*hit)};
                continue;
            }
        }
        auto [it, inserted] = miss_slot.emplace(key, misses.size());
        if (inserted) {
            misses.push_back(texts[i]);
            miss_keys.push_back(key);
            miss_targets.emplace_back();
        }
        miss_targets[it->second].push_back(i);
    }

    const std::size_t batches = (misses.size() + options.batch_size - 1) / options.batch_size;
    std::vector<std::vector<std::vector<double>>> results(batches);
    std::vector<std::exception_ptr> errors(batches);
    parallel_for(batches, options.jobs, [&](std::size_t b) {
        auto first = b * options.batch_size;
        auto count = std::min(options.batch_size, misses.size() - first);
        std::span<const std::string> batch(misses.data() + first, count);
        try {
            results[b] = with_retry(options.retry, provider_id, [&] { return provider.embed(batch); });
            if (results[b].size() != count)
                throw ProviderError(provider_id + ": expected " + std::to_string(count) + " embeddings, got " +
                                        std::to_string(results[b].size()),
                                    0, false);
        } catch (...) {
            errors[b] = std::current_exception();
        }
    });
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);

    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t j = 0; j < results[b].size(); ++j) {
            auto m = b * options.batch_size + j;
            DenseVector v{std::move(results[b][j])};
            if (v.dim() == 0) throw DimensionMismatch("provider returned an empty embedding");
            l2_normalize(v);
            if (cache) cache->put(miss_keys[m], v.values, provider_id, model);
            for (auto i : miss_targets[m]) out[i] = v;
        }
    }
    if (cache) cache->flush();

    std::vector<DenseVector> vectors;
    vectors.reserve(out.size());
    for (auto& v : out) {
        if (!vectors.empty() && v->dim() != vectors.front().dim())
            throw DimensionMismatch(vectors.front().dim(), v->dim());
        vectors.push_back(std::move(*v));
    }
    return vectors;
}

// ---------------------------------------------------------------- encoders

EncoderKind parse_encoder_kind(std::string_view name) {
    if (name == "bm25") return EncoderKind::bm25;
    if (name == "dense") return EncoderKind::dense;
    throw Error("unknown encoder kind: " + std::string(name));
}

std::string_view to_string(EncoderKind kind) {
    return kind == EncoderKind::bm25 ? "bm25" : "dense";
}

std::vector<EmbeddingVector> Bm25Encoder::encode_documents(const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.emplace_back(bm25_doc_vector(t, stats_));
    return out;
}

std::vector<EmbeddingVector> Bm25Encoder::encode_queries(const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.emplace_back(SparseVector::counts(t));
    return out;
}

DenseEncoder::DenseEncoder(std::shared_ptr<EmbeddingProvider> provider, std::shared_ptr<EmbeddingCache> cache,
                           DenseEncodeOptions options)
    : provider_(std::move(provider)), cache_(std::move(cache)), options_(options) {
    if (!provider_) throw Error("dense encoder needs an embedding provider");
}

std::vector<EmbeddingVector> DenseEncoder::encode_documents(const std::vector<std::string>& texts) const {
    if (texts.empty()) return {};
    auto dense = dense_encode(texts, *provider_, cache_.get(), options_);
    return {std::make_move_iterator(dense.begin()), std::make_move_iterator(dense.end())};
}

std::vector<EmbeddingVector> DenseEncoder::encode_queries(const std::vector<std::string>& texts) const {
    return encode_documents(texts);
}

nlohmann::json DenseEncoder::state() const {
    return {{"provider", provider_->id()}, {"model", provider_->model()}};
}

EncoderFactory bm25_encoder_factory(Bm25Params params) {
    return [params](const std::vector<std::string>& collection) -> std::shared_ptr<const Encoder> {
        return std::make_shared<Bm25Encoder>(bm25_fit(collection, params));
    };
}

EncoderFactory dense_encoder_factory(std::shared_ptr<EmbeddingProvider> provider,
                                     std::shared_ptr<EmbeddingCache> cache, DenseEncodeOptions options) {
    auto encoder = std::make_shared<DenseEncoder>(std::move(provider), std::move(cache), options);
    return [encoder](const std::vector<std::string>&) -> std::shared_ptr<const Encoder> { return encoder; };
}

}  // namespace reinvoke
