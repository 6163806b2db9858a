#include "reinvoke/eval.hpp"

#include "reinvoke/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace reinvoke {

std::string_view to_string(Metric metric) {
    switch (metric) {
        case Metric::ndcg: return "ndcg";
        case Metric::recall: return "recall";
        case Metric::roundtrip_recall: return "roundtrip_recall";
    }
    return "?";
}

double ndcg_at_k(const std::vector<std::string>& ranked, const std::map<std::string, double>& relevant,
                 std::size_t k) {
    if (relevant.empty()) throw EmptyRelevanceSet();
    double dcg = 0.0;
    std::set<std::string> counted;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
        auto it = relevant.find(ranked[i]);
        if (it == relevant.end() || !counted.insert(ranked[i]).second) continue;
        dcg += it->second / std::log2(static_cast<double>(i) + 2.0);
    }
    if (dcg == 0.0) return 0.0;

    std::vector<double> gains;
    for (const auto& [_, g] : relevant) gains.push_back(g);
    std::sort(gains.begin(), gains.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, gains.size()); ++i) idcg += gains[i] / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

double recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& relevant, std::size_t k) {
    if (relevant.empty()) throw EmptyRelevanceSet();
    std::set<std::string> hits;
    for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
        if (relevant.count(ranked[i])) hits.insert(ranked[i]);
    return static_cast<double>(hits.size()) / static_cast<double>(relevant.size());
}

namespace {

double mean_of(const std::map<std::string, double>& per_query) {
    if (per_query.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [_, v] : per_query) sum += v;
    return sum / static_cast<double>(per_query.size());
}

std::vector<std::string> ids_of(const RetrievalResult& r) {
    std::vector<std::string> ids;
    ids.reserve(r.ranked.size());
    for (const auto& d : r.ranked) ids.push_back(d.doc_id);
    return ids;
}

}  // namespace

std::vector<EvalReport> roundtrip_consistency(const std::vector<SyntheticQuery>& synthetic, const ToolIndex& index,
                                              const std::vector<std::size_t>& ks, const std::string& method) {
    if (ks.empty()) return {};
    const auto k_max = *std::max_element(ks.begin(), ks.end());
    std::vector<std::string> texts;
    std::vector<std::string> qids;
    for (const auto& q : synthetic) {
        texts.push_back(passthrough_intent({q.doc_id, q.text}).front().text);
        qids.push_back(q.doc_id + "#" + std::to_string(q.copy_index));
    }
    auto qvecs = texts.empty() ? std::vector<EmbeddingVector>{} : index.encoder().encode_queries(texts);
    const auto doc_ids = index.doc_ids();

    std::vector<EvalReport> reports;
    for (auto k : ks) reports.push_back({method, Metric::roundtrip_recall, k, 0.0, {}});
    for (std::size_t i = 0; i < synthetic.size(); ++i) {
        auto scores = rank_within_intents(doc_ids, {index.similarities(qvecs[i])});
        auto ranked = ids_of(multiview_rank(scores, k_max, qids[i]));
        for (auto& report : reports) {
            auto top = std::min(report.k, ranked.size());
            bool hit = std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(top),
                                 synthetic[i].doc_id) != ranked.begin() + static_cast<std::ptrdiff_t>(top);
            report.per_query[qids[i]] = hit ? 1.0 : 0.0;
        }
    }
    for (auto& report : reports) report.value = mean_of(report.per_query);
    return reports;
}

RunEvaluation evaluate_run(const std::vector<RetrievalResult>& results, const EvalDataset& dataset,
                           const std::vector<std::size_t>& ks) {
    RunEvaluation eval;
    eval.dataset_queries = dataset.examples.size();
    eval.excluded_queries = dataset.excluded;

    std::map<std::string, std::vector<const RetrievalResult*>> by_method;
    std::vector<std::string> method_order;
    for (const auto& r : results) {
        if (!dataset.find(r.query_id)) throw UnknownQuery(r.query_id);
        auto name = std::string(to_string(r.method));
        auto& list = by_method[name];
        if (list.empty()) method_order.push_back(name);
        for (const auto* prev : list)
            if (prev->query_id == r.query_id) throw Error("duplicate result for query " + r.query_id + " (" + name + ")");
        list.push_back(&r);
    }

    for (const auto& method : method_order) {
        const auto& list = by_method[method];
        eval.evaluated_queries[method] = list.size();
        for (auto metric : {Metric::ndcg, Metric::recall}) {
            for (auto k : ks) {
                EvalReport report{method, metric, k, 0.0, {}};
                for (const auto* r : list) {
                    const auto* ex = dataset.find(r->query_id);
                    auto ranked = ids_of(*r);
                    double v = 0.0;
                    if (metric == Metric::ndcg) {
                        v = ndcg_at_k(ranked, ex->relevance(), k);
                    } else {
                        std::set<std::string> rel(ex->relevant_doc_ids.begin(), ex->relevant_doc_ids.end());
                        v = recall_at_k(ranked, rel, k);
                    }
                    report.per_query[r->query_id] = v;
                }
                report.value = mean_of(report.per_query);
                eval.reports.push_back(std::move(report));
            }
        }
    }
    return eval;
}

nlohmann::ordered_json to_json(const std::vector<EvalReport>& reports) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["method"] = r.method;
        j["metric"] = to_string(r.metric);
        j["k"] = r.k;
        j["value"] = r.value;
        j["averaging"] = "macro (mean over queries)";
        j["per_query"] = r.per_query;
        arr.push_back(std::move(j));
    }
    return arr;
}

nlohmann::ordered_json to_json(const RunEvaluation& evaluation) {
    nlohmann::ordered_json j;
    j["dataset_queries"] = evaluation.dataset_queries;
    j["excluded_queries"] = evaluation.excluded_queries;
    j["evaluated_queries"] = evaluation.evaluated_queries;
    j["reports"] = to_json(evaluation.reports);
    return j;
}

std::string format_table(const std::vector<EvalReport>& reports, Metric sort_metric, std::size_t sort_k) {
    std::vector<std::string> methods;
    std::vector<std::pair<Metric, std::size_t>> columns;
    std::map<std::pair<std::string, std::pair<Metric, std::size_t>>, double> cell;
    for (const auto& r : reports) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        std::pair col{r.metric, r.k};
        if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
        cell[{r.method, col}] = r.value;
    }
    auto sort_value = [&](const std::string& m) {
        auto it = cell.find({m, {sort_metric, sort_k}});
        return it == cell.end() ? -1.0 : it->second;
    };
    std::stable_sort(methods.begin(), methods.end(), [&](const auto& a, const auto& b) {
        auto va = sort_value(a), vb = sort_value(b);
        if (va != vb) return va > vb;
        return a < b;
    });

    std::size_t name_w = 6;
    for (const auto& m : methods) name_w = std::max(name_w, m.size());
    std::vector<std::string> headers;
    for (const auto& [metric, k] : columns) headers.push_back(std::string(to_string(metric)) + "@" + std::to_string(k));

    std::string out;
    auto pad = [](std::string s, std::size_t w, bool left) {
        if (s.size() < w) s = left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
        return s;
    };
    out += pad("method", name_w, true);
    for (const auto& h : headers) out += "  " + pad(h, std::max<std::size_t>(h.size(), 6), false);
    out += "\n";
    for (const auto& m : methods) {
        out += pad(m, name_w, true);
        for (std::size_t c = 0; c < columns.size(); ++c) {
            auto it = cell.find({m, columns[c]});
            char buf[32] = "-";
            if (it != cell.end()) std::snprintf(buf, sizeof buf, "%.4f", it->second);
            out += "  " + pad(buf, std::max<std::size_t>(headers[c].size(), 6), false);
        }
        out += "\n";
    }
    return out;
}

}  // namespace reinvoke
