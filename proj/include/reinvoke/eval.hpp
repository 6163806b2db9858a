#pragma once

#include "reinvoke/corpus.hpp"
#include "reinvoke/expansion.hpp"
#include "reinvoke/index.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace reinvoke {

enum class Metric { ndcg, recall, roundtrip_recall };

std::string_view to_string(Metric metric);

struct EvalReport {
    std::string method;
    Metric metric = Metric::ndcg;
    std::size_t k = 5;
    double value = 0.0;  // macro average of per_query
    std::map<std::string, double> per_query;
};

/// DCG@k / IDCG@k with gain(doc) / log2(position + 1). The ideal ordering
/// uses every relevant gain, truncated at k. Throws EmptyRelevanceSet.
double ndcg_at_k(const std::vector<std::string>& ranked, const std::map<std::string, double>& relevant,
                 std::size_t k);

/// |top-k ∩ relevant| / |relevant|. Throws EmptyRelevanceSet.
double recall_at_k(const std::vector<std::string>& ranked, const std::set<std::string>& relevant, std::size_t k);

/// Each synthetic query is retrieved as a single intent against `index`;
/// it scores 1 when its own tool is in the top k. One report per k.
std::vector<EvalReport> roundtrip_consistency(const std::vector<SyntheticQuery>& synthetic, const ToolIndex& index,
                                              const std::vector<std::size_t>& ks,
                                              const std::string& method = "reinvoke");

struct RunEvaluation {
    std::vector<EvalReport> reports;  // per method: ndcg@k for each k, then recall@k for each k
    std::size_t dataset_queries = 0;
    std::size_t excluded_queries = 0;  // dropped at load time (no relevant tool in the corpus)
    std::map<std::string, std::size_t> evaluated_queries;  // per method
};

/// Scores every result against its labeled example. Results may mix
/// methods; each method is reported separately. Throws UnknownQuery for a
/// result whose query is not in the dataset.
RunEvaluation evaluate_run(const std::vector<RetrievalResult>& results, const EvalDataset& dataset,
                           const std::vector<std::size_t>& ks);

nlohmann::ordered_json to_json(const RunEvaluation& evaluation);
nlohmann::ordered_json to_json(const std::vector<EvalReport>& reports);

/// Aligned text table, one row per method, sorted by `sort_metric`@`sort_k`
/// descending (method name breaks ties).
std::string format_table(const std::vector<EvalReport>& reports, Metric sort_metric = Metric::ndcg,
                         std::size_t sort_k = 5);

}  // namespace reinvoke
