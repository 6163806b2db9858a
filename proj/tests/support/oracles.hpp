#pragma once

// Independent reference implementations used to check the library. They
// share no code with src/ beyond plain data types.

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// Multi-view ranking evaluated by exhaustive comparison. sims[i][j] is intent i
/// against doc_ids[j]. Returns the top-k doc ids, chosen one at a time as the
/// remaining document with the largest key (ties: smallest doc id).
std::vector<std::string> multiview_topk(const std::vector<std::string>& doc_ids,
                                        const std::vector<std::vector<double>>& sims, std::size_t k);

/// (reversed_rank, sim) per document, in doc_ids order.
std::vector<std::pair<std::size_t, double>> multiview_keys(const std::vector<std::string>& doc_ids,
                                                           const std::vector<std::vector<double>>& sims);

/// Lowercase ASCII, split on non-alphanumeric ASCII; other bytes are letters.
std::vector<std::string> words(const std::string& text);

/// Textbook BM25 of `query` against corpus[doc], k1 = 1.5, b = 0.75,
/// idf = ln(1 + (N - df + 0.5) / (df + 0.5)), summing over query tokens.
double bm25_score(const std::string& query, const std::vector<std::string>& corpus, std::size_t doc);

/// DCG@k / IDCG@k straight from the definition.
double ndcg(const std::vector<std::string>& ranked, const std::map<std::string, double>& gains, std::size_t k);

}  // namespace oracle
