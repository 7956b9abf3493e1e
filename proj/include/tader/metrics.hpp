#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tader/corpus.hpp"
#include "tader/features.hpp"
#include "tader/ranker.hpp"

namespace tader {

struct QueryResult {
  std::string query;
  std::vector<std::string> ranked;    ///< best first
  std::vector<std::string> relevant;  ///< sorted, unique, non-empty
};

/// Fraction of queries with a relevant key in the top k.
/// All three throw ValidationError("no evaluable queries") on empty input
/// and when k == 0.
double accuracy_at_k(std::span<const QueryResult> results, std::size_t k);
/// Mean of 1 / rank of the first relevant key within the top k (0 on a miss).
double mrr_at_k(std::span<const QueryResult> results, std::size_t k);
/// Mean per-query share of relevant keys found in the top k.
double recall_at_k(std::span<const QueryResult> results, std::size_t k);

/// The 28 feature sets of the experiment grid: each non-empty subset of
/// {T, D, S} alone, with C2, with CU, and with both.
std::vector<FeatureSet> enumerate_feature_combos();

inline const std::vector<std::size_t> kDefaultKs{1, 2, 3, 5};

struct MetricsAtK {
  std::size_t k = 0;
  double accuracy = 0.0;
  double mrr = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  std::string dataset;
  std::string features;
  std::string scorer;
  std::string filter;
  std::vector<MetricsAtK> metrics;
  std::size_t queries = 0;
  /// Test issues with no link to an earlier issue.
  std::size_t excluded = 0;
  /// Links from test issues to issues created at or after them.
  std::size_t dropped_forward_links = 0;

  std::string to_json() const;
  /// One row per K, in the column order of csv_header().
  std::string csv_rows() const;
  static std::string csv_header();
};

struct EvalOptions {
  std::string dataset;
  TimeFilter filter;
  std::vector<std::size_t> ks = kDefaultKs;
};

/// Ranks every test issue against all issues of `corpus` created before it and
/// scores the top lists against its backward links. `scorer` must already be
/// indexed (or will fall back to on-the-fly representations).
/// Throws ValidationError when no test issue has a backward link.
EvalReport evaluate(const IssueSet& corpus, const IssueSet& test, const Scorer& scorer, const EvalOptions& options);

/// Lower-level form returning the per-query results.
std::vector<QueryResult> rank_queries(const IssueSet& corpus, const IssueSet& test, const Scorer& scorer,
                                      const TimeFilter& filter, std::size_t k, std::size_t* excluded,
                                      std::size_t* dropped_forward);

}  // namespace tader
