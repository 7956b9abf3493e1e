#include "tader/metrics.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <json.hpp>

#include "tader/error.hpp"

namespace tader {

namespace {

void check(std::span<const QueryResult> results, std::size_t k) {
  if (k == 0) throw ValidationError("K must be at least 1");
  if (results.empty()) throw ValidationError("no evaluable queries");
}

bool is_relevant(const QueryResult& r, const std::string& key) {
  return std::binary_search(r.relevant.begin(), r.relevant.end(), key);
}

// 1-based rank of the first relevant key within the top k, 0 if none.
std::size_t first_hit(const QueryResult& r, std::size_t k) {
  const std::size_t n = std::min(k, r.ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (is_relevant(r, r.ranked[i])) return i + 1;
  }
  return 0;
}

}  // namespace

double accuracy_at_k(std::span<const QueryResult> results, std::size_t k) {
  check(results, k);
  std::size_t hits = 0;
  for (const auto& r : results) hits += first_hit(r, k) != 0 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

double mrr_at_k(std::span<const QueryResult> results, std::size_t k) {
  check(results, k);
  double sum = 0.0;
  for (const auto& r : results) {
    const std::size_t rank = first_hit(r, k);
    if (rank != 0) sum += 1.0 / static_cast<double>(rank);
  }
  return sum / static_cast<double>(results.size());
}

double recall_at_k(std::span<const QueryResult> results, std::size_t k) {
  check(results, k);
  double sum = 0.0;
  for (const auto& r : results) {
    if (r.relevant.empty()) throw ValidationError(fmt::format("query {} has no relevant keys", r.query));
    const std::size_t n = std::min(k, r.ranked.size());
    std::size_t found = 0;
    for (std::size_t i = 0; i < n; ++i) found += is_relevant(r, r.ranked[i]) ? 1 : 0;
    sum += static_cast<double>(found) / static_cast<double>(r.relevant.size());
  }
  return sum / static_cast<double>(results.size());
}

std::vector<FeatureSet> enumerate_feature_combos() {
  // T, D, S, TD, TS, TDS, DS
  static constexpr bool kText[7][3] = {{true, false, false}, {false, true, false}, {false, false, true},
                                       {true, true, false},  {true, false, true},  {true, true, true},
                                       {false, true, true}};
  static constexpr bool kScalars[4][2] = {{false, false}, {true, false}, {false, true}, {true, true}};
  std::vector<FeatureSet> out;
  for (const auto& s : kScalars) {
    for (const auto& t : kText) out.push_back({t[0], t[1], t[2], s[0], s[1]});
  }
  return out;
}

std::vector<QueryResult> rank_queries(const IssueSet& corpus, const IssueSet& test, const Scorer& scorer,
                                      const TimeFilter& filter, std::size_t k, std::size_t* excluded,
                                      std::size_t* dropped_forward) {
  std::vector<QueryResult> results;
  std::size_t n_excluded = 0;
  std::size_t n_forward = 0;
  for (const Issue& query : test.issues()) {
    QueryResult r;
    r.query = query.key;
    for (const auto& key : query.links) {
      const Issue* other = corpus.find(key);
      if (other == nullptr) continue;
      if (other->created < query.created) {
        r.relevant.push_back(key);
      } else {
        ++n_forward;
      }
    }
    if (r.relevant.empty()) {
      ++n_excluded;
      continue;
    }
    std::sort(r.relevant.begin(), r.relevant.end());
    for (auto& rec : recommend(query, corpus, scorer, filter, k)) r.ranked.push_back(std::move(rec.key));
    results.push_back(std::move(r));
  }
  if (excluded != nullptr) *excluded = n_excluded;
  if (dropped_forward != nullptr) *dropped_forward = n_forward;
  return results;
}

EvalReport evaluate(const IssueSet& corpus, const IssueSet& test, const Scorer& scorer, const EvalOptions& options) {
  if (options.ks.empty()) throw ValidationError("K list is empty");
  const std::size_t max_k = *std::max_element(options.ks.begin(), options.ks.end());
  EvalReport report;
  report.dataset = options.dataset;
  report.features = scorer.features().name();
  report.scorer = scorer.name();
  report.filter = options.filter.name();
  const auto results =
      rank_queries(corpus, test, scorer, options.filter, max_k, &report.excluded, &report.dropped_forward_links);
  if (results.empty()) throw ValidationError("no evaluable queries");
  report.queries = results.size();
  for (std::size_t k : options.ks) {
    report.metrics.push_back({k, accuracy_at_k(results, k), mrr_at_k(results, k), recall_at_k(results, k)});
  }
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["features"] = features;
  j["scorer"] = scorer;
  j["filter"] = filter;
  j["queries"] = queries;
  j["excluded"] = excluded;
  j["dropped_forward_links"] = dropped_forward_links;
  auto& m = j["metrics"] = nlohmann::ordered_json::array();
  for (const auto& row : metrics) {
    m.push_back({{"k", row.k}, {"accuracy", row.accuracy}, {"mrr", row.mrr}, {"recall", row.recall}});
  }
  return j.dump(2);
}

std::string EvalReport::csv_header() { return "dataset,features,scorer,filter,K,accuracy,mrr,recall,queries,excluded\n"; }

std::string EvalReport::csv_rows() const {
  std::string out;
  for (const auto& row : metrics) {
    out += fmt::format("{},{},{},{},{},{:.6f},{:.6f},{:.6f},{},{}\n", dataset, features, scorer, filter, row.k,
                       row.accuracy, row.mrr, row.recall, queries, excluded);
  }
  return out;
}

}  // namespace tader
