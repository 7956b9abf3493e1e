#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tader/metrics.hpp"
#include "tader/tfidf.hpp"

namespace tader::test {

/// Direct evaluation of idf(w) = ln(N / df(w)) over a corpus.
inline std::map<std::string, double> oracle_idf(const std::vector<TokenSeq>& docs) {
  std::map<std::string, int> df;
  for (const auto& d : docs) {
    const std::set<std::string> uniq(d.begin(), d.end());
    for (const auto& w : uniq) ++df[w];
  }
  std::map<std::string, double> idf;
  for (const auto& [w, n] : df) idf[w] = std::log(static_cast<double>(docs.size()) / n);
  return idf;
}

/// term -> tf * idf for the in-vocabulary terms of `doc` (zeros kept).
inline std::map<std::string, double> oracle_weights(const std::map<std::string, double>& idf, const TokenSeq& doc) {
  std::map<std::string, int> counts;
  for (const auto& w : doc) {
    if (idf.contains(w)) ++counts[w];
  }
  int max_count = 0;
  for (const auto& [w, c] : counts) max_count = std::max(max_count, c);
  std::map<std::string, double> out;
  for (const auto& [w, c] : counts) out[w] = static_cast<double>(c) / max_count * idf.at(w);
  return out;
}

inline std::vector<double> densify(const SparseVec& v, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < v.nnz(); ++i) out[v.indices[i]] = v.weights[i];
  return out;
}

/// Textbook formulas on dense vectors.
inline double oracle_distance(const std::vector<double>& u, const std::vector<double>& v, Metric m) {
  double dot = 0, nu = 0, nv = 0, l1 = 0, l2 = 0, linf = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
    const double d = std::abs(u[i] - v[i]);
    l1 += d;
    l2 += d * d;
    linf = std::max(linf, d);
  }
  switch (m) {
    case Metric::cosine: return (nu == 0 || nv == 0) ? 0.0 : dot / (std::sqrt(nu) * std::sqrt(nv));
    case Metric::euclidean: return std::sqrt(l2);
    case Metric::manhattan: return l1;
    case Metric::chebyshev: return linf;
  }
  return 0.0;
}

/// Ranking metrics by explicit set operations over each top-K list.
struct OracleMetrics {
  double accuracy = 0, mrr = 0, recall = 0;
};

inline OracleMetrics oracle_metrics(const std::vector<QueryResult>& results, std::size_t k) {
  OracleMetrics m;
  for (const auto& r : results) {
    const std::vector<std::string> top(r.ranked.begin(), r.ranked.begin() + std::min(k, r.ranked.size()));
    const std::set<std::string> top_set(top.begin(), top.end());
    const std::set<std::string> rel(r.relevant.begin(), r.relevant.end());
    std::vector<std::string> inter;
    std::set_intersection(top_set.begin(), top_set.end(), rel.begin(), rel.end(), std::back_inserter(inter));
    if (!inter.empty()) m.accuracy += 1;
    for (std::size_t i = 0; i < top.size(); ++i) {
      if (rel.contains(top[i])) {
        m.mrr += 1.0 / static_cast<double>(i + 1);
        break;
      }
    }
    m.recall += static_cast<double>(inter.size()) / static_cast<double>(rel.size());
  }
  const double n = static_cast<double>(results.size());
  return {m.accuracy / n, m.mrr / n, m.recall / n};
}

/// y(j) = sum_i x(j*s + i) h(i) written as the plain double loop.
inline std::vector<double> oracle_conv1d(const std::vector<double>& x, const std::vector<double>& h, std::size_t s) {
  std::vector<double> y;
  for (std::size_t j = 0; j * s + h.size() <= x.size(); ++j) {
    double acc = 0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += x[j * s + i] * h[i];
    y.push_back(acc);
  }
  return y;
}

}  // namespace tader::test
