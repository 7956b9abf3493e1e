#include "tader/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "tader/error.hpp"

namespace tader {

double SparseVec::at(std::size_t index) const {
  auto it = std::lower_bound(indices.begin(), indices.end(), index);
  if (it == indices.end() || *it != index) return 0.0;
  return weights[static_cast<std::size_t>(it - indices.begin())];
}

SparseVec SparseVec::from_entries(std::vector<std::pair<std::size_t, double>> entries) {
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVec out;
  for (std::size_t i = 0; i < entries.size();) {
    const std::size_t index = entries[i].first;
    double sum = 0.0;
    for (; i < entries.size() && entries[i].first == index; ++i) sum += entries[i].second;
    if (sum != 0.0) {
      out.indices.push_back(index);
      out.weights.push_back(sum);
    }
  }
  return out;
}

TfidfModel TfidfModel::fit(std::span<const TokenSeq> docs) {
  if (docs.empty()) throw ValidationError("cannot fit TF-IDF on an empty corpus");

  // Ordered map keeps column assignment independent of hashing.
  std::map<std::string, std::size_t> df;
  bool any_token = false;
  for (const auto& doc : docs) {
    std::vector<std::string_view> unique(doc.begin(), doc.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (auto term : unique) ++df[std::string(term)];
    any_token = any_token || !doc.empty();
  }
  if (!any_token) throw ValidationError("cannot fit TF-IDF: every document is empty");

  TfidfModel model;
  model.doc_count_ = docs.size();
  const double n = static_cast<double>(docs.size());
  for (const auto& [term, count] : df) {
    model.column_.emplace(term, model.terms_.size());
    model.terms_.push_back(term);
    model.idf_.push_back(std::log(n / static_cast<double>(count)));
  }
  return model;
}

std::ptrdiff_t TfidfModel::column(std::string_view term) const {
  auto it = column_.find(std::string(term));
  return it == column_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

SparseVec TfidfModel::vectorize(const TokenSeq& doc) const {
  std::map<std::size_t, std::size_t> counts;
  std::size_t max_count = 0;
  for (const auto& token : doc) {
    const auto col = column(token);
    if (col < 0) continue;
    max_count = std::max(max_count, ++counts[static_cast<std::size_t>(col)]);
  }
  SparseVec out;
  for (const auto& [col, count] : counts) {
    const double weight = static_cast<double>(count) / static_cast<double>(max_count) * idf_[col];
    if (weight == 0.0) continue;
    out.indices.push_back(col);
    out.weights.push_back(weight);
  }
  return out;
}

std::string TfidfModel::to_json() const {
  nlohmann::ordered_json j;
  j["doc_count"] = doc_count_;
  j["vocab"] = terms_;
  j["idf"] = idf_;
  return j.dump();
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::cosine: return "cosine";
    case Metric::euclidean: return "euclidean";
    case Metric::manhattan: return "manhattan";
    case Metric::chebyshev: return "chebyshev";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  for (Metric m : {Metric::cosine, Metric::euclidean, Metric::manhattan, Metric::chebyshev}) {
    if (name == to_string(m)) return m;
  }
  throw ValidationError("unknown metric '" + std::string(name) + "' (cosine, euclidean, manhattan, chebyshev)");
}

DistanceResult distance(const SparseVec& u, const SparseVec& v, Metric metric) {
  double dot = 0.0, uu = 0.0, vv = 0.0;
  double sq = 0.0, abs_sum = 0.0, max_abs = 0.0;
  auto diff = [&](double d) {
    const double a = std::fabs(d);
    sq += d * d;
    abs_sum += a;
    max_abs = std::max(max_abs, a);
  };

  std::size_t i = 0, j = 0;
  while (i < u.indices.size() || j < v.indices.size()) {
    if (j == v.indices.size() || (i < u.indices.size() && u.indices[i] < v.indices[j])) {
      uu += u.weights[i] * u.weights[i];
      diff(u.weights[i]);
      ++i;
    } else if (i == u.indices.size() || v.indices[j] < u.indices[i]) {
      vv += v.weights[j] * v.weights[j];
      diff(v.weights[j]);
      ++j;
    } else {
      dot += u.weights[i] * v.weights[j];
      uu += u.weights[i] * u.weights[i];
      vv += v.weights[j] * v.weights[j];
      diff(u.weights[i] - v.weights[j]);
      ++i;
      ++j;
    }
  }

  switch (metric) {
    case Metric::cosine: {
      if (uu == 0.0 || vv == 0.0) return {0.0, true};
      return {std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0), false};
    }
    case Metric::euclidean: return {std::sqrt(sq), false};
    case Metric::manhattan: return {abs_sum, false};
    case Metric::chebyshev: return {max_abs, false};
  }
  return {};
}

double distance_to_score(Metric metric, double value) { return metric == Metric::cosine ? value : -value; }

}  // namespace tader
