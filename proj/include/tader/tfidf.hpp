#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tader/textprep.hpp"

namespace tader {

/// Sparse vector with strictly increasing indices and no stored zeros.
struct SparseVec {
  std::vector<std::size_t> indices;
  std::vector<double> weights;

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  /// Weight at `index`, 0 when absent.
  double at(std::size_t index) const;

  /// Builds from (index, weight) entries in any order; zeros are dropped and
  /// repeated indices summed.
  static SparseVec from_entries(std::vector<std::pair<std::size_t, double>> entries);
};

/// Vocabulary and inverse document frequencies fitted on a corpus.
///
/// idf(w) = ln(|D| / df(w)); tf(w, d) = f(w, d) / max_w' f(w', d).
class TfidfModel {
 public:
  /// Throws ValidationError if `docs` is empty or every document is empty.
  static TfidfModel fit(std::span<const TokenSeq> docs);

  /// Out-of-vocabulary tokens are ignored.
  SparseVec vectorize(const TokenSeq& doc) const;

  std::size_t vocab_size() const { return terms_.size(); }
  std::size_t doc_count() const { return doc_count_; }
  /// Column of `term`, or -1 when out of vocabulary.
  std::ptrdiff_t column(std::string_view term) const;
  double idf(std::size_t column) const { return idf_[column]; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<double>& idf_values() const { return idf_; }

  /// Diagnostic dump: {"doc_count": n, "vocab": [...], "idf": [...]}.
  std::string to_json() const;

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> column_;
  std::vector<double> idf_;
  std::size_t doc_count_ = 0;
};

enum class Metric { cosine, euclidean, manhattan, chebyshev };

std::string_view to_string(Metric m);
Metric parse_metric(std::string_view name);

struct DistanceResult {
  double value = 0.0;
  /// Cosine involving a zero vector; value is reported as 0.
  bool degenerate = false;
};

/// Cosine similarity, or one of the three distances.
DistanceResult distance(const SparseVec& u, const SparseVec& v, Metric metric);

/// Higher-is-better score: similarity for cosine, negated distance otherwise.
double distance_to_score(Metric metric, double value);

}  // namespace tader
