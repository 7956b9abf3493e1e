#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tader/corpus.hpp"
#include "tader/embeddings.hpp"
#include "tader/features.hpp"
#include "tader/siamese.hpp"
#include "tader/textprep.hpp"
#include "tader/tfidf.hpp"

namespace tader {

/// Candidate window measured back from the query's created date.
struct TimeFilter {
  std::optional<int> days;  ///< nullopt: no window

  static TimeFilter none() { return {}; }
  static TimeFilter months(int n);

  /// "none", "1m", "2m", "3m", or "<n>d".
  static TimeFilter parse(std::string_view text);
  std::string name() const;

  friend bool operator==(const TimeFilter&, const TimeFilter&) = default;
};

inline constexpr int kDaysPerMonth = 30;

/// Issues created strictly before `query` and, for a finite window, no more
/// than the window earlier. Newest first, ties by key.
std::vector<const Issue*> candidates(const Issue& query, const IssueSet& pool, const TimeFilter& filter);

/// Higher-is-better pair scores. Implementations are immutable once indexed
/// and safe to call concurrently.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string name() const = 0;
  virtual const FeatureSet& features() const = 0;
  /// Precomputes per-issue representations; scoring issues outside the
  /// indexed set still works, only slower.
  virtual void index(const IssueSet& pool) = 0;
  virtual std::vector<double> score(const Issue& query, std::span<const Issue* const> candidates) const = 0;
};

struct BaselineOptions {
  /// Vectorize T, D and S with separate models and concatenate the blocks
  /// instead of one model over the concatenated tokens.
  bool per_field = false;
};

/// TF-IDF vectors compared with one of the four metrics.
///
/// CC/CU enter as extra coordinates: 0 for the query and gap / scale for the
/// candidate, where scale is the mean gap over linked training pairs. Larger
/// gaps therefore lower cosine similarity and raise distances.
class BaselineScorer final : public Scorer {
 public:
  BaselineScorer(const IssueSet& train, FeatureSet features, Metric metric, BaselineOptions options = {},
                 const TextPreprocessor& prep = TextPreprocessor{});

  std::string name() const override;
  const FeatureSet& features() const override { return features_; }
  void index(const IssueSet& pool) override;
  std::vector<double> score(const Issue& query, std::span<const Issue* const> candidates) const override;

  Metric metric() const { return metric_; }
  /// Gap scales for the enabled CC then CU coordinates.
  const std::vector<double>& gap_scales() const { return gap_scales_; }
  SparseVec vectorize(const Issue& issue) const;

 private:
  FeatureSet features_;
  Metric metric_;
  BaselineOptions options_;
  TextPreprocessor prep_;
  // One joint model, or one per selected field (empty when that field never has text).
  std::vector<std::optional<TfidfModel>> models_;
  std::size_t text_width_ = 0;
  std::vector<double> gap_scales_;
  std::unordered_map<std::string, SparseVec> cache_;
};

/// Siamese model scores: P(linked) for (query, candidate).
class SiameseScorer final : public Scorer {
 public:
  SiameseScorer(const SiameseModel& model, const EmbeddingTable& table,
                const TextPreprocessor& prep = TextPreprocessor{});

  std::string name() const override;
  const FeatureSet& features() const override { return model_->config().features; }
  void index(const IssueSet& pool) override;
  std::vector<double> score(const Issue& query, std::span<const Issue* const> candidates) const override;

 private:
  SiameseModel::Projection projection(const Issue& issue) const;

  const SiameseModel* model_;
  IssueEncoder encoder_;
  std::unordered_map<std::string, SiameseModel::Projection> cache_;
};

struct Recommendation {
  std::string key;
  double score = 0.0;
  std::size_t rank = 0;  ///< 1-based
};

/// Top-`k` candidates by score; ties go to the later-created issue, then the
/// smaller key. NaN scores rank last. Throws ValidationError when k == 0.
std::vector<Recommendation> recommend(const Issue& query, const IssueSet& pool, const Scorer& scorer,
                                      const TimeFilter& filter, std::size_t k);

/// JSON array of {key, score, rank}.
std::string to_json(std::span<const Recommendation> recs);

}  // namespace tader
