#include "tader/ranker.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "tader/error.hpp"

namespace tader {

TimeFilter TimeFilter::months(int n) {
  if (n <= 0) throw ValidationError("time filter window must be positive");
  return TimeFilter{n * kDaysPerMonth};
}

TimeFilter TimeFilter::parse(std::string_view text) {
  if (text == "none") return none();
  if (text.size() >= 2 && (text.back() == 'm' || text.back() == 'd')) {
    int n = 0;
    const auto digits = text.substr(0, text.size() - 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && n > 0) {
      return text.back() == 'm' ? months(n) : TimeFilter{n};
    }
  }
  throw ValidationError(fmt::format("unknown time filter '{}' (expected none, 1m, 2m, 3m or <n>d)", text));
}

std::string TimeFilter::name() const {
  if (!days) return "none";
  if (*days % kDaysPerMonth == 0) return fmt::format("{}m", *days / kDaysPerMonth);
  return fmt::format("{}d", *days);
}

std::vector<const Issue*> candidates(const Issue& query, const IssueSet& pool, const TimeFilter& filter) {
  std::vector<const Issue*> out;
  const auto window = filter.days ? std::chrono::seconds(std::int64_t{*filter.days} * 86400) : std::chrono::seconds(0);
  // The pool is sorted by (created, key), so walk backwards from the query.
  for (std::size_t i = pool.size(); i-- > 0;) {
    const Issue& c = pool[i];
    if (c.created >= query.created) continue;
    if (filter.days && query.created - c.created > window) break;
    if (c.key == query.key) continue;
    out.push_back(&c);
  }
  // Same-timestamp runs come out in descending key order; flip them.
  for (auto it = out.begin(); it != out.end();) {
    auto end = std::find_if(it, out.end(), [&](const Issue* c) { return c->created != (*it)->created; });
    std::reverse(it, end);
    it = end;
  }
  return out;
}

namespace {

double mean_linked_gap(const IssueSet& train, bool updated) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const Issue& later = train[i];
    for (const auto& key : later.links) {
      const auto j = train.index_of(key);
      if (!j || *j >= i) continue;
      sum += updated ? time_gap_cu(later, train[*j]) : time_gap_cc(later, train[*j]);
      ++n;
    }
  }
  const double mean = n == 0 ? 0.0 : sum / static_cast<double>(n);
  return mean > 0.0 && std::isfinite(mean) ? mean : static_cast<double>(kDaysPerMonth);
}

FeatureSet only_field(int field) {
  FeatureSet f;
  f.title = field == 0;
  f.description = field == 1;
  f.summary = field == 2;
  return f;
}

bool field_selected(const FeatureSet& f, int field) {
  return field == 0 ? f.title : field == 1 ? f.description : f.summary;
}

}  // namespace

BaselineScorer::BaselineScorer(const IssueSet& train, FeatureSet features, Metric metric, BaselineOptions options,
                               const TextPreprocessor& prep)
    : features_(features), metric_(metric), options_(options), prep_(prep) {
  if (!features.has_text()) throw ValidationError("text feature required");
  if (train.empty()) throw ValidationError("cannot fit a baseline on an empty training set");

  auto fit_block = [&](const FeatureSet& fields) {
    std::vector<TokenSeq> docs;
    docs.reserve(train.size());
    bool any = false;
    for (const Issue& issue : train.issues()) {
      docs.push_back(concat_fields(issue, fields, prep_));
      any = any || !docs.back().empty();
    }
    if (!any && options_.per_field) {
      models_.emplace_back();
      return;
    }
    models_.emplace_back(TfidfModel::fit(docs));
    text_width_ += models_.back()->vocab_size();
  };
  if (options_.per_field) {
    for (int field = 0; field < 3; ++field) {
      if (field_selected(features_, field)) fit_block(only_field(field));
    }
  } else {
    fit_block(features_);
  }

  if (features_.cc) gap_scales_.push_back(mean_linked_gap(train, false));
  if (features_.cu) gap_scales_.push_back(mean_linked_gap(train, true));
}

std::string BaselineScorer::name() const {
  return fmt::format("tfidf-{}{}", to_string(metric_), options_.per_field ? "-fields" : "");
}

SparseVec BaselineScorer::vectorize(const Issue& issue) const {
  if (!options_.per_field) return models_.front()->vectorize(concat_fields(issue, features_, prep_));
  std::vector<std::pair<std::size_t, double>> entries;
  std::size_t offset = 0;
  std::size_t block = 0;
  for (int field = 0; field < 3; ++field) {
    if (!field_selected(features_, field)) continue;
    const auto& model = models_[block++];
    if (!model) continue;
    const SparseVec v = model->vectorize(concat_fields(issue, only_field(field), prep_));
    for (std::size_t i = 0; i < v.nnz(); ++i) entries.emplace_back(offset + v.indices[i], v.weights[i]);
    offset += model->vocab_size();
  }
  return SparseVec::from_entries(std::move(entries));
}

void BaselineScorer::index(const IssueSet& pool) {
  cache_.clear();
  cache_.reserve(pool.size());
  for (const Issue& issue : pool.issues()) cache_.emplace(issue.key, vectorize(issue));
}

std::vector<double> BaselineScorer::score(const Issue& query, std::span<const Issue* const> cands) const {
  const SparseVec q = [&] {
    auto it = cache_.find(query.key);
    return it != cache_.end() ? it->second : vectorize(query);
  }();
  std::vector<double> out;
  out.reserve(cands.size());
  SparseVec fresh;
  SparseVec with_gaps;
  for (const Issue* c : cands) {
    const SparseVec* v = nullptr;
    if (auto it = cache_.find(c->key); it != cache_.end()) {
      v = &it->second;
    } else {
      fresh = vectorize(*c);
      v = &fresh;
    }
    if (features_.scalar_count() > 0) {
      with_gaps = *v;
      const std::vector<double> gaps = pair_scalars(features_, query, *c);
      for (std::size_t g = 0; g < gaps.size(); ++g) {
        const double coord = gaps[g] / gap_scales_[g];
        if (coord != 0.0) {
          with_gaps.indices.push_back(text_width_ + g);
          with_gaps.weights.push_back(coord);
        }
      }
      v = &with_gaps;
    }
    out.push_back(distance_to_score(metric_, distance(q, *v, metric_).value));
  }
  return out;
}

SiameseScorer::SiameseScorer(const SiameseModel& model, const EmbeddingTable& table, const TextPreprocessor& prep)
    : model_(&model), encoder_(table, model.config().features, model.config().max_len, prep) {
  if (table.dim() != model.embedding_dim()) {
    throw ValidationError(fmt::format("embedding dimension {} does not match the model ({})", table.dim(),
                                      model.embedding_dim()));
  }
}

std::string SiameseScorer::name() const { return fmt::format("siamese-{}", to_string(model_->config().encoder)); }

SiameseModel::Projection SiameseScorer::projection(const Issue& issue) const {
  return model_->project(encoder_.encode(issue));
}

void SiameseScorer::index(const IssueSet& pool) {
  cache_.clear();
  cache_.reserve(pool.size());
  for (const Issue& issue : pool.issues()) cache_.emplace(issue.key, projection(issue));
}

std::vector<double> SiameseScorer::score(const Issue& query, std::span<const Issue* const> cands) const {
  const FeatureSet& features = model_->config().features;
  const auto q = [&] {
    auto it = cache_.find(query.key);
    return it != cache_.end() ? it->second : projection(query);
  }();
  std::vector<double> out;
  out.reserve(cands.size());
  SiameseModel::Projection fresh;
  for (const Issue* c : cands) {
    const SiameseModel::Projection* p = nullptr;
    if (auto it = cache_.find(c->key); it != cache_.end()) {
      p = &it->second;
    } else {
      fresh = projection(*c);
      p = &fresh;
    }
    out.push_back(model_->probabilities(q, *p, pair_scalars(features, query, *c))[1]);
  }
  return out;
}

std::vector<Recommendation> recommend(const Issue& query, const IssueSet& pool, const Scorer& scorer,
                                      const TimeFilter& filter, std::size_t k) {
  if (k == 0) throw ValidationError("K must be at least 1");
  const auto cands = candidates(query, pool, filter);
  const auto scores = scorer.score(query, cands);
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = std::isnan(scores[a]) ? -INFINITY : scores[a];
    const double sb = std::isnan(scores[b]) ? -INFINITY : scores[b];
    if (sa != sb) return sa > sb;
    if (cands[a]->created != cands[b]->created) return cands[a]->created > cands[b]->created;
    return cands[a]->key < cands[b]->key;
  };
  const std::size_t n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), better);
  std::vector<Recommendation> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) out.push_back({cands[order[r]]->key, scores[order[r]], r + 1});
  return out;
}

std::string to_json(std::span<const Recommendation> recs) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : recs) {
    nlohmann::ordered_json j;
    j["key"] = r.key;
    j["score"] = r.score;
    j["rank"] = r.rank;
    arr.push_back(std::move(j));
  }
  return arr.dump();
}

}  // namespace tader
