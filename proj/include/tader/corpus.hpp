#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tader {

using Timestamp = std::chrono::sys_seconds;

inline constexpr double kSecondsPerDay = 86400.0;

/// Parses ISO-8601 such as "2012-03-01T10:20:30.000+0000", "2012-03-01 10:20:30Z"
/// or "2012-03-01T10:20:30+05:30". Fractional seconds are truncated; a missing
/// zone is read as UTC. Throws ParseError.
Timestamp parse_timestamp(std::string_view text);

/// "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp t);

struct Issue {
  std::string key;
  std::string title;
  std::string description;
  std::string summary;
  Timestamp created{};
  Timestamp updated{};
  /// Keys of linked issues, sorted and unique.
  std::vector<std::string> links;
};

/// Issues ordered by (created, key) with a symmetric link graph.
///
/// Immutable once built. Subsets produced by split() keep the links that
/// point outside the subset so ground truth stays available.
class IssueSet {
 public:
  IssueSet() = default;

  /// Validates, sorts and symmetrizes. Links to unknown keys and self links
  /// are dropped and counted in dangling_links().
  static IssueSet build(std::vector<Issue> issues);

  std::span<const Issue> issues() const { return issues_; }
  std::size_t size() const { return issues_.size(); }
  bool empty() const { return issues_.empty(); }
  const Issue& operator[](std::size_t i) const { return issues_[i]; }

  std::optional<std::size_t> index_of(std::string_view key) const;
  const Issue* find(std::string_view key) const;

  bool linked(std::string_view a, std::string_view b) const;

  /// Earliest created timestamp; epoch for an empty set.
  Timestamp day_zero() const { return day_zero_; }

  /// Undirected edges with both ends inside this set.
  std::size_t link_count() const;

  std::size_t dangling_links() const { return dangling_links_; }

  /// Issues satisfying `keep`, links untouched.
  IssueSet subset(const std::function<bool(const Issue&)>& keep) const;

 private:
  void reindex();

  std::vector<Issue> issues_;
  std::unordered_map<std::string, std::size_t> index_;
  Timestamp day_zero_{};
  std::size_t dangling_links_ = 0;
};

/// Reads a JSON-lines export: one object per line with fields
/// key, title, description, summary, created, updated, links.
IssueSet load_issues(const std::filesystem::path& path);

/// Writes the JSON-lines format read by load_issues().
void write_issues(const IssueSet& set, const std::filesystem::path& path);

struct Split {
  IssueSet train;
  IssueSet test;
};

/// Whole days elapsed between the set's day zero and `t`, floored.
std::int64_t day_index(Timestamp day_zero, Timestamp t);

/// Issues created before day `split_day` (counted from day zero) go to train.
Split chronological_split(const IssueSet& set, std::int64_t split_day);

/// |x.created - y.created| in fractional days.
double time_gap_cc(const Issue& x, const Issue& y);

/// |x.created - y.updated| in fractional days; x is the query, y the candidate.
double time_gap_cu(const Issue& x, const Issue& y);

struct LabeledPair {
  std::string a;  ///< earlier issue
  std::string b;  ///< later issue
  int label = 0;
};

enum class NegativePool {
  all_unlinked,  ///< any pair without a link
  lonely,        ///< unlinked pairs where at least one side has no links at all
};

struct PairOptions {
  double neg_ratio = 1.0;
  std::uint64_t seed = 0;
  NegativePool pool = NegativePool::all_unlinked;
};

/// Every linked pair inside `train` (label 1) followed by a seeded uniform
/// sample of unlinked pairs (label 0). Throws Error when there are no links.
std::vector<LabeledPair> generate_training_pairs(const IssueSet& train, const PairOptions& options = {});

}  // namespace tader
