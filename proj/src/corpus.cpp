#include "tader/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "tader/error.hpp"
#include "tader/rng.hpp"

namespace tader {

namespace {

using std::chrono::days;
using std::chrono::hours;
using std::chrono::minutes;
using std::chrono::seconds;

int read_digits(std::string_view text, std::size_t& pos, std::size_t count) {
  if (pos + count > text.size()) throw ParseError(fmt::format("truncated timestamp '{}'", text));
  int value = 0;
  const auto* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + count, value);
  if (ec != std::errc{} || ptr != first + count) throw ParseError(fmt::format("bad digits in timestamp '{}'", text));
  pos += count;
  return value;
}

void expect(std::string_view text, std::size_t& pos, char c) {
  if (pos >= text.size() || text[pos] != c) throw ParseError(fmt::format("expected '{}' in timestamp '{}'", c, text));
  ++pos;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  std::size_t pos = 0;
  const int year = read_digits(text, pos, 4);
  expect(text, pos, '-');
  const int month = read_digits(text, pos, 2);
  expect(text, pos, '-');
  const int day = read_digits(text, pos, 2);

  int hour = 0, minute = 0, second = 0;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
    ++pos;
    hour = read_digits(text, pos, 2);
    expect(text, pos, ':');
    minute = read_digits(text, pos, 2);
    if (pos < text.size() && text[pos] == ':') {
      ++pos;
      second = read_digits(text, pos, 2);
    }
    if (pos < text.size() && (text[pos] == '.' || text[pos] == ',')) {
      ++pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    }
  }

  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
    throw ParseError(fmt::format("invalid date in timestamp '{}'", text));
  }

  seconds offset{0};
  if (pos < text.size()) {
    const char sign = text[pos];
    if (sign == 'Z' || sign == 'z') {
      ++pos;
    } else if (sign == '+' || sign == '-') {
      ++pos;
      const int oh = read_digits(text, pos, 2);
      int om = 0;
      if (pos < text.size() && text[pos] == ':') ++pos;
      if (pos < text.size()) om = read_digits(text, pos, 2);
      offset = hours{oh} + minutes{om};
      if (sign == '-') offset = -offset;
    }
    if (pos != text.size()) throw ParseError(fmt::format("trailing characters in timestamp '{}'", text));
  }

  const auto local = std::chrono::sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second};
  return std::chrono::time_point_cast<seconds>(local - offset);
}

std::string format_timestamp(Timestamp t) {
  const auto day_point = std::chrono::floor<days>(t);
  const std::chrono::year_month_day ymd{day_point};
  const std::chrono::hh_mm_ss hms{t - day_point};
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                     hms.minutes().count(), hms.seconds().count());
}

IssueSet IssueSet::build(std::vector<Issue> issues) {
  IssueSet set;
  set.issues_ = std::move(issues);
  std::sort(set.issues_.begin(), set.issues_.end(), [](const Issue& a, const Issue& b) {
    return a.created != b.created ? a.created < b.created : a.key < b.key;
  });

  for (std::size_t i = 0; i < set.issues_.size(); ++i) {
    const Issue& issue = set.issues_[i];
    if (issue.key.empty()) throw ValidationError("issue with empty key");
    if (issue.updated < issue.created) throw ValidationError(fmt::format("issue {} updated before it was created", issue.key));
    if (!set.index_.emplace(issue.key, i).second) throw ValidationError(fmt::format("duplicate issue key {}", issue.key));
  }

  // Union of directed mentions.
  std::vector<std::set<std::string>> adjacency(set.issues_.size());
  for (std::size_t i = 0; i < set.issues_.size(); ++i) {
    for (const auto& target : set.issues_[i].links) {
      auto it = set.index_.find(target);
      if (it == set.index_.end() || it->second == i) {
        ++set.dangling_links_;
        continue;
      }
      adjacency[i].insert(target);
      adjacency[it->second].insert(set.issues_[i].key);
    }
  }
  for (std::size_t i = 0; i < set.issues_.size(); ++i) {
    set.issues_[i].links.assign(adjacency[i].begin(), adjacency[i].end());
  }
  set.day_zero_ = set.issues_.empty() ? Timestamp{} : set.issues_.front().created;
  return set;
}

void IssueSet::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < issues_.size(); ++i) index_.emplace(issues_[i].key, i);
  day_zero_ = issues_.empty() ? Timestamp{} : issues_.front().created;
}

std::optional<std::size_t> IssueSet::index_of(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Issue* IssueSet::find(std::string_view key) const {
  auto idx = index_of(key);
  return idx ? &issues_[*idx] : nullptr;
}

bool IssueSet::linked(std::string_view a, std::string_view b) const {
  const Issue* issue = find(a);
  if (issue == nullptr) return false;
  return std::binary_search(issue->links.begin(), issue->links.end(), b);
}

std::size_t IssueSet::link_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < issues_.size(); ++i) {
    for (const auto& target : issues_[i].links) {
      auto j = index_of(target);
      if (j && *j > i) ++count;
    }
  }
  return count;
}

IssueSet IssueSet::subset(const std::function<bool(const Issue&)>& keep) const {
  IssueSet out;
  for (const auto& issue : issues_) {
    if (keep(issue)) out.issues_.push_back(issue);
  }
  out.reindex();
  return out;
}

IssueSet load_issues(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open {}", path.string()));

  std::vector<Issue> issues;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto record = nlohmann::json::parse(line);
      if (!record.is_object()) throw ParseError("record is not an object");
      auto text_field = [&](const char* name) -> std::string {
        auto it = record.find(name);
        if (it == record.end() || it->is_null()) return {};
        if (!it->is_string()) throw ParseError(fmt::format("field '{}' is not a string", name));
        return it->get<std::string>();
      };
      for (const char* required : {"key", "title", "created"}) {
        if (!record.contains(required) || record[required].is_null()) {
          throw ParseError(fmt::format("missing field '{}'", required));
        }
      }
      Issue issue;
      issue.key = text_field("key");
      issue.title = text_field("title");
      issue.description = text_field("description");
      issue.summary = text_field("summary");
      issue.created = parse_timestamp(text_field("created"));
      const std::string updated = text_field("updated");
      issue.updated = updated.empty() ? issue.created : parse_timestamp(updated);
      if (auto it = record.find("links"); it != record.end() && !it->is_null()) {
        if (!it->is_array()) throw ParseError("field 'links' is not an array");
        for (const auto& link : *it) {
          if (!link.is_string()) throw ParseError("link entry is not a string");
          issue.links.push_back(link.get<std::string>());
        }
      }
      if (issue.key.empty()) throw ParseError("empty key");
      if (!seen.insert(issue.key).second) {
        throw ParseError(fmt::format("duplicate key {}", issue.key));
      }
      issues.push_back(std::move(issue));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("{}:{}: malformed record: {}", path.string(), line_no, e.what()));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  try {
    return IssueSet::build(std::move(issues));
  } catch (const Error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_issues(const IssueSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  for (const auto& issue : set.issues()) {
    nlohmann::ordered_json record;
    record["key"] = issue.key;
    record["title"] = issue.title;
    record["description"] = issue.description;
    record["summary"] = issue.summary;
    record["created"] = format_timestamp(issue.created);
    record["updated"] = format_timestamp(issue.updated);
    record["links"] = issue.links;
    out << record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

std::int64_t day_index(Timestamp day_zero, Timestamp t) {
  return std::chrono::floor<days>(t - day_zero).count();
}

Split chronological_split(const IssueSet& set, std::int64_t split_day) {
  if (split_day < 0) throw ValidationError("split day must be non-negative");
  const Timestamp zero = set.day_zero();
  Split split;
  split.train = set.subset([&](const Issue& i) { return day_index(zero, i.created) < split_day; });
  split.test = set.subset([&](const Issue& i) { return day_index(zero, i.created) >= split_day; });
  return split;
}

double time_gap_cc(const Issue& x, const Issue& y) {
  return std::fabs(static_cast<double>((x.created - y.created).count())) / kSecondsPerDay;
}

double time_gap_cu(const Issue& x, const Issue& y) {
  return std::fabs(static_cast<double>((x.created - y.updated).count())) / kSecondsPerDay;
}

std::vector<LabeledPair> generate_training_pairs(const IssueSet& train, const PairOptions& options) {
  if (train.empty()) throw ValidationError("training split is empty");
  if (!(options.neg_ratio >= 0.0) || !std::isfinite(options.neg_ratio)) {
    throw ValidationError("neg_ratio must be a non-negative finite number");
  }

  const auto issues = train.issues();
  const std::size_t n = issues.size();
  std::vector<LabeledPair> pairs;
  std::set<std::pair<std::size_t, std::size_t>> positive_index;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& target : issues[i].links) {
      auto j = train.index_of(target);
      if (j && *j > i) {
        pairs.push_back({issues[i].key, issues[*j].key, 1});
        positive_index.emplace(i, *j);
      }
    }
  }
  const std::size_t positives = pairs.size();
  if (positives == 0) throw Error("no links in training split");

  std::vector<char> lonely(n);
  std::size_t lonely_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    lonely[i] = issues[i].links.empty() ? 1 : 0;
    lonely_count += lonely[i];
  }
  auto eligible = [&](std::size_t i, std::size_t j) {
    if (options.pool == NegativePool::lonely && !lonely[i] && !lonely[j]) return false;
    return positive_index.count({i, j}) == 0;
  };

  const auto choose2 = [](std::size_t k) -> std::size_t { return k < 2 ? 0 : k * (k - 1) / 2; };
  const std::size_t available = options.pool == NegativePool::lonely
                                    ? choose2(n) - choose2(n - lonely_count)
                                    : choose2(n) - positives;
  const auto wanted = static_cast<std::size_t>(std::llround(options.neg_ratio * static_cast<double>(positives)));
  const std::size_t count = std::min(wanted, available);

  Rng rng(options.seed);
  std::vector<std::pair<std::size_t, std::size_t>> negatives;
  negatives.reserve(count);
  constexpr std::size_t kEnumerateLimit = 1U << 21;
  if (available <= kEnumerateLimit || count * 2 >= available) {
    std::vector<std::pair<std::size_t, std::size_t>> all;
    all.reserve(available);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (eligible(i, j)) all.emplace_back(i, j);
      }
    }
    // Partial Fisher-Yates: the first `count` slots become the sample.
    for (std::size_t k = 0; k < count; ++k) {
      std::swap(all[k], all[k + rng.below(all.size() - k)]);
      negatives.push_back(all[k]);
    }
  } else {
    std::set<std::pair<std::size_t, std::size_t>> chosen;
    while (negatives.size() < count) {
      std::size_t i = rng.below(n);
      std::size_t j = rng.below(n);
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      if (!eligible(i, j) || !chosen.emplace(i, j).second) continue;
      negatives.emplace_back(i, j);
    }
  }
  for (const auto& [i, j] : negatives) pairs.push_back({issues[i].key, issues[j].key, 0});
  return pairs;
}

}  // namespace tader
