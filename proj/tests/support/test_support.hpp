#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "tader/corpus.hpp"
#include "tader/embeddings.hpp"
#include "tader/rng.hpp"

namespace tader::test {

/// Directory removed with its contents on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() / fmt::format("tader-test-{}-{}", stamp, counter++);
    std::filesystem::create_directories(path_);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Timestamp day(double d) {
  return Timestamp{std::chrono::seconds(1577836800 + static_cast<std::int64_t>(d * 86400.0))};
}

inline Issue issue(std::string key, double created_day, std::string title = {}, std::vector<std::string> links = {}) {
  Issue i;
  i.key = std::move(key);
  i.title = std::move(title);
  i.created = day(created_day);
  i.updated = i.created;
  i.links = std::move(links);
  return i;
}

/// Consonant-only word: the stemmer leaves it alone and it is no stop word.
inline std::string inert_word(Rng& rng, std::size_t len = 6) {
  static constexpr char kLetters[] = "bcdfghjklmnpqrtvxz";
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += kLetters[rng.below(sizeof(kLetters) - 1)];
  return w;
}

/// Issues with random text from a small vocabulary, random creation days and
/// random links. Keys are "R-<n>".
inline IssueSet random_issues(std::size_t n, std::uint64_t seed, double link_prob = 0.05, std::size_t vocab = 20) {
  Rng rng(seed);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < vocab; ++i) words.push_back(inert_word(rng, 5));
  std::vector<Issue> issues;
  for (std::size_t i = 0; i < n; ++i) {
    Issue x = issue(fmt::format("R-{}", i), static_cast<double>(rng.below(200)) + rng.uniform());
    for (std::size_t w = 0, len = 1 + rng.below(6); w < len; ++w) x.title += words[rng.below(vocab)] + " ";
    for (std::size_t w = 0, len = rng.below(8); w < len; ++w) x.description += words[rng.below(vocab)] + " ";
    x.summary = x.title;
    x.updated = x.created + std::chrono::seconds(static_cast<std::int64_t>(rng.below(40 * 86400)));
    issues.push_back(std::move(x));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() < link_prob) issues[i].links.push_back(issues[j].key);
    }
  }
  return IssueSet::build(std::move(issues));
}

/// Linked pairs that share a private vocabulary, plus shared noise words.
struct SeparableCorpus {
  IssueSet issues;
  EmbeddingTable table;
  std::size_t pairs = 0;
};

inline SeparableCorpus separable_corpus(std::size_t pairs, std::size_t dim, std::uint64_t seed,
                                        std::size_t private_vocab = 10, std::size_t noise_vocab = 40) {
  Rng rng(seed);
  SeparableCorpus out{{}, EmbeddingTable(dim), pairs};
  std::vector<double> v(dim);
  auto add_word = [&](const std::string& w) {
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    out.table.set(w, v);
  };
  std::vector<std::string> noise;
  for (std::size_t i = 0; i < noise_vocab; ++i) {
    noise.push_back(inert_word(rng, 7));
    add_word(noise.back());
  }
  std::vector<Issue> issues;
  for (std::size_t p = 0; p < pairs; ++p) {
    std::vector<std::string> vocab;
    for (std::size_t i = 0; i < private_vocab; ++i) {
      vocab.push_back(inert_word(rng, 6));
      add_word(vocab.back());
    }
    auto text = [&] {
      std::string t;
      for (int i = 0; i < 6; ++i) t += vocab[rng.below(vocab.size())] + " ";
      for (int i = 0; i < 2; ++i) t += noise[rng.below(noise.size())] + " ";
      return t;
    };
    const std::string a = fmt::format("P-{}-A", p);
    const std::string b = fmt::format("P-{}-B", p);
    Issue first = issue(a, 2.0 * static_cast<double>(p), text(), {b});
    Issue second = issue(b, 2.0 * static_cast<double>(p) + 1.0, text());
    first.description = text();
    second.description = text();
    issues.push_back(std::move(first));
    issues.push_back(std::move(second));
  }
  out.issues = IssueSet::build(std::move(issues));
  return out;
}

/// Writes `table` as whitespace-separated "word v1 v2 ..." lines.
inline std::filesystem::path write_vectors(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  for (std::size_t id = 0; id < table.size(); ++id) {
    out << table.tokens()[id];
    for (float x : table.row(*table.id(table.tokens()[id]))) out << ' ' << fmt::format("{}", x);
    out << '\n';
  }
  return path;
}

}  // namespace tader::test
