#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tader/features.hpp"

namespace tader {

struct Issue;

/// Lowercase ASCII-letter stems in source order.
using TokenSeq = std::vector<std::string>;

/// Classic Porter (1980) stemmer, single pass. Expects a lowercase word.
std::string porter_stem(std::string_view word);

class StopWords {
 public:
  /// The English snapshot shipped in data/stopwords_en.txt.
  static const StopWords& english();

  /// One lowercase word per line; blank lines ignored.
  static StopWords load(const std::filesystem::path& path);
  static StopWords parse(std::string_view text);

  bool contains(std::string_view word) const { return words_.contains(std::string(word)); }
  const std::unordered_set<std::string>& words() const { return words_; }

 private:
  std::unordered_set<std::string> words_;
};

/// Lowercase, strip HTML tags and URLs, drop punctuation and digits,
/// remove stop words, stem.
class TextPreprocessor {
 public:
  TextPreprocessor() : stop_words_(&StopWords::english()) {}
  explicit TextPreprocessor(const StopWords& stop_words) : stop_words_(&stop_words) {}

  TokenSeq operator()(std::string_view raw) const;

  /// Stems until the word stops changing, so stemmed output re-stems to itself.
  static std::string stem(std::string_view word);

  const StopWords& stop_words() const { return *stop_words_; }

 private:
  const StopWords* stop_words_;
};

/// preprocess() with the shipped stop-word list.
TokenSeq preprocess(std::string_view raw);

/// Title, description and summary tokens (only the selected ones) in that order.
/// Throws ValidationError when no textual feature is selected.
TokenSeq concat_fields(const Issue& issue, const FeatureSet& features,
                       const TextPreprocessor& prep = TextPreprocessor{});

}  // namespace tader
