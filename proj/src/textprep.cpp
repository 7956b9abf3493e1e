#include "tader/textprep.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "tader/corpus.hpp"
#include "tader/error.hpp"

namespace tader {

extern const char* const kEnglishStopWords;

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_url_token(std::string_view token) {
  std::size_t start = 0;
  while (start < token.size() && !std::isalnum(static_cast<unsigned char>(token[start]))) ++start;
  const std::string_view rest = token.substr(start);
  return rest.starts_with("http") || rest.starts_with("www");
}

// Stop words with inner punctuation ("e.g", "i.e") would be split apart by
// the punctuation pass, so they are matched on the raw token instead.
bool is_dotted_stop_word(std::string_view token, const StopWords& stop) {
  std::size_t start = 0;
  std::size_t end = token.size();
  while (start < end && !std::isalnum(static_cast<unsigned char>(token[start]))) ++start;
  while (end > start && !std::isalnum(static_cast<unsigned char>(token[end - 1]))) --end;
  const std::string_view core = token.substr(start, end - start);
  if (core.find_first_not_of("abcdefghijklmnopqrstuvwxyz") == std::string_view::npos) return false;
  return stop.contains(core);
}

// Lowercase and blank out every <...> span.
std::string lower_without_tags(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (c == '<') {
      const std::size_t close = raw.find('>', i + 1);
      if (close != std::string_view::npos) {
        out += ' ';
        i = close;
        continue;
      }
    }
    out += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  }
  return out;
}

template <typename Fn>
void for_each_word(std::string_view text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) fn(text.substr(start, i - start));
  }
}

}  // namespace

const StopWords& StopWords::english() {
  static const StopWords words = parse(kEnglishStopWords);
  return words;
}

StopWords StopWords::parse(std::string_view text) {
  StopWords out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (!line.empty()) out.words_.emplace(line);
    pos = end + 1;
  }
  return out;
}

StopWords StopWords::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open stop-word list {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string TextPreprocessor::stem(std::string_view word) {
  std::string current(word);
  for (int guard = 0; guard < 16; ++guard) {
    std::string next = porter_stem(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

TokenSeq TextPreprocessor::operator()(std::string_view raw) const {
  const std::string lowered = lower_without_tags(raw);

  std::string letters;
  letters.reserve(lowered.size());
  for_each_word(lowered, [&](std::string_view token) {
    if (is_url_token(token) || is_dotted_stop_word(token, *stop_words_)) return;
    for (char c : token) letters += (c >= 'a' && c <= 'z') ? c : ' ';
    letters += ' ';
  });

  TokenSeq tokens;
  for_each_word(letters, [&](std::string_view word) {
    if (stop_words_->contains(word) || is_url_token(word)) return;
    std::string stemmed = stem(word);
    if (stemmed.empty() || stop_words_->contains(stemmed)) return;
    tokens.push_back(std::move(stemmed));
  });
  return tokens;
}

TokenSeq preprocess(std::string_view raw) { return TextPreprocessor{}(raw); }

TokenSeq concat_fields(const Issue& issue, const FeatureSet& features, const TextPreprocessor& prep) {
  if (!features.has_text()) throw ValidationError("text feature required");
  TokenSeq out;
  auto append = [&](const std::string& text) {
    TokenSeq part = prep(text);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  };
  if (features.title) append(issue.title);
  if (features.description) append(issue.description);
  if (features.summary) append(issue.summary);
  return out;
}

}  // namespace tader
