#include "tader/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "tader/error.hpp"

namespace tader {

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim), rows_(2 * dim, 0.0F) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingTable::set(const std::string& token, std::span<const double> values) {
  if (values.size() != dim_) {
    throw ValidationError(fmt::format("vector for '{}' has {} components, expected {}", token, values.size(), dim_));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError(fmt::format("non-finite component in vector for '{}'", token));
  }
  auto [it, inserted] = ids_.try_emplace(token, tokens_.size() + 2);
  if (inserted) {
    tokens_.push_back(token);
    rows_.resize(rows_.size() + dim_);
  }
  float* dest = rows_.data() + it->second * dim_;
  for (std::size_t i = 0; i < dim_; ++i) dest[i] = static_cast<float>(values[i]);
}

std::optional<std::size_t> EmbeddingTable::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingTable::row(std::size_t id) const {
  return std::span<const float>(rows_).subspan(id * dim_, dim_);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

EmbeddingTable load_vectors(const std::filesystem::path& path, std::size_t dim, const VectorLoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open vector file {}", path.string()));

  EmbeddingTable table(dim);
  std::unordered_set<std::string> raw_seen;
  std::unordered_map<std::string, std::string> stem_owner;
  std::vector<double> values(dim);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      std::size_t count = 0, header_dim = 0;
      if (parse_number(fields[0], count) && parse_number(fields[1], header_dim)) {
        if (header_dim != dim) {
          throw ParseError(fmt::format("{}:1: header declares dimension {}, expected {}", path.string(), header_dim, dim));
        }
        continue;
      }
    }
    if (fields.size() != dim + 1) {
      throw ParseError(fmt::format("{}:{}: expected {} components, found {}", path.string(), line_no, dim,
                                   fields.size() - 1));
    }
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_number(fields[i + 1], values[i]) || !std::isfinite(values[i])) {
        throw ParseError(fmt::format("{}:{}: bad component '{}'", path.string(), line_no, fields[i + 1]));
      }
    }

    std::string raw(fields[0]);
    const bool repeated = !raw_seen.insert(raw).second;
    std::string token = options.stem_vocab ? TextPreprocessor::stem(raw) : raw;
    if (token.empty()) continue;
    if (options.keep != nullptr && !options.keep->contains(token)) continue;
    if (options.stem_vocab) {
      auto [owner, fresh] = stem_owner.try_emplace(token, raw);
      if (!fresh && owner->second != raw) continue;
    }
    if (repeated) {
      table.add_warning(fmt::format("{}:{}: duplicate token '{}', keeping the last vector", path.string(), line_no, raw));
    }
    table.set(token, values);
  }
  return table;
}

EncodedSeq encode(const TokenSeq& tokens, const EmbeddingTable& table, std::size_t max_len) {
  EncodedSeq out;
  out.matrix = Matrix::Zero(static_cast<Eigen::Index>(max_len), static_cast<Eigen::Index>(table.dim()));
  out.true_len = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < out.true_len; ++i) {
    const auto id = table.id(tokens[i]);
    if (!id) {
      ++out.oov_count;
      continue;
    }
    const auto row = table.row(*id);
    for (std::size_t d = 0; d < table.dim(); ++d) {
      out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = static_cast<double>(row[d]);
    }
  }
  return out;
}

}  // namespace tader
