#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "tader/textprep.hpp"

namespace tader {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Token -> dense vector map. Rows 0 and 1 are the padding and
/// out-of-vocabulary vectors; both are exactly zero.
class EmbeddingTable {
 public:
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kOovId = 1;

  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const { return dim_; }
  /// Number of real tokens (excluding pad and oov).
  std::size_t size() const { return tokens_.size(); }

  /// Adds or overwrites a token. Throws ValidationError on a wrong length or
  /// non-finite component.
  void set(const std::string& token, std::span<const double> values);

  std::optional<std::size_t> id(std::string_view token) const;
  bool contains(std::string_view token) const { return id(token).has_value(); }
  std::span<const float> row(std::size_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Non-fatal problems found while loading (duplicate tokens).
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string message) { warnings_.push_back(std::move(message)); }

 private:
  std::size_t dim_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<float> rows_;
  std::vector<std::string> warnings_;
};

struct VectorLoadOptions {
  /// Stem file tokens the same way TextPreprocessor does so lookups line up.
  /// When several surface forms share a stem the first one in the file wins.
  bool stem_vocab = true;
  /// When set, tokens (after stemming) outside this set are skipped.
  const std::unordered_set<std::string>* keep = nullptr;
};

/// Reads the word-vector text format: optional "count dim" header, then
/// "token v1 ... v_dim" per line. A repeated token overwrites the earlier
/// one and records a warning. Throws ParseError naming the line on a
/// dimension mismatch.
EmbeddingTable load_vectors(const std::filesystem::path& path, std::size_t dim, const VectorLoadOptions& options = {});

/// Fixed-length matrix view of a token sequence.
struct EncodedSeq {
  Matrix matrix;               ///< max_len x dim
  std::size_t true_len = 0;    ///< rows filled from tokens
  std::size_t oov_count = 0;   ///< tokens replaced by the oov vector
};

/// Keeps the first `max_len` tokens; unknown tokens map to the oov vector and
/// the tail is padded with zeros.
EncodedSeq encode(const TokenSeq& tokens, const EmbeddingTable& table, std::size_t max_len);

}  // namespace tader
