#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tader/corpus.hpp"
#include "tader/embeddings.hpp"
#include "tader/encoder.hpp"
#include "tader/error.hpp"
#include "tader/features.hpp"
#include "tader/nn.hpp"
#include "tader/textprep.hpp"

namespace tader {

struct SiameseConfig {
  EncoderKind encoder = EncoderKind::cnn;
  std::size_t units = 256;  ///< conv filters or recurrent hidden size
  std::size_t kernel_size = 3;
  std::size_t stride = 1;
  std::size_t dense_units = 256;
  Activation activation = Activation::relu;
  std::size_t max_len = 128;
  double learning_rate = 0.001;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  /// Textual fields fed to the encoder plus the CC/CU scalars fed to the head.
  FeatureSet features{true, true, true, false, false};

  /// Throws ValidationError.
  void validate() const;
};

/// z-score statistics for the CC/CU scalars, fitted on training pairs.
struct ScalarNorm {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Twin shared-weight encoder, merge [u; v; |u - v|], dense layer, 2-way softmax.
///
/// The u and v blocks of the dense layer share one weight matrix, which makes
/// the score symmetric in its two inputs whenever the scalars are. CC/CU
/// scalars (z-scored) are appended to the dense output before the softmax head.
class SiameseModel {
 public:
  SiameseModel(const SiameseConfig& config, std::size_t embedding_dim);
  SiameseModel(const SiameseModel& other);
  SiameseModel& operator=(const SiameseModel& other);
  SiameseModel(SiameseModel&&) noexcept = default;
  SiameseModel& operator=(SiameseModel&&) noexcept = default;
  ~SiameseModel() = default;

  const SiameseConfig& config() const { return config_; }
  std::size_t embedding_dim() const { return embedding_dim_; }
  std::size_t scalar_count() const { return config_.features.scalar_count(); }
  const Encoder& encoder() const { return *encoder_; }

  /// Encoder features plus their (shared) dense projection; lets a query be
  /// matched against many candidates without re-running the encoder.
  struct Projection {
    Vector features;
    Vector pair_term;
  };
  Projection project(const EncodedSeq& x) const;
  Projection project(Vector features) const;

  /// (P(unlinked), P(linked)). `raw_scalars` are CC/CU gaps in days, in that
  /// order, and must match the configured features exactly.
  Eigen::Vector2d probabilities(const Projection& a, const Projection& b, std::span<const double> raw_scalars) const;

  /// P(linked) for a pair of encoded issues.
  double forward(const EncodedSeq& a, const EncodedSeq& b, std::span<const double> raw_scalars = {}) const;

  const ScalarNorm& scalar_norm() const { return norm_; }
  void set_scalar_norm(ScalarNorm norm);

  /// Encoder parameters first, then dense and output layers.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  void zero_weights();

  /// Internal pieces used by the training code.
  struct HeadTape {
    Vector diff_sign;
    Vector diff;
    Vector pre;
    Vector hidden_in;  ///< [activation(pre); normalized scalars]
    Eigen::Vector2d probs;
  };
  Eigen::Vector2d head_forward(const Projection& a, const Projection& b, std::span<const double> raw_scalars,
                               HeadTape* tape) const;
  /// Adds head gradients for dL/dprobs to `grads` (head tensors only) and
  /// returns dL/du_a and dL/du_b.
  std::pair<Vector, Vector> head_backward(const HeadTape& tape, const Projection& a, const Projection& b,
                                          const Eigen::Vector2d& d_probs, std::span<Tensor> head_grads) const;
  std::size_t encoder_param_count() const { return encoder_->params().size(); }

 private:
  std::vector<double> normalize(std::span<const double> raw_scalars) const;

  SiameseConfig config_;
  std::size_t embedding_dim_;
  std::unique_ptr<Encoder> encoder_;
  // dense.pair_weight, dense.diff_weight, dense.bias, output.weight, output.bias
  std::vector<Tensor> head_;
  ScalarNorm norm_;
};

/// CC then CU gaps (days) for the features enabled in `features`.
std::vector<double> pair_scalars(const FeatureSet& features, const Issue& query, const Issue& candidate);

/// Preprocesses and encodes the selected text fields of an issue.
class IssueEncoder {
 public:
  IssueEncoder(const EmbeddingTable& table, FeatureSet features, std::size_t max_len,
               const TextPreprocessor& prep = TextPreprocessor{});

  TokenSeq tokens(const Issue& issue) const { return concat_fields(issue, features_, prep_); }
  EncodedSeq encode(const Issue& issue) const { return encode_tokens(tokens(issue)); }
  EncodedSeq encode_tokens(const TokenSeq& tokens) const { return tader::encode(tokens, *table_, max_len_); }

  const FeatureSet& features() const { return features_; }
  const EmbeddingTable& table() const { return *table_; }
  std::size_t max_len() const { return max_len_; }

 private:
  const EmbeddingTable* table_;
  FeatureSet features_;
  std::size_t max_len_;
  TextPreprocessor prep_;
};

/// One training example addressed by issue slots of an EncodedLookup.
struct PairExample {
  std::size_t query = 0;
  std::size_t candidate = 0;
  std::vector<double> raw_scalars;
  int label = 0;
};

using EncodedLookup = std::function<EncodedSeq(std::size_t)>;

struct GradientResult {
  double loss = 0.0;  ///< mean MSE over the examples
  std::vector<Tensor> grads;  ///< aligned with SiameseModel::parameters()
};

/// Mean MSE between the softmax output and the one-hot label, with its
/// analytic gradient.
GradientResult compute_gradients(const SiameseModel& model, std::span<const PairExample> examples,
                                 const EncodedLookup& lookup);
double compute_loss(const SiameseModel& model, std::span<const PairExample> examples, const EncodedLookup& lookup);

/// Raised when the loss or a weight stops being finite.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct TrainResult {
  SiameseModel model;
  std::vector<double> epoch_loss;
};

/// Mini-batch gradient descent on MSE, shuffled every epoch with the
/// configured seed. Scalar normalization is fitted on `pairs` first.
/// Throws ValidationError for unknown keys, TrainingDiverged on divergence.
TrainResult train(SiameseModel model, std::span<const LabeledPair> pairs, const IssueSet& corpus,
                  const IssueEncoder& encoder);

struct PairSample {
  EncodedSeq query;
  EncodedSeq candidate;
  std::vector<double> raw_scalars;
  int label = 0;
};

/// Largest relative error, over weight groups, between the analytic gradient
/// and central finite differences: |g - g_fd| / max(|g|, |g_fd|) in L2 norm
/// (absolute error when both norms are below 1e-10).
double gradient_check(const SiameseModel& model, std::span<const PairSample> sample, double epsilon);

/// JSON checkpoint with config, scalar statistics and every tensor in
/// row-major order. Doubles are written in shortest round-trip form, so
/// load(save(m)) is bit-identical.
std::string checkpoint_json(const SiameseModel& model, const std::map<std::string, std::string>& metadata = {});
SiameseModel model_from_checkpoint_json(std::string_view text, std::map<std::string, std::string>* metadata = nullptr);
void save_checkpoint(const SiameseModel& model, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata = {});
SiameseModel load_checkpoint(const std::filesystem::path& path, std::map<std::string, std::string>* metadata = nullptr);

}  // namespace tader
