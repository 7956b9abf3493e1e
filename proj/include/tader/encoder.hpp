#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tader/embeddings.hpp"
#include "tader/nn.hpp"
#include "tader/rng.hpp"

namespace tader {

enum class EncoderKind { cnn, gru, lstm };

std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view name);

/// Kinds compiled into this build; cnn is always present.
std::vector<EncoderKind> available_encoders();

struct EncoderSpec {
  std::size_t input_dim = 100;
  /// Filters for cnn, hidden size for gru/lstm.
  std::size_t units = 256;
  std::size_t kernel_size = 3;
  std::size_t stride = 1;
};

/// Per-call state kept by an encoder for its backward pass.
class EncoderTape {
 public:
  virtual ~EncoderTape() = default;
};

/// Maps an EncodedSeq to a fixed-length feature vector.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual EncoderKind kind() const = 0;
  virtual const EncoderSpec& spec() const = 0;
  virtual std::size_t output_dim() const = 0;

  virtual Vector forward(const EncodedSeq& x) const = 0;
  /// Same result as forward(x); also fills `tape` for backward().
  virtual Vector forward(const EncodedSeq& x, std::unique_ptr<EncoderTape>& tape) const = 0;
  /// Accumulates parameter gradients into `grads` (aligned with params()).
  virtual void backward(const EncoderTape& tape, const Vector& d_out, std::span<Tensor> grads) const = 0;

  virtual std::vector<Tensor>& params() = 0;
  virtual const std::vector<Tensor>& params() const = 0;

  virtual std::unique_ptr<Encoder> clone() const = 0;
};

/// Builds an encoder with Glorot-uniform weights drawn from `rng`.
/// Throws ValidationError for a kind missing from available_encoders().
std::unique_ptr<Encoder> make_encoder(EncoderKind kind, const EncoderSpec& spec, Rng& rng);

namespace detail {
std::unique_ptr<Encoder> make_conv_encoder(const EncoderSpec& spec, Rng& rng);
#ifdef TADER_WITH_RECURRENT
std::unique_ptr<Encoder> make_gru_encoder(const EncoderSpec& spec, Rng& rng);
std::unique_ptr<Encoder> make_lstm_encoder(const EncoderSpec& spec, Rng& rng);
#endif
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);
}  // namespace detail

}  // namespace tader
