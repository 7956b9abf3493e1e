#include "tader/encoder.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tader/error.hpp"

namespace tader {

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::cnn: return "cnn";
    case EncoderKind::gru: return "gru";
    case EncoderKind::lstm: return "lstm";
  }
  return "?";
}

std::vector<EncoderKind> available_encoders() {
#ifdef TADER_WITH_RECURRENT
  return {EncoderKind::cnn, EncoderKind::gru, EncoderKind::lstm};
#else
  return {EncoderKind::cnn};
#endif
}

namespace {

std::string available_list() {
  std::string out;
  for (auto k : available_encoders()) {
    if (!out.empty()) out += ", ";
    out += to_string(k);
  }
  return out;
}

}  // namespace

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "cnn") return EncoderKind::cnn;
  if (name == "gru") return EncoderKind::gru;
  if (name == "lstm") return EncoderKind::lstm;
  throw ValidationError(fmt::format("unknown encoder '{}' (available: {})", name, available_list()));
}

std::unique_ptr<Encoder> make_encoder(EncoderKind kind, const EncoderSpec& spec, Rng& rng) {
  if (spec.units == 0) throw ValidationError("encoder units must be positive");
  if (spec.input_dim == 0) throw ValidationError("encoder input dimension must be positive");
  switch (kind) {
    case EncoderKind::cnn: return detail::make_conv_encoder(spec, rng);
#ifdef TADER_WITH_RECURRENT
    case EncoderKind::gru: return detail::make_gru_encoder(spec, rng);
    case EncoderKind::lstm: return detail::make_lstm_encoder(spec, rng);
#else
    case EncoderKind::gru:
    case EncoderKind::lstm: break;
#endif
  }
  throw ValidationError(
      fmt::format("encoder '{}' is not available in this build (available: {})", to_string(kind), available_list()));
}

void detail::glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& w : t.data) w = rng.uniform(-limit, limit);
}

}  // namespace tader
