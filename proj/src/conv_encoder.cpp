#include <fmt/format.h>

#include "tader/encoder.hpp"
#include "tader/error.hpp"

namespace tader::detail {

namespace {

// Conv1D -> ReLU -> global max-pool over window positions.
//
// ReLU commutes with the max, so the pool picks the largest pre-activation
// per filter and the output is max(0, that value).
class ConvEncoder final : public Encoder {
 public:
  struct Tape final : EncoderTape {
    Matrix input;
    std::vector<Eigen::Index> argmax;
    Vector pooled_pre;
  };

  ConvEncoder(const EncoderSpec& spec, Rng& rng) : spec_(spec) {
    if (spec.kernel_size == 0 || spec.stride == 0) throw ValidationError("kernel size and stride must be positive");
    params_.emplace_back("conv.weight", std::vector<std::size_t>{spec.units, spec.kernel_size, spec.input_dim});
    params_.emplace_back("conv.bias", std::vector<std::size_t>{spec.units});
    glorot_uniform(params_[0], spec.kernel_size * spec.input_dim, spec.kernel_size * spec.units, rng);
  }

  EncoderKind kind() const override { return EncoderKind::cnn; }
  const EncoderSpec& spec() const override { return spec_; }
  std::size_t output_dim() const override { return spec_.units; }

  Vector forward(const EncodedSeq& x) const override {
    Tape tape;
    return run(x, tape, false);
  }

  Vector forward(const EncodedSeq& x, std::unique_ptr<EncoderTape>& tape) const override {
    auto t = std::make_unique<Tape>();
    Vector out = run(x, *t, true);
    tape = std::move(t);
    return out;
  }

  void backward(const EncoderTape& base, const Vector& d_out, std::span<Tensor> grads) const override {
    const auto& tape = dynamic_cast<const Tape&>(base);
    auto d_weight = grads[0].matrix();
    auto d_bias = grads[1].vector();
    const auto width = static_cast<Eigen::Index>(spec_.kernel_size * spec_.input_dim);
    const auto step = static_cast<Eigen::Index>(spec_.stride * spec_.input_dim);
    for (Eigen::Index f = 0; f < d_out.size(); ++f) {
      if (tape.pooled_pre[f] <= 0.0 || d_out[f] == 0.0) continue;
      const Eigen::Map<const Eigen::RowVectorXd> patch(tape.input.data() + tape.argmax[f] * step, width);
      d_weight.row(f) += d_out[f] * patch;
      d_bias[f] += d_out[f];
    }
  }

  std::vector<Tensor>& params() override { return params_; }
  const std::vector<Tensor>& params() const override { return params_; }
  std::unique_ptr<Encoder> clone() const override { return std::make_unique<ConvEncoder>(*this); }

 private:
  Vector run(const EncodedSeq& x, Tape& tape, bool keep_input) const {
    if (static_cast<std::size_t>(x.matrix.cols()) != spec_.input_dim) {
      throw ValidationError(fmt::format("encoder expects dimension {}, got {}", spec_.input_dim, x.matrix.cols()));
    }
    const auto weight = params_[0].matrix();
    const auto bias = params_[1].vector();
    Matrix pre = conv1d(x.matrix, weight, spec_.kernel_size, spec_.stride);
    pre.rowwise() += bias.transpose();

    const auto filters = static_cast<Eigen::Index>(spec_.units);
    tape.argmax.assign(static_cast<std::size_t>(filters), 0);
    tape.pooled_pre.resize(filters);
    for (Eigen::Index f = 0; f < filters; ++f) {
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < pre.rows(); ++j) {
        if (pre(j, f) > pre(best, f)) best = j;
      }
      tape.argmax[static_cast<std::size_t>(f)] = best;
      tape.pooled_pre[f] = pre(best, f);
    }
    if (keep_input) tape.input = x.matrix;
    return tape.pooled_pre.cwiseMax(0.0);
  }

  EncoderSpec spec_;
  std::vector<Tensor> params_;
};

}  // namespace

std::unique_ptr<Encoder> make_conv_encoder(const EncoderSpec& spec, Rng& rng) {
  return std::make_unique<ConvEncoder>(spec, rng);
}

}  // namespace tader::detail
