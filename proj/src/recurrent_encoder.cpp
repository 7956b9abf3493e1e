#include <cmath>

#include <fmt/format.h>

#include "tader/encoder.hpp"
#include "tader/error.hpp"

// Standard GRU (Cho et al. 2014) and LSTM cells run over the unpadded
// prefix of the sequence; the final hidden state is the feature vector.

namespace tader::detail {

namespace {

Vector sigmoid(const Vector& v) {
  return v.unaryExpr([](double a) { return 1.0 / (1.0 + std::exp(-a)); });
}

Vector tanh_vec(const Vector& v) {
  return v.unaryExpr([](double a) { return std::tanh(a); });
}

void check_input(const EncodedSeq& x, const EncoderSpec& spec) {
  if (static_cast<std::size_t>(x.matrix.cols()) != spec.input_dim) {
    throw ValidationError(fmt::format("encoder expects dimension {}, got {}", spec.input_dim, x.matrix.cols()));
  }
}

class GruEncoder final : public Encoder {
 public:
  struct Step {
    Vector x, h_prev, z, r, n;
  };
  struct Tape final : EncoderTape {
    std::vector<Step> steps;
  };

  GruEncoder(const EncoderSpec& spec, Rng& rng) : spec_(spec) {
    const std::size_t h = spec.units;
    params_.emplace_back("gru.input_weight", std::vector<std::size_t>{3 * h, spec.input_dim});
    params_.emplace_back("gru.recurrent_weight", std::vector<std::size_t>{3 * h, h});
    params_.emplace_back("gru.bias", std::vector<std::size_t>{3 * h});
    glorot_uniform(params_[0], spec.input_dim, 3 * h, rng);
    glorot_uniform(params_[1], h, 3 * h, rng);
  }

  EncoderKind kind() const override { return EncoderKind::gru; }
  const EncoderSpec& spec() const override { return spec_; }
  std::size_t output_dim() const override { return spec_.units; }

  Vector forward(const EncodedSeq& x) const override { return run(x, nullptr); }

  Vector forward(const EncodedSeq& x, std::unique_ptr<EncoderTape>& tape) const override {
    auto t = std::make_unique<Tape>();
    Vector out = run(x, t.get());
    tape = std::move(t);
    return out;
  }

  void backward(const EncoderTape& base, const Vector& d_out, std::span<Tensor> grads) const override {
    const auto& tape = dynamic_cast<const Tape&>(base);
    const auto h = static_cast<Eigen::Index>(spec_.units);
    const auto u = params_[1].matrix();
    auto dw = grads[0].matrix();
    auto du = grads[1].matrix();
    auto db = grads[2].vector();

    Vector dh = d_out;
    for (auto it = tape.steps.rbegin(); it != tape.steps.rend(); ++it) {
      const Step& s = *it;
      const Vector dn = dh.cwiseProduct(Vector::Ones(h) - s.z);
      const Vector dz = dh.cwiseProduct(s.h_prev - s.n);
      Vector dh_prev = dh.cwiseProduct(s.z);

      const Vector da_n = dn.cwiseProduct((Vector::Ones(h) - s.n.cwiseProduct(s.n)));
      const Vector rh = s.r.cwiseProduct(s.h_prev);
      const Vector d_rh = u.middleRows(2 * h, h).transpose() * da_n;
      const Vector dr = d_rh.cwiseProduct(s.h_prev);
      dh_prev += d_rh.cwiseProduct(s.r);

      const Vector da_z = dz.cwiseProduct(s.z.cwiseProduct(Vector::Ones(h) - s.z));
      const Vector da_r = dr.cwiseProduct(s.r.cwiseProduct(Vector::Ones(h) - s.r));

      dw.middleRows(0, h) += da_z * s.x.transpose();
      dw.middleRows(h, h) += da_r * s.x.transpose();
      dw.middleRows(2 * h, h) += da_n * s.x.transpose();
      du.middleRows(0, h) += da_z * s.h_prev.transpose();
      du.middleRows(h, h) += da_r * s.h_prev.transpose();
      du.middleRows(2 * h, h) += da_n * rh.transpose();
      db.segment(0, h) += da_z;
      db.segment(h, h) += da_r;
      db.segment(2 * h, h) += da_n;

      dh_prev += u.middleRows(0, h).transpose() * da_z + u.middleRows(h, h).transpose() * da_r;
      dh = dh_prev;
    }
  }

  std::vector<Tensor>& params() override { return params_; }
  const std::vector<Tensor>& params() const override { return params_; }
  std::unique_ptr<Encoder> clone() const override { return std::make_unique<GruEncoder>(*this); }

 private:
  Vector run(const EncodedSeq& x, Tape* tape) const {
    check_input(x, spec_);
    const auto h = static_cast<Eigen::Index>(spec_.units);
    const auto w = params_[0].matrix();
    const auto u = params_[1].matrix();
    const auto b = params_[2].vector();
    Vector state = Vector::Zero(h);
    for (std::size_t t = 0; t < x.true_len; ++t) {
      const Vector xt = x.matrix.row(static_cast<Eigen::Index>(t)).transpose();
      const Vector wx = w * xt + b;
      const Vector z = sigmoid(wx.segment(0, h) + u.middleRows(0, h) * state);
      const Vector r = sigmoid(wx.segment(h, h) + u.middleRows(h, h) * state);
      const Vector n = tanh_vec(wx.segment(2 * h, h) + u.middleRows(2 * h, h) * r.cwiseProduct(state));
      Vector next = (Vector::Ones(h) - z).cwiseProduct(n) + z.cwiseProduct(state);
      if (tape != nullptr) tape->steps.push_back({xt, state, z, r, n});
      state = std::move(next);
    }
    return state;
  }

  EncoderSpec spec_;
  std::vector<Tensor> params_;
};

class LstmEncoder final : public Encoder {
 public:
  struct Step {
    Vector x, h_prev, c_prev, i, f, g, o, c;
  };
  struct Tape final : EncoderTape {
    std::vector<Step> steps;
  };

  LstmEncoder(const EncoderSpec& spec, Rng& rng) : spec_(spec) {
    const std::size_t h = spec.units;
    params_.emplace_back("lstm.input_weight", std::vector<std::size_t>{4 * h, spec.input_dim});
    params_.emplace_back("lstm.recurrent_weight", std::vector<std::size_t>{4 * h, h});
    params_.emplace_back("lstm.bias", std::vector<std::size_t>{4 * h});
    glorot_uniform(params_[0], spec.input_dim, 4 * h, rng);
    glorot_uniform(params_[1], h, 4 * h, rng);
    // Gate order i, f, g, o; forget bias starts at 1.
    params_[2].vector().segment(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(h)).setOnes();
  }

  EncoderKind kind() const override { return EncoderKind::lstm; }
  const EncoderSpec& spec() const override { return spec_; }
  std::size_t output_dim() const override { return spec_.units; }

  Vector forward(const EncodedSeq& x) const override { return run(x, nullptr); }

  Vector forward(const EncodedSeq& x, std::unique_ptr<EncoderTape>& tape) const override {
    auto t = std::make_unique<Tape>();
    Vector out = run(x, t.get());
    tape = std::move(t);
    return out;
  }

  void backward(const EncoderTape& base, const Vector& d_out, std::span<Tensor> grads) const override {
    const auto& tape = dynamic_cast<const Tape&>(base);
    const auto h = static_cast<Eigen::Index>(spec_.units);
    const auto u = params_[1].matrix();
    auto dw = grads[0].matrix();
    auto du = grads[1].matrix();
    auto db = grads[2].vector();
    const Vector ones = Vector::Ones(h);

    Vector dh = d_out;
    Vector dc = Vector::Zero(h);
    for (auto it = tape.steps.rbegin(); it != tape.steps.rend(); ++it) {
      const Step& s = *it;
      const Vector tc = tanh_vec(s.c);
      const Vector d_o = dh.cwiseProduct(tc);
      dc += dh.cwiseProduct(s.o).cwiseProduct(ones - tc.cwiseProduct(tc));
      const Vector d_i = dc.cwiseProduct(s.g);
      const Vector d_g = dc.cwiseProduct(s.i);
      const Vector d_f = dc.cwiseProduct(s.c_prev);

      Vector da(4 * h);
      da.segment(0, h) = d_i.cwiseProduct(s.i.cwiseProduct(ones - s.i));
      da.segment(h, h) = d_f.cwiseProduct(s.f.cwiseProduct(ones - s.f));
      da.segment(2 * h, h) = d_g.cwiseProduct(ones - s.g.cwiseProduct(s.g));
      da.segment(3 * h, h) = d_o.cwiseProduct(s.o.cwiseProduct(ones - s.o));

      dw += da * s.x.transpose();
      du += da * s.h_prev.transpose();
      db += da;

      dh = u.transpose() * da;
      dc = dc.cwiseProduct(s.f);
    }
  }

  std::vector<Tensor>& params() override { return params_; }
  const std::vector<Tensor>& params() const override { return params_; }
  std::unique_ptr<Encoder> clone() const override { return std::make_unique<LstmEncoder>(*this); }

 private:
  Vector run(const EncodedSeq& x, Tape* tape) const {
    check_input(x, spec_);
    const auto h = static_cast<Eigen::Index>(spec_.units);
    const auto w = params_[0].matrix();
    const auto u = params_[1].matrix();
    const auto b = params_[2].vector();
    Vector state = Vector::Zero(h);
    Vector cell = Vector::Zero(h);
    for (std::size_t t = 0; t < x.true_len; ++t) {
      const Vector xt = x.matrix.row(static_cast<Eigen::Index>(t)).transpose();
      const Vector a = w * xt + u * state + b;
      const Vector i = sigmoid(a.segment(0, h));
      const Vector f = sigmoid(a.segment(h, h));
      const Vector g = tanh_vec(a.segment(2 * h, h));
      const Vector o = sigmoid(a.segment(3 * h, h));
      Vector next_cell = f.cwiseProduct(cell) + i.cwiseProduct(g);
      Vector next_state = o.cwiseProduct(tanh_vec(next_cell));
      if (tape != nullptr) tape->steps.push_back({xt, state, cell, i, f, g, o, next_cell});
      state = std::move(next_state);
      cell = std::move(next_cell);
    }
    return state;
  }

  EncoderSpec spec_;
  std::vector<Tensor> params_;
};

}  // namespace

std::unique_ptr<Encoder> make_gru_encoder(const EncoderSpec& spec, Rng& rng) {
  return std::make_unique<GruEncoder>(spec, rng);
}

std::unique_ptr<Encoder> make_lstm_encoder(const EncoderSpec& spec, Rng& rng) {
  return std::make_unique<LstmEncoder>(spec, rng);
}

}  // namespace tader::detail
