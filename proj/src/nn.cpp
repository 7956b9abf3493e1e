#include "tader/nn.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tader/error.hpp"

namespace tader {

Tensor::Tensor(std::string name, std::vector<std::size_t> shape) : name(std::move(name)), shape(std::move(shape)) {
  std::size_t count = 1;
  for (auto d : this->shape) count *= d;
  data.assign(count, 0.0);
}

Eigen::Map<Matrix> Tensor::matrix() {
  return {data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

Eigen::Map<const Matrix> Tensor::matrix() const {
  return {data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

Eigen::Map<Vector> Tensor::vector() { return {data.data(), static_cast<Eigen::Index>(data.size())}; }

Eigen::Map<const Vector> Tensor::vector() const { return {data.data(), static_cast<Eigen::Index>(data.size())}; }

void Tensor::zero() { std::fill(data.begin(), data.end(), 0.0); }

std::vector<Tensor> zeros_like(std::span<const Tensor* const> like) {
  std::vector<Tensor> out;
  out.reserve(like.size());
  for (const Tensor* t : like) out.emplace_back(t->name, t->shape);
  return out;
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu" || name == "leakyrelu") return Activation::leaky_relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ValidationError(fmt::format("unknown activation '{}' (relu, leaky_relu, sigmoid)", name));
}

Vector activate(Activation a, const Vector& pre) {
  switch (a) {
    case Activation::relu: return pre.cwiseMax(0.0);
    case Activation::leaky_relu: return pre.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    case Activation::sigmoid: return pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  return pre;
}

Vector activation_derivative(Activation a, const Vector& pre) {
  switch (a) {
    case Activation::relu: return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::leaky_relu: return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
    case Activation::sigmoid:
      return pre.unaryExpr([](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      });
  }
  return Vector::Ones(pre.size());
}

Vector softmax(const Vector& logits) {
  const Vector shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
  return shifted / shifted.sum();
}

std::size_t conv_output_length(std::size_t n, std::size_t kernel_size, std::size_t stride) {
  if (stride == 0) throw ValidationError("stride must be positive");
  if (kernel_size == 0) throw ValidationError("kernel size must be positive");
  if (n < kernel_size) throw ValidationError("input shorter than kernel");
  return (n - kernel_size) / stride + 1;
}

std::vector<double> conv1d(std::span<const double> x, std::span<const double> h, std::size_t stride) {
  const std::size_t p = conv_output_length(x.size(), h.size(), stride);
  std::vector<double> y(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += x[j * stride + i] * h[i];
    y[j] = acc;
  }
  return y;
}

Matrix conv1d(const Matrix& x, const Eigen::Ref<const Matrix>& kernels, std::size_t kernel_size, std::size_t stride) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto channels = x.cols();
  if (kernels.cols() != static_cast<Eigen::Index>(kernel_size) * channels) {
    throw ValidationError(fmt::format("kernel width {} does not match {} x {}", kernels.cols(), kernel_size, channels));
  }
  const auto p = static_cast<Eigen::Index>(conv_output_length(n, kernel_size, stride));
  // Window j is the contiguous block of rows [j*s, j*s + z) of the row-major input.
  const Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> patches(
      x.data(), p, kernels.cols(), Eigen::OuterStride<>(static_cast<Eigen::Index>(stride) * channels));
  return patches * kernels.transpose();
}

}  // namespace tader
