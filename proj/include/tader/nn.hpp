#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tader/embeddings.hpp"

namespace tader {

/// Named, row-major parameter (or gradient) block.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::string name, std::vector<std::size_t> shape);

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape.front(); }
  std::size_t cols() const { return rows() == 0 ? 0 : data.size() / rows(); }

  Eigen::Map<Matrix> matrix();
  Eigen::Map<const Matrix> matrix() const;
  Eigen::Map<Vector> vector();
  Eigen::Map<const Vector> vector() const;

  void zero();
};

/// Zero-filled tensors with the same names and shapes as `like`.
std::vector<Tensor> zeros_like(std::span<const Tensor* const> like);

enum class Activation { relu, leaky_relu, sigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

inline constexpr double kLeakySlope = 0.01;

Vector activate(Activation a, const Vector& pre);
/// d activation / d pre, evaluated at `pre`.
Vector activation_derivative(Activation a, const Vector& pre);

/// Numerically stable softmax.
Vector softmax(const Vector& logits);

/// Strided sliding dot product: y(j) = sum_i x(j*s + i) h(i), j = 0..p-1 with
/// p = floor((n - z) / s) + 1. Throws ValidationError when n < z or s == 0.
std::vector<double> conv1d(std::span<const double> x, std::span<const double> h, std::size_t stride);

/// Multi-channel form: `x` is n x c, `kernels` is filters x (z*c) with each
/// row laid out as z consecutive c-vectors. Returns p x filters (no bias).
Matrix conv1d(const Matrix& x, const Eigen::Ref<const Matrix>& kernels, std::size_t kernel_size, std::size_t stride);

/// Number of windows for input length n.
std::size_t conv_output_length(std::size_t n, std::size_t kernel_size, std::size_t stride);

}  // namespace tader
