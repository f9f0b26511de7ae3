#pragma once

#include <cstddef>
#include <vector>

#include "pillardet/common.hpp"

namespace pillardet {

// Row-major dense array of doubles. Reductions in the kernels below run
// sequentially over the contracted axis, so results are bit-reproducible
// regardless of thread count.
struct DenseArray {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  DenseArray() = default;
  explicit DenseArray(std::vector<std::size_t> s);
  DenseArray(std::vector<std::size_t> s, std::vector<double> v);

  std::size_t numel() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t extent(std::size_t d) const { return shape[d]; }

  double& operator()(std::size_t i) { return values[i]; }
  double operator()(std::size_t i) const { return values[i]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * shape[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * shape[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return values[(i * shape[1] + j) * shape[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values[(i * shape[1] + j) * shape[2] + k];
  }

  DenseArray reshaped(std::vector<std::size_t> s) const;
  bool all_finite() const;
};

// y[i,j] = sum_k x[i,k] * w[k,j] + bias[j]
DenseArray linear(const DenseArray& x, const DenseArray& w, const DenseArray& bias);
DenseArray matmul(const DenseArray& x, const DenseArray& w);
DenseArray transpose2(const DenseArray& x);

// Numerically stable softmax (max subtraction) along the given axis.
DenseArray softmax(const DenseArray& x, std::size_t axis);

// Normalizes each last-axis slice: (x - mean) / sqrt(var + eps) * gain + shift.
// Variance uses divisor C (biased).
DenseArray layer_norm(const DenseArray& x, const DenseArray& gain, const DenseArray& shift,
                      double eps = 1e-5);

DenseArray relu(const DenseArray& x);

// Bilinear sample of a C x H x W map at pixel (u, v), texel centers on integer
// coordinates. The caller guarantees the point lies inside the map; sub-pixel
// positions at the border clamp neighbor indices to the edge.
std::vector<double> bilinear_sample(const DenseArray& map, double u, double v);

}  // namespace pillardet
