#include "pillardet/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pillardet {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) throw ConfigError("DenseArray extents must be positive");
    n *= e;
  }
  return n;
}

}  // namespace

DenseArray::DenseArray(std::vector<std::size_t> s) : shape(std::move(s)) {
  values.assign(checked_numel(shape), 0.0);
}

DenseArray::DenseArray(std::vector<std::size_t> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  if (checked_numel(shape) != values.size())
    throw ConfigError("DenseArray shape does not match value count");
}

DenseArray DenseArray::reshaped(std::vector<std::size_t> s) const {
  if (checked_numel(s) != values.size()) throw ConfigError("reshape changes element count");
  DenseArray out;
  out.shape = std::move(s);
  out.values = values;
  return out;
}

bool DenseArray::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

DenseArray linear(const DenseArray& x, const DenseArray& w, const DenseArray& bias) {
  if (x.rank() != 2 || w.rank() != 2 || bias.rank() != 1)
    throw ConfigError("linear expects x[n,a], w[a,b], bias[b]");
  const std::size_t n = x.shape[0], a = x.shape[1], b = w.shape[1];
  if (w.shape[0] != a || bias.shape[0] != b)
    throw ConfigError("linear: inner extents do not match");
  DenseArray y({n, b});
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = &x.values[i * a];
    for (std::size_t j = 0; j < b; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a; ++k) acc += xi[k] * w.values[k * b + j];
      y.values[i * b + j] = acc + bias.values[j];
    }
  }
  return y;
}

DenseArray matmul(const DenseArray& x, const DenseArray& w) {
  if (x.rank() != 2 || w.rank() != 2 || x.shape[1] != w.shape[0])
    throw ConfigError("matmul: inner extents do not match");
  const std::size_t n = x.shape[0], a = x.shape[1], b = w.shape[1];
  DenseArray y({n, b});
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = &x.values[i * a];
    for (std::size_t j = 0; j < b; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a; ++k) acc += xi[k] * w.values[k * b + j];
      y.values[i * b + j] = acc;
    }
  }
  return y;
}

DenseArray transpose2(const DenseArray& x) {
  if (x.rank() != 2) throw ConfigError("transpose2 expects a rank-2 array");
  const std::size_t n = x.shape[0], m = x.shape[1];
  DenseArray y({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) y.values[j * n + i] = x.values[i * m + j];
  return y;
}

DenseArray softmax(const DenseArray& x, std::size_t axis) {
  if (axis >= x.rank()) throw ConfigError("softmax: axis out of range");
  const std::size_t n = x.shape[axis];
  std::size_t inner = 1, outer = 1;
  for (std::size_t d = axis + 1; d < x.rank(); ++d) inner *= x.shape[d];
  for (std::size_t d = 0; d < axis; ++d) outer *= x.shape[d];

  DenseArray y = x;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < n; ++t) mx = std::max(mx, x.values[base + t * inner]);
      double sum = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double e = std::exp(x.values[base + t * inner] - mx);
        y.values[base + t * inner] = e;
        sum += e;
      }
      for (std::size_t t = 0; t < n; ++t) y.values[base + t * inner] /= sum;
    }
  }
  return y;
}

DenseArray layer_norm(const DenseArray& x, const DenseArray& gain, const DenseArray& shift,
                      double eps) {
  if (x.rank() < 1) throw ConfigError("layer_norm expects rank >= 1");
  const std::size_t c = x.shape.back();
  if (gain.numel() != c || shift.numel() != c)
    throw ConfigError("layer_norm: gain/shift must match the last extent");
  DenseArray y = x;
  const std::size_t slices = x.numel() / c;
  for (std::size_t s = 0; s < slices; ++s) {
    const double* xs = &x.values[s * c];
    double mean = 0.0;
    for (std::size_t k = 0; k < c; ++k) mean += xs[k];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t k = 0; k < c; ++k) var += (xs[k] - mean) * (xs[k] - mean);
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t k = 0; k < c; ++k)
      y.values[s * c + k] = (xs[k] - mean) * inv * gain.values[k] + shift.values[k];
  }
  return y;
}

DenseArray relu(const DenseArray& x) {
  DenseArray y = x;
  for (double& v : y.values) v = std::max(0.0, v);
  return y;
}

std::vector<double> bilinear_sample(const DenseArray& map, double u, double v) {
  if (map.rank() != 3) throw ConfigError("bilinear_sample expects a C x H x W map");
  if (!std::isfinite(u) || !std::isfinite(v))
    throw ContractViolation("bilinear_sample: non-finite coordinates");
  const std::size_t c = map.shape[0];
  const long h = static_cast<long>(map.shape[1]);
  const long w = static_cast<long>(map.shape[2]);

  const double fu = std::floor(u), fv = std::floor(v);
  const long u0 = std::clamp(static_cast<long>(fu), 0L, w - 1);
  const long v0 = std::clamp(static_cast<long>(fv), 0L, h - 1);
  const long u1 = std::min(u0 + 1, w - 1);
  const long v1 = std::min(v0 + 1, h - 1);
  const double au = u - fu, av = v - fv;

  const double w00 = (1.0 - au) * (1.0 - av);
  const double w10 = au * (1.0 - av);
  const double w01 = (1.0 - au) * av;
  const double w11 = au * av;

  std::vector<double> out(c);
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* m = &map.values[ch * plane];
    out[ch] = w00 * m[v0 * w + u0] + w10 * m[v0 * w + u1] + w01 * m[v1 * w + u0] +
              w11 * m[v1 * w + u1];
  }
  return out;
}

}  // namespace pillardet
