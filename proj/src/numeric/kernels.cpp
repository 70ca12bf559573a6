#include "wfn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wfn/errors.hpp"

namespace wfn::kernels {

void gemm_nn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0f);
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    const float* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = arow[p];
      if (av == 0.0f) continue;
      const float* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const float* brow = b + j * k;
      float s = 0.0f;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      if (accumulate) {
        c[i * n + j] += s;
      } else {
        c[i * n + j] = s;
      }
    }
  }
}

void gemm_tn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0f);
  for (std::size_t p = 0; p < k; ++p) {
    const float* arow = a + p * m;
    const float* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const float av = arow[i];
      if (av == 0.0f) continue;
      float* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2 || a.cols() != b.shape()[0]) {
    throw DimensionError("matmul: cannot multiply " + a.shape_string() + " by " +
                         b.shape_string());
  }
  Shape out_shape = a.shape();
  if (out_shape.size() == 1) out_shape = {1, b.cols()};
  out_shape.back() = b.cols();
  Tensor c(out_shape);
  gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols(), false);
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2 || a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: cannot multiply " + a.shape_string() +
                         " by transpose of " + b.shape_string());
  }
  Tensor c({a.rows(), b.rows()});
  gemm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows(), false);
  return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.size() != x.cols()) {
    throw DimensionError("add_bias: bias " + bias.shape_string() + " does not fit " +
                         x.shape_string());
  }
  Tensor y = x;
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    float* row = y.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) row[j] += bias[j];
  }
  return y;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0.0f ? v : 0.0f;
  return y;
}

void softmax_row_inplace(std::span<float> row) {
  if (row.empty()) return;
  const float mx = *std::max_element(row.begin(), row.end());
  float sum = 0.0f;
  for (auto& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  const float inv = 1.0f / sum;
  for (auto& v : row) v *= inv;
}

void masked_softmax_row_inplace(std::span<float> row, std::span<const unsigned char> allow) {
  float mx = -std::numeric_limits<float>::infinity();
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (allow[j] && row[j] > mx) mx = row[j];
  }
  if (mx == -std::numeric_limits<float>::infinity()) {
    const float u = 1.0f / static_cast<float>(row.size());
    for (auto& v : row) v = u;
    return;
  }
  float sum = 0.0f;
  for (std::size_t j = 0; j < row.size(); ++j) {
    row[j] = allow[j] ? std::exp(row[j] - mx) : 0.0f;
    sum += row[j];
  }
  const float inv = 1.0f / sum;
  for (auto& v : row) v *= inv;
}

void log_softmax_row_inplace(std::span<float> row) {
  if (row.empty()) return;
  const float mx = *std::max_element(row.begin(), row.end());
  float sum = 0.0f;
  for (float v : row) sum += std::exp(v - mx);
  const float lse = mx + std::log(sum);
  for (auto& v : row) v -= lse;
}

Tensor softmax_rows(const Tensor& x) {
  Tensor y = x;
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) softmax_row_inplace({y.data() + r * d, d});
  return y;
}

void layer_norm_rows(const float* x, const float* gain, const float* bias, float* y,
                     std::size_t rows, std::size_t d, float* mean, float* rstd) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * d;
    float mu = 0.0f;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<float>(d);
    float var = 0.0f;
    for (std::size_t j = 0; j < d; ++j) {
      const float c = xr[j] - mu;
      var += c * c;
    }
    var /= static_cast<float>(d);
    const float rs = 1.0f / std::sqrt(var + kLayerNormEps);
    float* yr = y + r * d;
    for (std::size_t j = 0; j < d; ++j) yr[j] = (xr[j] - mu) * rs * gain[j] + bias[j];
    if (mean) mean[r] = mu;
    if (rstd) rstd[r] = rs;
  }
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  std::span<float> mean, std::span<float> rstd) {
  const std::size_t d = x.cols();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: gain " + gain.shape_string() + " / bias " +
                         bias.shape_string() + " do not match " + x.shape_string());
  }
  Tensor y(x.shape());
  layer_norm_rows(x.data(), gain.data(), bias.data(), y.data(), x.rows(), d,
                  mean.empty() ? nullptr : mean.data(), rstd.empty() ? nullptr : rstd.data());
  return y;
}

}  // namespace wfn::kernels
