#pragma once

#include <cstddef>
#include <span>

#include "wfn/tensor.hpp"

// Forward-only dense kernels. The autograd tape and the incremental decoder
// both call these, so training and inference share one arithmetic path.
namespace wfn::kernels {

inline constexpr float kLayerNormEps = 1e-5f;

// Raw row-major helpers. `accumulate` adds into `c` instead of overwriting.
// C[m,n] = A[m,k] * B[k,n]
void gemm_nn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// C[m,n] = A[m,k] * B[n,k]^T
void gemm_nt(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);
// C[m,n] = A[k,m]^T * B[k,n]
void gemm_tn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate);

/// Matrix product of two 2-D views. Throws DimensionError naming both shapes
/// when the inner dimensions differ.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
/// Adds a length-cols vector to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor relu(const Tensor& x);

/// Stable row softmax (per-row max subtraction).
Tensor softmax_rows(const Tensor& x);
void softmax_row_inplace(std::span<float> row);
/// Row softmax restricted to allowed entries; a row with no allowed entry
/// becomes uniform over all columns.
void masked_softmax_row_inplace(std::span<float> row, std::span<const unsigned char> allow);
void log_softmax_row_inplace(std::span<float> row);

/// Per-row normalisation to zero mean / unit variance followed by gain and
/// bias. `mean` and `rstd`, when non-empty, receive the per-row statistics.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  std::span<float> mean = {}, std::span<float> rstd = {});
void layer_norm_rows(const float* x, const float* gain, const float* bias, float* y,
                     std::size_t rows, std::size_t d, float* mean, float* rstd);

}  // namespace wfn::kernels
