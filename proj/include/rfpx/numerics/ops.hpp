#pragma once

#include <span>
#include <vector>

#include "rfpx/numerics/tensor.hpp"

// Differentiable operations on rank-2 tensors. Inputs are validated and
// mismatches raise DimensionError naming both shapes.
namespace rfpx::ops {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// a (m×n) plus a 1×n row broadcast over every row.
Tensor add_row(const Tensor& a, const Tensor& row);
/// Elementwise product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// Multiplies every entry of `a` by the single entry of `s`.
Tensor scale_by(const Tensor& a, const Tensor& s);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// Row-wise softmax with per-row max subtraction. NaN input raises
/// NumericInputError.
Tensor softmax_rows(const Tensor& a);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);

/// Column-wise max over rows (1×n). Gradient goes to the first argmax.
Tensor max_rows(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean of squared differences over all entries (scalar).
Tensor mse(const Tensor& prediction, const Tensor& target);
/// Logit-form binary cross-entropy summed over entries (scalar); `labels`
/// must be 0 or 1 and carry no gradient.
Tensor bce_with_logits(const Tensor& logits, const Tensor& labels);

/// softmax(Q Kᵀ / sqrt(d)) V, single head, unmasked.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

}  // namespace rfpx::ops
