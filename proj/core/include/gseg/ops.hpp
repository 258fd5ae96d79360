#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gseg/tensor.hpp"

namespace gseg {

enum class GeluMode { tanh, erf };

// Elementwise arithmetic. Operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

/// out[i] = a[index[i]]. Backward scatter-adds. Every layout permutation in
/// the library (window partition, token views) is expressed through this.
Tensor gather(const Tensor& a, Shape out_shape, std::vector<std::size_t> index);

/// [p x q] x [q x s] -> [p x s].
Tensor matmul(const Tensor& a, const Tensor& b);
/// [B x p x q] x [B x q x s] -> [B x p x s].
Tensor batched_matmul(const Tensor& a, const Tensor& b);
/// Swaps the last two axes of a rank-2 or rank-3 tensor.
Tensor transpose(const Tensor& a);

/// Softmax along the last axis with per-row max subtraction.
Tensor softmax_rows(const Tensor& a);

Tensor gelu(const Tensor& x, GeluMode mode = GeluMode::tanh);
/// Saturates at the representable neighbours of 0 and 1 so the result stays
/// strictly inside (0, 1).
Tensor sigmoid(const Tensor& x);

/// Same-size cross-correlation. x: [C_in x H x W], w: [C_out x C_in x k x k]
/// with odd k, zero padding (k-1)/2, no bias.
Tensor conv2d(const Tensor& x, const Tensor& w);

/// Mean per-pixel cross-entropy. logits: [classes x H x W], labels: H*W ids.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels);

/// Scalar GELU, shared with reference code in tests and tools.
double gelu_value(double x, GeluMode mode);

}  // namespace gseg
