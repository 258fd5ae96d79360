#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gseg/ops.hpp"
#include "gseg/rng.hpp"
#include "gseg/tensor.hpp"

namespace gseg {

/// Boundary-aware attention head: squeeze 1x1 -> local 7x7 -> GELU ->
/// unsqueeze 1x1 -> sigmoid, giving one coefficient per feature entry.
struct BAParams {
  static constexpr std::size_t kLocalKernel = 7;

  Tensor squeeze;    // [C/r x C x 1 x 1]
  Tensor local;      // [C/r x C/r x 7 x 7]
  Tensor unsqueeze;  // [C x C/r x 1 x 1]
  std::size_t ratio = 1;
  GeluMode gelu_mode = GeluMode::tanh;

  /// With `zero_unsqueeze` every coefficient starts at sigmoid(0) = 0.5.
  static BAParams create(std::size_t channels, std::size_t ratio, Rng& rng, bool zero_unsqueeze = true,
                         GeluMode gelu_mode = GeluMode::tanh);

  std::size_t channels() const { return unsqueeze.dim(0); }
  std::size_t parameter_count() const;
  void append_parameters(const std::string& prefix, std::vector<Parameter>& out) const;

  /// 2 C (C/r) + 49 (C/r)^2.
  static std::size_t expected_parameter_count(std::size_t channels, std::size_t ratio);
};

/// sigmoid(unsqueeze(gelu(local(squeeze(y))))), strictly inside (0, 1).
Tensor ba_coefficients(const Tensor& y, const BAParams& params);

/// y weighted elementwise by its coefficients.
Tensor ba_apply(const Tensor& y, const BAParams& params);

}  // namespace gseg
