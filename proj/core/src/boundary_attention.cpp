#include "gseg/boundary_attention.hpp"

#include <cmath>
#include <stdexcept>

namespace gseg {

namespace {

void require_ratio(std::size_t channels, std::size_t ratio) {
  if (ratio == 0 || channels % ratio != 0) {
    throw std::invalid_argument("boundary attention compression ratio " + std::to_string(ratio) +
                                " must divide channel count " + std::to_string(channels));
  }
}

Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return uniform_tensor(std::move(shape), -bound, bound, rng, true);
}

}  // namespace

BAParams BAParams::create(std::size_t channels, std::size_t ratio, Rng& rng, bool zero_unsqueeze, GeluMode gelu_mode) {
  require_ratio(channels, ratio);
  const std::size_t reduced = channels / ratio;
  BAParams p;
  p.ratio = ratio;
  p.gelu_mode = gelu_mode;
  p.squeeze = init_weight({reduced, channels, 1, 1}, channels, rng);
  p.local = init_weight({reduced, reduced, kLocalKernel, kLocalKernel}, reduced * kLocalKernel * kLocalKernel, rng);
  p.unsqueeze = zero_unsqueeze ? Tensor::zeros({channels, reduced, 1, 1}, true)
                               : init_weight({channels, reduced, 1, 1}, reduced, rng);
  return p;
}

std::size_t BAParams::parameter_count() const { return squeeze.numel() + local.numel() + unsqueeze.numel(); }

void BAParams::append_parameters(const std::string& prefix, std::vector<Parameter>& out) const {
  out.push_back({prefix + ".squeeze", squeeze});
  out.push_back({prefix + ".local", local});
  out.push_back({prefix + ".unsqueeze", unsqueeze});
}

std::size_t BAParams::expected_parameter_count(std::size_t channels, std::size_t ratio) {
  require_ratio(channels, ratio);
  const std::size_t reduced = channels / ratio;
  return 2 * channels * reduced + kLocalKernel * kLocalKernel * reduced * reduced;
}

Tensor ba_coefficients(const Tensor& y, const BAParams& params) {
  if (y.rank() != 3 || y.dim(0) != params.channels()) {
    throw ShapeError("ba_coefficients: input " + shape_to_string(y.shape()) + " does not have " +
                     std::to_string(params.channels()) + " channels");
  }
  require_ratio(y.dim(0), params.ratio);
  Tensor squeezed = conv2d(y, params.squeeze);
  Tensor local = conv2d(squeezed, params.local);
  Tensor activated = gelu(local, params.gelu_mode);
  return sigmoid(conv2d(activated, params.unsqueeze));
}

Tensor ba_apply(const Tensor& y, const BAParams& params) { return hadamard(y, ba_coefficients(y, params)); }

}  // namespace gseg
