#include "gseg/rng.hpp"

#include <limits>
#include <stdexcept>

namespace gseg {

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v = engine_();
  while (v >= limit) v = engine_();
  return static_cast<std::size_t>(v % bound);
}

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(values), requires_grad);
}

}  // namespace gseg
