#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gseg/tensor.hpp"

namespace gseg {

struct GradCheckOptions {
  double step = 1e-5;  // central difference half-width
  double tolerance = 1e-4;
  std::size_t samples = 100;  // entries checked per run (all, if fewer exist)
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-5;
};

struct GradCheckResult {
  std::string op;
  double max_rel_err = 0.0;
  std::size_t samples = 0;
  /// Entries rejected because the perturbation moved a relation entry
  /// across its sparsification threshold.
  std::size_t skipped = 0;
  double tolerance = 1e-4;

  bool passed() const { return samples > 0 && max_rel_err < tolerance; }
};

double relative_error(double analytic, double numeric, double floor);

/// Compares analytic gradients of `loss()` w.r.t. every entry of `inputs`
/// against central finite differences, on a random subset of entries.
GradCheckResult check_gradients(std::string op, std::span<Tensor> inputs, const std::function<Tensor()>& loss,
                                const GradCheckOptions& options, std::uint64_t seed);

enum class GradScope { tensor_ops, graph, gr, lr, gt, ba, all };

std::string_view to_string(GradScope scope);
GradScope parse_grad_scope(std::string_view text);

struct GradCase {
  std::string name;
  GradScope scope;
  std::function<GradCheckResult(std::uint64_t seed, const GradCheckOptions& options)> run;
};

/// Built-in cases for a scope; `all` covers every scope plus the full
/// segmenter.
std::vector<GradCase> gradcheck_cases(GradScope scope);

/// Runs every case under every seed; one result per case, worst over seeds.
std::vector<GradCheckResult> run_gradcheck(std::span<const GradCase> cases, std::span<const std::uint64_t> seeds,
                                           const GradCheckOptions& options);

}  // namespace gseg
