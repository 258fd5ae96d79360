#include "gseg/gradcheck.hpp"

#include <limits>
#include <algorithm>
#include <cmath>

#include "gseg/graph_relation.hpp"
#include "gseg/rng.hpp"

namespace gseg {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult check_gradients(std::string op, std::span<Tensor> inputs, const std::function<Tensor()>& loss,
                                const GradCheckOptions& options, std::uint64_t seed) {
  GradCheckResult result;
  result.op = std::move(op);
  result.tolerance = options.tolerance;

  for (Tensor& t : inputs) t.zero_grad();
  std::uint64_t reference_masks = 0;
  {
    MaskTrace trace;
    Tensor l = loss();
    l.backward();
    reference_masks = trace.fingerprint();
  }
  std::vector<std::vector<double>> analytic;
  for (Tensor& t : inputs) {
    auto g = t.mutable_grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) entries.emplace_back(i, j);
  Rng rng(seed);
  for (std::size_t i = entries.size(); i > 1; --i) std::swap(entries[i - 1], entries[rng.below(i)]);

  auto evaluate = [&](std::uint64_t& masks) {
    MaskTrace trace;
    const double v = loss().item();
    masks = trace.fingerprint();
    return v;
  };

  for (const auto& [ti, ei] : entries) {
    if (result.samples >= options.samples) break;
    auto values = inputs[ti].mutable_data();
    const double original = values[ei];
    std::uint64_t masks_plus = 0, masks_minus = 0;
    values[ei] = original + options.step;
    const double plus = evaluate(masks_plus);
    values[ei] = original - options.step;
    const double minus = evaluate(masks_minus);
    values[ei] = original;
    if (masks_plus != reference_masks || masks_minus != reference_masks) {
      ++result.skipped;
      continue;
    }
    const double numeric = (plus - minus) / (2.0 * options.step);
    result.max_rel_err =
        std::max(result.max_rel_err, relative_error(analytic[ti][ei], numeric, options.denominator_floor));
    ++result.samples;
  }
  for (Tensor& t : inputs) t.zero_grad();
  return result;
}

std::string_view to_string(GradScope scope) {
  switch (scope) {
    case GradScope::tensor_ops:
      return "tensor_ops";
    case GradScope::graph:
      return "graph";
    case GradScope::gr:
      return "gr";
    case GradScope::lr:
      return "lr";
    case GradScope::gt:
      return "gt";
    case GradScope::ba:
      return "ba";
    case GradScope::all:
      return "all";
  }
  return "unknown";
}

GradScope parse_grad_scope(std::string_view text) {
  for (GradScope s : {GradScope::tensor_ops, GradScope::graph, GradScope::gr, GradScope::lr, GradScope::gt,
                      GradScope::ba, GradScope::all}) {
    if (text == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown gradcheck scope '" + std::string(text) + "'");
}

std::vector<GradCheckResult> run_gradcheck(std::span<const GradCase> cases, std::span<const std::uint64_t> seeds,
                                           const GradCheckOptions& options) {
  std::vector<GradCheckResult> out;
  for (const GradCase& c : cases) {
    GradCheckResult agg;
    agg.op = c.name;
    agg.tolerance = options.tolerance;
    for (std::uint64_t seed : seeds) {
      const GradCheckResult r = c.run(seed, options);
      agg.max_rel_err = std::max(agg.max_rel_err, r.max_rel_err);
      agg.samples += r.samples;
      agg.skipped += r.skipped;
      // A run that checked nothing cannot vouch for the op.
      if (r.samples == 0) agg.max_rel_err = std::numeric_limits<double>::infinity();
    }
    out.push_back(std::move(agg));
  }
  return out;
}

}  // namespace gseg
