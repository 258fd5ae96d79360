#include "gseg/relation_modules.hpp"

#include <cmath>
#include <stdexcept>

#include "gseg/ops.hpp"

namespace gseg {

std::string_view to_string(FusionType fusion) {
  switch (fusion) {
    case FusionType::gr_then_lr:
      return "gr_then_lr";
    case FusionType::lr_then_gr:
      return "lr_then_gr";
    case FusionType::parallel:
      return "parallel";
  }
  return "unknown";
}

FusionType parse_fusion(std::string_view text) {
  if (text == "gr_then_lr") return FusionType::gr_then_lr;
  if (text == "lr_then_gr") return FusionType::lr_then_gr;
  if (text == "parallel") return FusionType::parallel;
  throw std::invalid_argument("unknown fusion type '" + std::string(text) + "'");
}

namespace {

void require_ratio(std::size_t channels, std::size_t ratio, const char* what) {
  if (ratio == 0 || channels % ratio != 0) {
    throw std::invalid_argument(std::string(what) + " compression ratio " + std::to_string(ratio) +
                                " must divide channel count " + std::to_string(channels));
  }
}

Tensor conv1x1_weight(std::size_t out, std::size_t in, Rng& rng, bool zero) {
  if (zero) return Tensor::zeros({out, in, 1, 1}, true);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return uniform_tensor({out, in, 1, 1}, -bound, bound, rng, true);
}

RelationParams make_params(std::size_t channels, std::size_t ratio, std::size_t node_dim, std::size_t depth, Rng& rng,
                           bool zero_unsqueeze) {
  if (depth == 0) throw std::invalid_argument("graph depth must be at least 1");
  const std::size_t reduced = channels / ratio;
  RelationParams p;
  p.ratio = ratio;
  p.squeeze = conv1x1_weight(reduced, channels, rng, false);
  for (std::size_t l = 0; l < depth; ++l) p.graph.push_back(GraphLayer::random(node_dim, l, rng));
  p.unsqueeze = conv1x1_weight(channels, reduced, rng, zero_unsqueeze);
  return p;
}

void require_params(const Tensor& x, const WindowGrid& grid, const RelationParams& params, const char* op) {
  if (x.rank() != 3 || x.dim(0) != grid.channels) {
    throw ShapeError(std::string(op) + ": input " + shape_to_string(x.shape()) + " does not match grid channels " +
                     std::to_string(grid.channels));
  }
  require_ratio(grid.channels, params.ratio, op);
}

}  // namespace

std::size_t RelationParams::parameter_count() const {
  std::size_t n = squeeze.numel() + unsqueeze.numel();
  for (const auto& layer : graph) n += layer.weight.numel();
  return n;
}

void RelationParams::append_parameters(const std::string& prefix, std::vector<Parameter>& out) const {
  out.push_back({prefix + ".squeeze", squeeze});
  for (const auto& layer : graph) {
    out.push_back({prefix + ".graph" + std::to_string(layer.layer_index), layer.weight});
  }
  out.push_back({prefix + ".unsqueeze", unsqueeze});
}

std::size_t GlobalRelationParams::node_dim(const WindowGrid& grid, std::size_t ratio) {
  require_ratio(grid.channels, ratio, "global relation");
  return (grid.channels / ratio) * grid.window_pixels();
}

GlobalRelationParams GlobalRelationParams::create(const WindowGrid& grid, std::size_t ratio, std::size_t depth,
                                                  Rng& rng, bool zero_unsqueeze) {
  GlobalRelationParams p;
  static_cast<RelationParams&>(p) =
      make_params(grid.channels, ratio, node_dim(grid, ratio), depth, rng, zero_unsqueeze);
  return p;
}

std::size_t GlobalRelationParams::expected_parameter_count(const WindowGrid& grid, std::size_t ratio,
                                                           std::size_t depth) {
  const std::size_t d = node_dim(grid, ratio);
  return 2 * grid.channels * (grid.channels / ratio) + depth * d * d;
}

std::size_t LocalRelationParams::node_dim(const WindowGrid& grid, std::size_t ratio) {
  require_ratio(grid.channels, ratio, "local relation");
  return grid.channels / ratio;
}

LocalRelationParams LocalRelationParams::create(const WindowGrid& grid, std::size_t ratio, std::size_t depth, Rng& rng,
                                                bool zero_unsqueeze) {
  LocalRelationParams p;
  static_cast<RelationParams&>(p) =
      make_params(grid.channels, ratio, node_dim(grid, ratio), depth, rng, zero_unsqueeze);
  return p;
}

std::size_t LocalRelationParams::expected_parameter_count(const WindowGrid& grid, std::size_t ratio,
                                                          std::size_t depth) {
  const std::size_t d = node_dim(grid, ratio);
  return 2 * grid.channels * (grid.channels / ratio) + depth * d * d;
}

Tensor global_relation(const Tensor& x, const WindowGrid& grid, const GlobalRelationParams& params,
                       const GraphConfig& config) {
  require_params(x, grid, params, "global_relation");
  const std::size_t reduced = params.reduced_channels();
  const WindowGrid squeezed_grid = grid.with_channels(reduced);

  Tensor squeezed = conv2d(x, params.squeeze);
  Tensor nodes = flatten_nodes(partition(squeezed, squeezed_grid));
  Tensor related = run_graph(nodes, params.graph, config);
  Tensor restored = merge(unflatten_nodes(related, reduced, grid.window_height(), grid.window_width()), squeezed_grid);
  return add(x, conv2d(restored, params.unsqueeze));
}

Tensor local_relation(const Tensor& x, const WindowGrid& grid, const LocalRelationParams& params,
                      const GraphConfig& config) {
  require_params(x, grid, params, "local_relation");
  const WindowGrid squeezed_grid = grid.with_channels(params.reduced_channels());

  Tensor squeezed = conv2d(x, params.squeeze);
  Tensor pixel_nodes = window_tokens(squeezed, squeezed_grid);  // one graph per window
  Tensor related = run_graph(pixel_nodes, params.graph, config);
  Tensor restored = merge_tokens(related, squeezed_grid);
  return add(x, conv2d(restored, params.unsqueeze));
}

Tensor graph_transformer_block(const Tensor& x, const WindowGrid& grid, const GlobalRelationParams& gr,
                               const LocalRelationParams& lr, FusionType fusion, const GraphConfig& config) {
  switch (fusion) {
    case FusionType::gr_then_lr:
      return local_relation(global_relation(x, grid, gr, config), grid, lr, config);
    case FusionType::lr_then_gr:
      return global_relation(local_relation(x, grid, lr, config), grid, gr, config);
    case FusionType::parallel: {
      Tensor global = global_relation(x, grid, gr, config);
      Tensor local = local_relation(x, grid, lr, config);
      return add(add(x, sub(global, x)), sub(local, x));
    }
  }
  throw std::invalid_argument("unknown fusion type");
}

std::size_t graph_transformer_parameter_count(const WindowGrid& grid, std::size_t r_gr, std::size_t r_lr,
                                              std::size_t depth) {
  return GlobalRelationParams::expected_parameter_count(grid, r_gr, depth) +
         LocalRelationParams::expected_parameter_count(grid, r_lr, depth);
}

}  // namespace gseg
