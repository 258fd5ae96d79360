#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gseg/graph_relation.hpp"
#include "gseg/rng.hpp"
#include "gseg/tensor.hpp"
#include "gseg/window_grid.hpp"

namespace gseg {

enum class FusionType { gr_then_lr, lr_then_gr, parallel };

std::string_view to_string(FusionType fusion);
/// Accepts "gr_then_lr", "lr_then_gr", "parallel".
FusionType parse_fusion(std::string_view text);

/// Squeeze / graph / unsqueeze weights of one relation module. The squeeze
/// and unsqueeze maps are 1x1 convolutions [C/r x C x 1 x 1] and
/// [C x C/r x 1 x 1].
struct RelationParams {
  Tensor squeeze;
  Tensor unsqueeze;
  std::vector<GraphLayer> graph;
  std::size_t ratio = 1;

  std::size_t reduced_channels() const { return squeeze.dim(0); }
  std::size_t parameter_count() const;
  void append_parameters(const std::string& prefix, std::vector<Parameter>& out) const;
};

/// Windows as nodes: node dim D = (C / r) * h_w * w_w.
struct GlobalRelationParams : RelationParams {
  /// `zero_unsqueeze` starts the module as an exact identity (residual only).
  static GlobalRelationParams create(const WindowGrid& grid, std::size_t ratio, std::size_t depth, Rng& rng,
                                     bool zero_unsqueeze = true);
  static std::size_t node_dim(const WindowGrid& grid, std::size_t ratio);
  static std::size_t expected_parameter_count(const WindowGrid& grid, std::size_t ratio, std::size_t depth);
};

/// Pixels as nodes inside each window: node dim D = C / r.
struct LocalRelationParams : RelationParams {
  static LocalRelationParams create(const WindowGrid& grid, std::size_t ratio, std::size_t depth, Rng& rng,
                                    bool zero_unsqueeze = true);
  static std::size_t node_dim(const WindowGrid& grid, std::size_t ratio);
  static std::size_t expected_parameter_count(const WindowGrid& grid, std::size_t ratio, std::size_t depth);
};

/// x + unsqueeze(merge(graph(flatten(partition(squeeze(x)))))).
Tensor global_relation(const Tensor& x, const WindowGrid& grid, const GlobalRelationParams& params,
                       const GraphConfig& config);

/// x + unsqueeze(per-window graph over pixel nodes of squeeze(x)). Windows
/// never exchange information.
Tensor local_relation(const Tensor& x, const WindowGrid& grid, const LocalRelationParams& params,
                      const GraphConfig& config);

/// GR_then_LR: LR(GR(x)); LR_then_GR: GR(LR(x));
/// parallel: x + (GR(x) - x) + (LR(x) - x).
Tensor graph_transformer_block(const Tensor& x, const WindowGrid& grid, const GlobalRelationParams& gr,
                               const LocalRelationParams& lr, FusionType fusion, const GraphConfig& config);

/// 2 C^2/r_gr + L D_gr^2 + 2 C^2/r_lr + L D_lr^2.
std::size_t graph_transformer_parameter_count(const WindowGrid& grid, std::size_t r_gr, std::size_t r_lr,
                                              std::size_t depth);

}  // namespace gseg
