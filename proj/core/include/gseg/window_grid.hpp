#pragma once

#include <cstddef>
#include <utility>

#include "gseg/tensor.hpp"

namespace gseg {

/// Partition of a C x H x W feature map into M x N non-overlapping windows.
///
/// Window (m, n), 1-based, has node index i = (m - 1) * N + n. Storage is
/// 0-based: node i lives at row i - 1 of every node-major tensor.
struct WindowGrid {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t rows = 0;  // M
  std::size_t cols = 0;  // N

  /// Throws ShapeError unless M divides H and N divides W.
  static WindowGrid create(std::size_t channels, std::size_t height, std::size_t width, std::size_t rows,
                           std::size_t cols);

  std::size_t window_height() const { return height / rows; }
  std::size_t window_width() const { return width / cols; }
  std::size_t window_pixels() const { return window_height() * window_width(); }
  std::size_t node_count() const { return rows * cols; }

  WindowGrid with_channels(std::size_t c) const;

  /// 1-based (m, n) -> 1-based i.
  std::size_t node_index(std::size_t m, std::size_t n) const;
  /// 1-based i -> 1-based (m, n).
  std::pair<std::size_t, std::size_t> node_position(std::size_t i) const;
};

/// [C x H x W] -> [K x C x h_w x w_w].
Tensor partition(const Tensor& x, const WindowGrid& grid);
/// [K x C x h_w x w_w] -> [C x H x W]; exact inverse of partition.
Tensor merge(const Tensor& windows, const WindowGrid& grid);

/// [K x C' x h_w x w_w] -> [K x (C' h_w w_w)], row i is window i flattened row-major.
Tensor flatten_nodes(const Tensor& windows);
/// Inverse of flatten_nodes given the per-window extents.
Tensor unflatten_nodes(const Tensor& nodes, std::size_t channels, std::size_t window_height, std::size_t window_width);

/// Pixel-node view: [C x H x W] -> [K x (h_w w_w) x C]; token t of window i is
/// pixel (t / w_w, t % w_w) of that window.
Tensor window_tokens(const Tensor& x, const WindowGrid& grid);
/// Inverse of window_tokens.
Tensor merge_tokens(const Tensor& tokens, const WindowGrid& grid);

}  // namespace gseg
