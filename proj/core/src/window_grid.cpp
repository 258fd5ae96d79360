#include "gseg/window_grid.hpp"

#include <string>
#include <vector>

#include "gseg/ops.hpp"

namespace gseg {

WindowGrid WindowGrid::create(std::size_t channels, std::size_t height, std::size_t width, std::size_t rows,
                              std::size_t cols) {
  if (rows == 0 || cols == 0) throw ShapeError("window grid needs at least one window per axis");
  if (height % rows != 0) {
    throw ShapeError("window grid: M=" + std::to_string(rows) + " does not divide H=" + std::to_string(height));
  }
  if (width % cols != 0) {
    throw ShapeError("window grid: N=" + std::to_string(cols) + " does not divide W=" + std::to_string(width));
  }
  return WindowGrid{channels, height, width, rows, cols};
}

WindowGrid WindowGrid::with_channels(std::size_t c) const {
  WindowGrid g = *this;
  g.channels = c;
  return g;
}

std::size_t WindowGrid::node_index(std::size_t m, std::size_t n) const {
  if (m < 1 || m > rows || n < 1 || n > cols) throw std::out_of_range("window position outside the grid");
  return (m - 1) * cols + n;
}

std::pair<std::size_t, std::size_t> WindowGrid::node_position(std::size_t i) const {
  if (i < 1 || i > node_count()) throw std::out_of_range("node index outside the grid");
  return {(i - 1) / cols + 1, (i - 1) % cols + 1};
}

namespace {

void require_map(const Tensor& x, const WindowGrid& grid, const char* op) {
  if (x.rank() != 3 || x.dim(0) != grid.channels || x.dim(1) != grid.height || x.dim(2) != grid.width) {
    throw ShapeError(std::string(op) + ": feature map " + shape_to_string(x.shape()) + " does not match grid " +
                     shape_to_string({grid.channels, grid.height, grid.width}));
  }
}

// Flat offset in the C x H x W map of channel c, window i (0-based), in-window (y, x).
std::size_t map_offset(const WindowGrid& g, std::size_t c, std::size_t i, std::size_t y, std::size_t x) {
  const std::size_t row = (i / g.cols) * g.window_height() + y;
  const std::size_t col = (i % g.cols) * g.window_width() + x;
  return (c * g.height + row) * g.width + col;
}

}  // namespace

Tensor partition(const Tensor& x, const WindowGrid& grid) {
  require_map(x, grid, "partition");
  const std::size_t K = grid.node_count(), C = grid.channels, hw = grid.window_height(), ww = grid.window_width();
  std::vector<std::size_t> index;
  index.reserve(x.numel());
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < hw; ++y)
        for (std::size_t xx = 0; xx < ww; ++xx) index.push_back(map_offset(grid, c, i, y, xx));
  return gather(x, {K, C, hw, ww}, std::move(index));
}

Tensor merge(const Tensor& windows, const WindowGrid& grid) {
  const std::size_t K = grid.node_count(), C = grid.channels, hw = grid.window_height(), ww = grid.window_width();
  if (windows.shape() != Shape{K, C, hw, ww}) {
    throw ShapeError("merge: windows " + shape_to_string(windows.shape()) + " inconsistent with grid (expected " +
                     shape_to_string({K, C, hw, ww}) + ")");
  }
  std::vector<std::size_t> index(windows.numel());
  std::size_t src = 0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < hw; ++y)
        for (std::size_t xx = 0; xx < ww; ++xx) index[map_offset(grid, c, i, y, xx)] = src++;
  return gather(windows, {C, grid.height, grid.width}, std::move(index));
}

Tensor flatten_nodes(const Tensor& windows) {
  if (windows.rank() != 4) throw ShapeError("flatten_nodes: expected [K x C x h x w], got " + shape_to_string(windows.shape()));
  const std::size_t K = windows.dim(0);
  const std::size_t D = windows.dim(1) * windows.dim(2) * windows.dim(3);
  return reshape(windows, {K, D});
}

Tensor unflatten_nodes(const Tensor& nodes, std::size_t channels, std::size_t window_height, std::size_t window_width) {
  if (nodes.rank() != 2 || nodes.dim(1) != channels * window_height * window_width) {
    throw ShapeError("unflatten_nodes: " + shape_to_string(nodes.shape()) + " does not split into " +
                     shape_to_string({channels, window_height, window_width}));
  }
  return reshape(nodes, {nodes.dim(0), channels, window_height, window_width});
}

Tensor window_tokens(const Tensor& x, const WindowGrid& grid) {
  require_map(x, grid, "window_tokens");
  const std::size_t K = grid.node_count(), C = grid.channels, hw = grid.window_height(), ww = grid.window_width();
  std::vector<std::size_t> index;
  index.reserve(x.numel());
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t y = 0; y < hw; ++y)
      for (std::size_t xx = 0; xx < ww; ++xx)
        for (std::size_t c = 0; c < C; ++c) index.push_back(map_offset(grid, c, i, y, xx));
  return gather(x, {K, hw * ww, C}, std::move(index));
}

Tensor merge_tokens(const Tensor& tokens, const WindowGrid& grid) {
  const std::size_t K = grid.node_count(), C = grid.channels, hw = grid.window_height(), ww = grid.window_width();
  if (tokens.shape() != Shape{K, hw * ww, C}) {
    throw ShapeError("merge_tokens: tokens " + shape_to_string(tokens.shape()) + " inconsistent with grid");
  }
  std::vector<std::size_t> index(tokens.numel());
  std::size_t src = 0;
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t y = 0; y < hw; ++y)
      for (std::size_t xx = 0; xx < ww; ++xx)
        for (std::size_t c = 0; c < C; ++c) index[map_offset(grid, c, i, y, xx)] = src++;
  return gather(tokens, {C, grid.height, grid.width}, std::move(index));
}

}  // namespace gseg
