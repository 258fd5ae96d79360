#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "gseg/labels.hpp"
#include "gseg/segmenter.hpp"
#include "gseg/tensor.hpp"

namespace gseg {

/// One disc painted by the blobs generator, in pixel units. A pixel (y, x)
/// is covered when its centre (y + 0.5, x + 0.5) lies within `radius`.
struct Disc {
  double center_y = 0.0;
  double center_x = 0.0;
  double radius = 0.0;
  std::int32_t label = 0;
};

struct Sample {
  Tensor image;  // [3 x H x W], values in [0, 1]
  LabelMap labels;
  /// Generator record: the painted discs (blobs, in paint order over a
  /// class-0 background), or the band/cell size and class phase
  /// (stripes, checker).
  std::vector<Disc> discs;
  std::size_t period = 0;
  std::size_t phase = 0;
};

using Dataset = std::vector<Sample>;

/// Deterministic synthetic segmentation data.
///  - stripes: horizontal bands of height `period`; row y has class
///    (phase + y / period) mod classes.
///  - checker: square cells of side `period`; class (phase + y/period + x/period) mod classes.
///  - blobs: 1-3 discs of classes 1..classes-1 on a class-0 background.
/// Each class has a fixed colour; pixels get uniform noise of amplitude
/// `noise` and are clamped to [0, 1].
Dataset synth_dataset(DatasetKind kind, std::size_t count, std::size_t height, std::size_t width,
                      std::size_t num_classes, std::uint64_t seed, double noise = 0.1);

/// Train and held-out splits for a config; the held-out split uses a seed
/// stream disjoint from the training split.
Dataset training_set(const SegmenterConfig& config);
Dataset test_set(const SegmenterConfig& config);

std::array<double, 3> class_color(std::int32_t label);

/// True if the disc covers pixel (y, x).
bool disc_covers(const Disc& disc, std::size_t y, std::size_t x);

}  // namespace gseg
