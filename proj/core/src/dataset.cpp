#include "gseg/dataset.hpp"

#include <algorithm>

#include "gseg/rng.hpp"

namespace gseg {

namespace {

constexpr std::array<std::array<double, 3>, 8> kPalette = {{
    {0.10, 0.10, 0.10},
    {0.90, 0.20, 0.20},
    {0.20, 0.80, 0.25},
    {0.20, 0.30, 0.90},
    {0.90, 0.85, 0.20},
    {0.80, 0.25, 0.85},
    {0.20, 0.85, 0.85},
    {0.95, 0.95, 0.95},
}};

LabelMap stripes(std::size_t H, std::size_t W, std::size_t classes, std::size_t period, std::size_t phase) {
  LabelMap labels(H, W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) labels.at(y, x) = static_cast<std::int32_t>((phase + y / period) % classes);
  return labels;
}

LabelMap checker(std::size_t H, std::size_t W, std::size_t classes, std::size_t period, std::size_t phase) {
  LabelMap labels(H, W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      labels.at(y, x) = static_cast<std::int32_t>((phase + y / period + x / period) % classes);
  return labels;
}

Sample make_sample(DatasetKind kind, std::size_t H, std::size_t W, std::size_t classes, Rng& rng, double noise) {
  Sample s;
  switch (kind) {
    case DatasetKind::stripes:
      s.period = std::max<std::size_t>(1, H / 4);
      s.phase = rng.below(classes);
      s.labels = stripes(H, W, classes, s.period, s.phase);
      break;
    case DatasetKind::checker:
      s.period = std::max<std::size_t>(1, std::min(H, W) / 4);
      s.phase = rng.below(classes);
      s.labels = checker(H, W, classes, s.period, s.phase);
      break;
    case DatasetKind::blobs: {
      s.labels = LabelMap(H, W, 0);
      const double extent = static_cast<double>(std::min(H, W));
      const std::size_t discs = 1 + rng.below(3);
      for (std::size_t d = 0; d < discs; ++d) {
        Disc disc;
        disc.center_y = rng.uniform(0.0, static_cast<double>(H));
        disc.center_x = rng.uniform(0.0, static_cast<double>(W));
        disc.radius = rng.uniform(extent / 6.0, extent / 3.0);
        disc.label = static_cast<std::int32_t>(1 + rng.below(classes - 1));
        for (std::size_t y = 0; y < H; ++y)
          for (std::size_t x = 0; x < W; ++x)
            if (disc_covers(disc, y, x)) s.labels.at(y, x) = disc.label;
        s.discs.push_back(disc);
      }
      break;
    }
  }

  std::vector<double> pixels(3 * H * W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const auto color = class_color(s.labels.at(y, x));
      for (std::size_t c = 0; c < 3; ++c) {
        pixels[(c * H + y) * W + x] = std::clamp(color[c] + rng.uniform(-noise, noise), 0.0, 1.0);
      }
    }
  }
  s.image = Tensor::from_data({3, H, W}, std::move(pixels));
  return s;
}

}  // namespace

std::array<double, 3> class_color(std::int32_t label) {
  if (label >= 0 && static_cast<std::size_t>(label) < kPalette.size()) return kPalette[static_cast<std::size_t>(label)];
  // Beyond the palette: a deterministic hash colour.
  Rng rng(static_cast<std::uint64_t>(label) * 0x9e3779b97f4a7c15ULL);
  return {rng.uniform(), rng.uniform(), rng.uniform()};
}

bool disc_covers(const Disc& disc, std::size_t y, std::size_t x) {
  const double dy = static_cast<double>(y) + 0.5 - disc.center_y;
  const double dx = static_cast<double>(x) + 0.5 - disc.center_x;
  return dy * dy + dx * dx <= disc.radius * disc.radius;
}

Dataset synth_dataset(DatasetKind kind, std::size_t count, std::size_t height, std::size_t width,
                      std::size_t num_classes, std::uint64_t seed, double noise) {
  if (num_classes < 2) throw ConfigError("synthetic datasets need at least two classes");
  Rng root(seed);
  Dataset out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = root.fork();
    out.push_back(make_sample(kind, height, width, num_classes, rng, noise));
  }
  return out;
}

Dataset training_set(const SegmenterConfig& config) {
  return synth_dataset(config.dataset, config.train_samples, config.height, config.width, config.num_classes,
                       config.seed * 2 + 1, config.noise);
}

Dataset test_set(const SegmenterConfig& config) {
  return synth_dataset(config.dataset, config.test_samples, config.height, config.width, config.num_classes,
                       config.seed * 2 + 2, config.noise);
}

}  // namespace gseg
