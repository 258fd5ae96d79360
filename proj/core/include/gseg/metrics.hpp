#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gseg/dataset.hpp"
#include "gseg/labels.hpp"

namespace gseg {

/// counts[target * classes + predicted].
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t num_classes) : classes(num_classes), counts(num_classes * num_classes, 0) {}

  void add(const LabelMap& predicted, const LabelMap& target);
  std::uint64_t at(std::size_t target, std::size_t predicted) const { return counts[target * classes + predicted]; }
  std::uint64_t total() const;
};

struct MiouReport {
  /// IoU_c = TP / (TP + FP + FN); empty when class c appears in neither
  /// prediction nor target.
  std::vector<std::optional<double>> iou;
  /// Mean over classes with a defined IoU.
  double mean = 0.0;
  double pixel_accuracy = 0.0;
  ConfusionMatrix confusion{0};
};

MiouReport miou_from_confusion(const ConfusionMatrix& confusion);
MiouReport compute_miou(std::span<const LabelMap> predicted, std::span<const LabelMap> target, std::size_t classes);

/// Pixels within Chebyshev distance `band` of a pixel carrying a different
/// target label.
std::vector<std::uint8_t> boundary_band(const LabelMap& target, std::size_t band);

/// Accuracy over the boundary band; empty when the band has no pixels.
std::optional<double> boundary_band_accuracy(const LabelMap& predicted, const LabelMap& target, std::size_t band);

struct EvalReport {
  MiouReport miou;
  std::optional<double> boundary_accuracy;  // pooled over the dataset
  std::size_t boundary_pixels = 0;
};

/// Throws std::invalid_argument on an empty dataset.
EvalReport evaluate_miou(const Segmenter& model, const Dataset& dataset, std::size_t band = 1);

/// `class_id,iou` rows; undefined IoUs are written as `nan`.
void write_iou_csv(const std::filesystem::path& path, const MiouReport& report);

}  // namespace gseg
