#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "gseg/dataset.hpp"
#include "gseg/segmenter.hpp"

namespace gseg {

/// Raised when the loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  std::size_t steps = 500;
  double learning_rate = 0.1;
  std::size_t batch = 4;
  /// First half of the steps leaves the boundary-attention weights frozen.
  bool two_phase = false;
  /// Parameters whose name starts with any of these are never updated.
  std::vector<std::string> frozen_prefixes;

  static TrainOptions from_config(const SegmenterConfig& config);
};

struct TrainingReport {
  /// Mean batch loss before each update.
  std::vector<double> loss_curve;
  /// Mean loss over the whole training set after the last update.
  double final_loss = 0.0;
  double pixel_accuracy = 0.0;
};

/// Plain SGD on mean per-pixel cross-entropy. Batches walk the dataset in
/// order, wrapping around, so a dataset no larger than `batch` is a single
/// fixed batch.
TrainingReport train(Segmenter& model, const Dataset& dataset, const TrainOptions& options);

/// Mean cross-entropy over the dataset and pixel accuracy.
std::pair<double, double> dataset_loss_and_accuracy(const Segmenter& model, const Dataset& dataset);

}  // namespace gseg
