#include "gseg/train.hpp"

#include <cmath>
#include <string>

#include "gseg/ops.hpp"

namespace gseg {

TrainOptions TrainOptions::from_config(const SegmenterConfig& config) {
  TrainOptions o;
  o.steps = config.steps;
  o.learning_rate = config.learning_rate;
  o.batch = config.batch;
  o.two_phase = config.two_phase;
  return o;
}

std::pair<double, double> dataset_loss_and_accuracy(const Segmenter& model, const Dataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  double loss = 0.0;
  std::size_t correct = 0, total = 0;
  for (const Sample& s : dataset) {
    Tensor logits = model.forward(s.image);
    loss += cross_entropy(logits, s.labels.values).item();
    const LabelMap pred = argmax_labels(logits);
    for (std::size_t p = 0; p < pred.size(); ++p) correct += pred.values[p] == s.labels.values[p];
    total += pred.size();
  }
  return {loss / static_cast<double>(dataset.size()), static_cast<double>(correct) / static_cast<double>(total)};
}

TrainingReport train(Segmenter& model, const Dataset& dataset, const TrainOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (options.batch == 0) throw std::invalid_argument("train: batch must be positive");
  TrainingReport report;
  report.loss_curve.reserve(options.steps);

  auto params = model.parameters();
  zero_grads(params);
  const std::size_t batch = std::min(options.batch, dataset.size());
  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::size_t cursor = 0;

  for (std::size_t step = 0; step < options.steps; ++step) {
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const Sample& s = dataset[cursor];
      cursor = (cursor + 1) % dataset.size();
      Tensor loss = scale(cross_entropy(model.forward(s.image), s.labels.values), inv_batch);
      loss.backward();
      batch_loss += loss.item();
    }
    if (!std::isfinite(batch_loss)) {
      throw TrainingDiverged("non-finite training loss at step " + std::to_string(step) + " (learning rate " +
                             std::to_string(options.learning_rate) + ")");
    }
    report.loss_curve.push_back(batch_loss);

    const bool freeze_ba = options.two_phase && step < options.steps / 2;
    for (Parameter& p : params) {
      bool frozen = freeze_ba && p.name.starts_with("ba.");
      for (const auto& prefix : options.frozen_prefixes) frozen = frozen || p.name.starts_with(prefix);
      if (!frozen) {
        auto w = p.tensor.mutable_data();
        const auto g = p.tensor.mutable_grad();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= options.learning_rate * g[i];
      }
      p.tensor.zero_grad();
    }
  }

  const auto [loss, accuracy] = dataset_loss_and_accuracy(model, dataset);
  if (!std::isfinite(loss)) throw TrainingDiverged("non-finite loss after training");
  report.final_loss = loss;
  report.pixel_accuracy = accuracy;
  return report;
}

}  // namespace gseg
