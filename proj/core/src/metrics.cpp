#include "gseg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "gseg/segmenter.hpp"

namespace gseg {

void ConfusionMatrix::add(const LabelMap& predicted, const LabelMap& target) {
  if (predicted.height != target.height || predicted.width != target.width) {
    throw std::invalid_argument("confusion matrix: prediction and target sizes differ");
  }
  for (std::size_t p = 0; p < target.size(); ++p) {
    const auto t = target.values[p];
    const auto q = predicted.values[p];
    if (t < 0 || q < 0 || static_cast<std::size_t>(t) >= classes || static_cast<std::size_t>(q) >= classes) {
      throw std::out_of_range("confusion matrix: label outside [0, " + std::to_string(classes) + ")");
    }
    ++counts[static_cast<std::size_t>(t) * classes + static_cast<std::size_t>(q)];
  }
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

MiouReport miou_from_confusion(const ConfusionMatrix& confusion) {
  MiouReport report;
  report.confusion = confusion;
  const std::size_t C = confusion.classes;
  report.iou.resize(C);
  // Extended precision so the rounded mean matches the exact rational where possible.
  long double iou_sum = 0.0L;
  std::size_t defined = 0;
  std::uint64_t correct = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const std::uint64_t tp = confusion.at(c, c);
    std::uint64_t fp = 0, fn = 0;
    for (std::size_t o = 0; o < C; ++o) {
      if (o == c) continue;
      fp += confusion.at(o, c);
      fn += confusion.at(c, o);
    }
    correct += tp;
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    report.iou[c] = iou;
    iou_sum += static_cast<long double>(tp) / static_cast<long double>(denom);
    ++defined;
  }
  report.mean = defined ? static_cast<double>(iou_sum / static_cast<long double>(defined)) : 0.0;
  const std::uint64_t total = confusion.total();
  report.pixel_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return report;
}

MiouReport compute_miou(std::span<const LabelMap> predicted, std::span<const LabelMap> target, std::size_t classes) {
  if (predicted.size() != target.size()) throw std::invalid_argument("compute_miou: list lengths differ");
  if (target.empty()) throw std::invalid_argument("compute_miou: empty dataset");
  ConfusionMatrix confusion(classes);
  for (std::size_t i = 0; i < target.size(); ++i) confusion.add(predicted[i], target[i]);
  return miou_from_confusion(confusion);
}

std::vector<std::uint8_t> boundary_band(const LabelMap& target, std::size_t band) {
  if (band < 1) throw std::invalid_argument("boundary band must be at least 1 pixel");
  const std::size_t H = target.height, W = target.width;
  std::vector<std::uint8_t> in_band(H * W, 0);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const auto label = target.at(y, x);
      const std::size_t y0 = y >= band ? y - band : 0, y1 = std::min(H - 1, y + band);
      const std::size_t x0 = x >= band ? x - band : 0, x1 = std::min(W - 1, x + band);
      bool near = false;
      for (std::size_t yy = y0; yy <= y1 && !near; ++yy)
        for (std::size_t xx = x0; xx <= x1 && !near; ++xx) near = target.at(yy, xx) != label;
      in_band[y * W + x] = near ? 1 : 0;
    }
  }
  return in_band;
}

std::optional<double> boundary_band_accuracy(const LabelMap& predicted, const LabelMap& target, std::size_t band) {
  if (predicted.height != target.height || predicted.width != target.width) {
    throw std::invalid_argument("boundary_band_accuracy: prediction and target sizes differ");
  }
  const auto in_band = boundary_band(target, band);
  std::size_t total = 0, correct = 0;
  for (std::size_t p = 0; p < in_band.size(); ++p) {
    if (!in_band[p]) continue;
    ++total;
    if (predicted.values[p] == target.values[p]) ++correct;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

EvalReport evaluate_miou(const Segmenter& model, const Dataset& dataset, std::size_t band) {
  if (dataset.empty()) throw std::invalid_argument("evaluate_miou: empty dataset");
  ConfusionMatrix confusion(model.config().num_classes);
  std::size_t band_total = 0, band_correct = 0;
  for (const Sample& s : dataset) {
    const LabelMap pred = model.predict(s.image);
    confusion.add(pred, s.labels);
    const auto in_band = boundary_band(s.labels, band);
    for (std::size_t p = 0; p < in_band.size(); ++p) {
      if (!in_band[p]) continue;
      ++band_total;
      if (pred.values[p] == s.labels.values[p]) ++band_correct;
    }
  }
  EvalReport report;
  report.miou = miou_from_confusion(confusion);
  report.boundary_pixels = band_total;
  if (band_total) report.boundary_accuracy = static_cast<double>(band_correct) / static_cast<double>(band_total);
  return report;
}

void write_iou_csv(const std::filesystem::path& path, const MiouReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "class_id,iou\n";
  char buf[64];
  for (std::size_t c = 0; c < report.iou.size(); ++c) {
    if (report.iou[c]) {
      std::snprintf(buf, sizeof buf, "%.17g", *report.iou[c]);
      out << c << ',' << buf << '\n';
    } else {
      out << c << ",nan\n";
    }
  }
}

}  // namespace gseg
