#pragma once

#include <cstddef>
#include <filesystem>

#include "gseg/dataset.hpp"
#include "gseg/labels.hpp"
#include "gseg/tensor.hpp"

namespace gseg {

/// Binary PPM (P6, maxval 255). The image is [3 x H x W] in [0, 1];
/// values are rounded to the nearest of 256 levels.
void write_ppm(const std::filesystem::path& path, const Tensor& image);
Tensor read_ppm(const std::filesystem::path& path);

/// Binary PGM (P5, maxval 255) whose gray levels are class ids.
void write_label_pgm(const std::filesystem::path& path, const LabelMap& labels);
/// Rejects gray levels >= num_classes.
LabelMap read_label_pgm(const std::filesystem::path& path, std::size_t num_classes);

/// image_NNNN.ppm / label_NNNN.pgm pairs.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir, std::size_t num_classes);

}  // namespace gseg
