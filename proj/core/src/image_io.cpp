#include "gseg/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gseg {

namespace {

struct Netpbm {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<unsigned char> pixels;
};

std::size_t read_header_number(std::istream& in, const std::string& path) {
  // Skip whitespace and '#' comments between header fields.
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string discard;
      std::getline(in, discard);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      break;
    }
  }
  std::size_t value = 0;
  if (!(in >> value)) throw std::runtime_error(path + ": malformed netpbm header");
  return value;
}

Netpbm read_netpbm(const std::filesystem::path& path, const char* magic, std::size_t channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char m[2] = {};
  in.read(m, 2);
  if (!in || m[0] != magic[0] || m[1] != magic[1]) {
    throw std::runtime_error(path.string() + ": expected netpbm type " + std::string(magic, 2));
  }
  Netpbm img;
  img.width = read_header_number(in, path.string());
  img.height = read_header_number(in, path.string());
  const std::size_t maxval = read_header_number(in, path.string());
  if (maxval != 255) throw std::runtime_error(path.string() + ": only maxval 255 is supported");
  in.get();  // single whitespace before raster
  img.pixels.resize(img.width * img.height * channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw std::runtime_error(path.string() + ": truncated raster");
  return img;
}

void write_netpbm(const std::filesystem::path& path, const char* magic, std::size_t width, std::size_t height,
                  const std::vector<unsigned char>& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << magic << '\n' << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

std::string indexed_name(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", stem, i, ext);
  return buf;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("write_ppm: expected [3 x H x W]");
  const std::size_t H = image.dim(1), W = image.dim(2);
  const auto v = image.data();
  std::vector<unsigned char> pixels(3 * H * W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double level = std::round(std::clamp(v[(c * H + y) * W + x], 0.0, 1.0) * 255.0);
        pixels[(y * W + x) * 3 + c] = static_cast<unsigned char>(level);
      }
  write_netpbm(path, "P6", W, H, pixels);
}

Tensor read_ppm(const std::filesystem::path& path) {
  const Netpbm img = read_netpbm(path, "P6", 3);
  const std::size_t H = img.height, W = img.width;
  std::vector<double> values(3 * H * W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) values[(c * H + y) * W + x] = img.pixels[(y * W + x) * 3 + c] / 255.0;
  return Tensor::from_data({3, H, W}, std::move(values));
}

void write_label_pgm(const std::filesystem::path& path, const LabelMap& labels) {
  std::vector<unsigned char> pixels(labels.size());
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels.values[p] < 0 || labels.values[p] > 255) throw std::out_of_range("label does not fit a graymap");
    pixels[p] = static_cast<unsigned char>(labels.values[p]);
  }
  write_netpbm(path, "P5", labels.width, labels.height, pixels);
}

LabelMap read_label_pgm(const std::filesystem::path& path, std::size_t num_classes) {
  const Netpbm img = read_netpbm(path, "P5", 1);
  LabelMap labels(img.height, img.width);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (img.pixels[p] >= num_classes) {
      throw std::runtime_error(path.string() + ": class id " + std::to_string(img.pixels[p]) + " >= " +
                               std::to_string(num_classes));
    }
    labels.values[p] = img.pixels[p];
  }
  return labels;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    write_ppm(dir / indexed_name("image", i, "ppm"), dataset[i].image);
    write_label_pgm(dir / indexed_name("label", i, "pgm"), dataset[i].labels);
  }
}

Dataset load_dataset(const std::filesystem::path& dir, std::size_t num_classes) {
  Dataset out;
  for (std::size_t i = 0;; ++i) {
    const auto image = dir / indexed_name("image", i, "ppm");
    if (!std::filesystem::exists(image)) break;
    Sample s;
    s.image = read_ppm(image);
    s.labels = read_label_pgm(dir / indexed_name("label", i, "pgm"), num_classes);
    if (s.labels.height != s.image.dim(1) || s.labels.width != s.image.dim(2)) {
      throw std::runtime_error("label map size does not match image " + image.string());
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw std::runtime_error("no image_0000.ppm found in " + dir.string());
  return out;
}

}  // namespace gseg
