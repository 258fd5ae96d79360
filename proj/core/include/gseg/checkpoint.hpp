#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gseg/segmenter.hpp"
#include "gseg/tensor.hpp"

namespace gseg {

// Layout (all integers little-endian):
//   "WGTS" | version u16 | count u32
//   count x { name_len u16 | name | dtype u8 | rank u8 | extents u64[rank] | offset u64 | length u64 }
//   blob: float64 little-endian IEEE-754, offsets relative to the blob start.
inline constexpr char kCheckpointMagic[4] = {'W', 'G', 'T', 'S'};
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kDtypeFloat64 = 0;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, unsupported_version, truncated, malformed, manifest_mismatch };

  CheckpointError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter> params);
std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Segmenter& model, const std::filesystem::path& path);

/// Loads into an existing model. The manifest must list exactly the model's
/// parameters (names, order and shapes); on any error the model is untouched.
void load_checkpoint(const std::filesystem::path& path, Segmenter& model);

/// Builds a model from `config` and loads the checkpoint into it.
Segmenter load_checkpoint(const std::filesystem::path& path, const SegmenterConfig& config);

}  // namespace gseg
