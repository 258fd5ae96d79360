#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gseg/boundary_attention.hpp"
#include "gseg/graph_relation.hpp"
#include "gseg/labels.hpp"
#include "gseg/ops.hpp"
#include "gseg/relation_modules.hpp"
#include "gseg/tensor.hpp"
#include "gseg/window_grid.hpp"

namespace gseg {

/// Raised for any configuration that violates a structural constraint.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DatasetKind { stripes, blobs, checker };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view text);

struct StageSpec {
  std::size_t blocks = 1;
  std::size_t rows = 2;  // M
  std::size_t cols = 2;  // N

  bool operator==(const StageSpec&) const = default;
};

/// Model, data and training knobs of the toy segmenter. Every field is
/// addressable from a config file or a command-line override.
struct SegmenterConfig {
  // Model.
  std::size_t channels = 16;
  std::vector<StageSpec> stages = {{1, 2, 2}, {1, 2, 2}};
  std::size_t num_classes = 3;
  std::size_t mlp_ratio = 4;
  FusionType fusion = FusionType::gr_then_lr;
  std::size_t r_gr = 16;
  std::size_t r_lr = 16;
  std::size_t r_ba = 16;
  double theta_coefficient = 0.25;
  std::size_t graph_depth = 1;
  RelationVariant relation = RelationVariant::softmax;
  bool sparse_propagation = true;
  GeluMode gelu = GeluMode::tanh;
  bool enable_gt = true;
  bool enable_ba = true;
  std::uint64_t seed = 0;

  // Data.
  DatasetKind dataset = DatasetKind::stripes;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t train_samples = 16;
  std::size_t test_samples = 16;
  double noise = 0.1;

  // Training and evaluation.
  std::size_t steps = 500;
  std::size_t batch = 4;
  double learning_rate = 0.1;
  bool two_phase = false;
  std::size_t band = 1;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
  GraphConfig graph_config() const;
};

/// Toy windowed segmenter: 3x3 stem, per stage {window self-attention
/// blocks, optional graph transformer block}, optional boundary-aware
/// attention on the head features, 1x1 classifier.
class Segmenter {
 public:
  explicit Segmenter(const SegmenterConfig& config);

  Segmenter(Segmenter&&) noexcept = default;
  Segmenter& operator=(Segmenter&&) noexcept = default;
  Segmenter(const Segmenter&) = delete;
  Segmenter& operator=(const Segmenter&) = delete;

  /// Backbone output (head input) for an image [3 x H x W].
  Tensor features(const Tensor& image) const;
  /// Class logits [classes x H x W].
  Tensor forward(const Tensor& image) const;
  LabelMap predict(const Tensor& image) const;

  const SegmenterConfig& config() const { return config_; }
  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  std::size_t parameter_count() const { return count_parameters(params_); }

  /// Closed-form counts, independent of any built model.
  static std::size_t baseline_parameter_count(const SegmenterConfig& config);
  static std::size_t graph_transformer_overhead(const SegmenterConfig& config);
  static std::size_t boundary_attention_overhead(const SegmenterConfig& config);
  static std::size_t expected_parameter_count(const SegmenterConfig& config);

 private:
  struct AttentionBlock {
    Tensor wq, wk, wv, wo;    // [C x C]
    Tensor mlp_in, mlp_out;  // 1x1 convs
  };
  struct GraphTransformer {
    GlobalRelationParams gr;
    LocalRelationParams lr;
  };
  struct Stage {
    WindowGrid grid;
    std::vector<AttentionBlock> blocks;
    std::optional<GraphTransformer> gt;
  };

  Tensor attention_block(const Tensor& x, const WindowGrid& grid, const AttentionBlock& block) const;

  SegmenterConfig config_;
  Tensor stem_;
  std::vector<Stage> stages_;
  std::optional<BAParams> ba_;
  Tensor head_;
  std::vector<Parameter> params_;
};

/// argmax over the class axis of [classes x H x W] logits; ties go to the
/// lower class id.
LabelMap argmax_labels(const Tensor& logits);

}  // namespace gseg
