#include "gseg/segmenter.hpp"

#include <cmath>
#include <string>

#include "gseg/rng.hpp"

namespace gseg {

namespace {

constexpr std::size_t kImageChannels = 3;
constexpr std::size_t kStemKernel = 3;

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return uniform_tensor(std::move(shape), -bound, bound, rng, true);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::stripes:
      return "stripes";
    case DatasetKind::blobs:
      return "blobs";
    case DatasetKind::checker:
      return "checker";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "stripes") return DatasetKind::stripes;
  if (text == "blobs") return DatasetKind::blobs;
  if (text == "checker") return DatasetKind::checker;
  throw ConfigError("unknown dataset kind '" + std::string(text) + "'");
}

void SegmenterConfig::validate() const {
  require(channels >= 1, "channels must be positive");
  require(num_classes >= 2, "num_classes must be at least 2");
  require(num_classes <= 255, "num_classes must fit in a graymap (<= 255)");
  require(mlp_ratio >= 1, "mlp_ratio must be positive");
  require(!stages.empty(), "stages must list at least one stage");
  require(height >= 1 && width >= 1, "height and width must be positive");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& st = stages[s];
    const std::string tag = "stage " + std::to_string(s) + ": ";
    require(st.rows >= 1 && st.cols >= 1, tag + "window counts must be positive");
    require(height % st.rows == 0, tag + "M=" + std::to_string(st.rows) + " must divide height=" + std::to_string(height));
    require(width % st.cols == 0, tag + "N=" + std::to_string(st.cols) + " must divide width=" + std::to_string(width));
  }
  if (enable_gt) {
    require(r_gr >= 1 && channels % r_gr == 0,
            "r_gr=" + std::to_string(r_gr) + " must divide channels=" + std::to_string(channels));
    require(r_lr >= 1 && channels % r_lr == 0,
            "r_lr=" + std::to_string(r_lr) + " must divide channels=" + std::to_string(channels));
    require(graph_depth >= 1, "graph_depth must be at least 1");
  }
  if (enable_ba) {
    require(r_ba >= 1 && channels % r_ba == 0,
            "r_ba=" + std::to_string(r_ba) + " must divide channels=" + std::to_string(channels));
  }
  require(std::isfinite(theta_coefficient), "theta_coefficient must be finite");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, "learning_rate must be positive");
  require(std::isfinite(noise) && noise >= 0.0, "noise must be non-negative");
  require(batch >= 1, "batch must be positive");
  require(train_samples >= 1, "train_samples must be positive");
  require(test_samples >= 1, "test_samples must be positive");
  require(band >= 1, "band must be at least 1");
}

GraphConfig SegmenterConfig::graph_config() const {
  return GraphConfig{relation, theta_coefficient, sparse_propagation};
}

Segmenter::Segmenter(const SegmenterConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const std::size_t C = config_.channels;
  const std::size_t hidden = C * config_.mlp_ratio;

  stem_ = init_uniform({C, kImageChannels, kStemKernel, kStemKernel}, kImageChannels * kStemKernel * kStemKernel, rng);
  params_.push_back({"stem", stem_});

  for (std::size_t s = 0; s < config_.stages.size(); ++s) {
    const StageSpec& spec = config_.stages[s];
    Stage stage{WindowGrid::create(C, config_.height, config_.width, spec.rows, spec.cols), {}, std::nullopt};
    const std::string prefix = "stage" + std::to_string(s);
    for (std::size_t b = 0; b < spec.blocks; ++b) {
      AttentionBlock blk{init_uniform({C, C}, C, rng),          init_uniform({C, C}, C, rng),
                         init_uniform({C, C}, C, rng),          init_uniform({C, C}, C, rng),
                         init_uniform({hidden, C, 1, 1}, C, rng), init_uniform({C, hidden, 1, 1}, hidden, rng)};
      const std::string bp = prefix + ".block" + std::to_string(b);
      params_.push_back({bp + ".attn.wq", blk.wq});
      params_.push_back({bp + ".attn.wk", blk.wk});
      params_.push_back({bp + ".attn.wv", blk.wv});
      params_.push_back({bp + ".attn.wo", blk.wo});
      params_.push_back({bp + ".mlp.in", blk.mlp_in});
      params_.push_back({bp + ".mlp.out", blk.mlp_out});
      stage.blocks.push_back(std::move(blk));
    }
    if (config_.enable_gt) {
      GraphTransformer gt{GlobalRelationParams::create(stage.grid, config_.r_gr, config_.graph_depth, rng),
                          LocalRelationParams::create(stage.grid, config_.r_lr, config_.graph_depth, rng)};
      gt.gr.append_parameters(prefix + ".gt.gr", params_);
      gt.lr.append_parameters(prefix + ".gt.lr", params_);
      stage.gt = std::move(gt);
    }
    stages_.push_back(std::move(stage));
  }

  if (config_.enable_ba) {
    ba_ = BAParams::create(C, config_.r_ba, rng, true, config_.gelu);
    ba_->append_parameters("ba", params_);
  }
  head_ = init_uniform({config_.num_classes, C, 1, 1}, C, rng);
  params_.push_back({"head", head_});
}

Tensor Segmenter::attention_block(const Tensor& x, const WindowGrid& grid, const AttentionBlock& block) const {
  const std::size_t C = grid.channels;
  const std::size_t K = grid.node_count();
  const std::size_t T = grid.window_pixels();

  Tensor tokens = reshape(window_tokens(x, grid), {K * T, C});
  auto project = [&](const Tensor& w) { return reshape(matmul(tokens, w), {K, T, C}); };
  Tensor q = project(block.wq);
  Tensor k = project(block.wk);
  Tensor v = project(block.wv);
  Tensor attn = softmax_rows(scale(batched_matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(C))));
  Tensor context = reshape(batched_matmul(attn, v), {K * T, C});
  Tensor mixed = merge_tokens(reshape(matmul(context, block.wo), {K, T, C}), grid);
  Tensor h = add(x, mixed);
  Tensor mlp = conv2d(gelu(conv2d(h, block.mlp_in), config_.gelu), block.mlp_out);
  return add(h, mlp);
}

Tensor Segmenter::features(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != kImageChannels || image.dim(1) != config_.height ||
      image.dim(2) != config_.width) {
    throw ShapeError("segmenter expects an image " +
                     shape_to_string({kImageChannels, config_.height, config_.width}) + ", got " +
                     shape_to_string(image.shape()));
  }
  const GraphConfig graph = config_.graph_config();
  Tensor x = conv2d(image, stem_);
  for (const Stage& stage : stages_) {
    for (const AttentionBlock& block : stage.blocks) x = attention_block(x, stage.grid, block);
    if (stage.gt) x = graph_transformer_block(x, stage.grid, stage.gt->gr, stage.gt->lr, config_.fusion, graph);
  }
  return x;
}

Tensor Segmenter::forward(const Tensor& image) const {
  Tensor y = features(image);
  Tensor z = ba_ ? ba_apply(y, *ba_) : y;
  return conv2d(z, head_);
}

LabelMap Segmenter::predict(const Tensor& image) const { return argmax_labels(forward(image)); }

std::size_t Segmenter::baseline_parameter_count(const SegmenterConfig& config) {
  const std::size_t C = config.channels;
  std::size_t blocks = 0;
  for (const auto& s : config.stages) blocks += s.blocks;
  const std::size_t per_block = 4 * C * C + 2 * config.mlp_ratio * C * C;
  return kImageChannels * kStemKernel * kStemKernel * C + blocks * per_block + C * config.num_classes;
}

std::size_t Segmenter::graph_transformer_overhead(const SegmenterConfig& config) {
  if (!config.enable_gt) return 0;
  std::size_t total = 0;
  for (const auto& s : config.stages) {
    const WindowGrid grid = WindowGrid::create(config.channels, config.height, config.width, s.rows, s.cols);
    total += graph_transformer_parameter_count(grid, config.r_gr, config.r_lr, config.graph_depth);
  }
  return total;
}

std::size_t Segmenter::boundary_attention_overhead(const SegmenterConfig& config) {
  return config.enable_ba ? BAParams::expected_parameter_count(config.channels, config.r_ba) : 0;
}

std::size_t Segmenter::expected_parameter_count(const SegmenterConfig& config) {
  return baseline_parameter_count(config) + graph_transformer_overhead(config) + boundary_attention_overhead(config);
}

LabelMap argmax_labels(const Tensor& logits) {
  if (logits.rank() != 3) throw ShapeError("argmax_labels: expected [classes x H x W]");
  const std::size_t classes = logits.dim(0), H = logits.dim(1), W = logits.dim(2);
  const auto v = logits.data();
  LabelMap out(H, W);
  for (std::size_t p = 0; p < H * W; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (v[c * H * W + p] > v[best * H * W + p]) best = c;
    }
    out.values[p] = static_cast<std::int32_t>(best);
  }
  return out;
}

}  // namespace gseg
