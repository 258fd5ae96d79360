#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gseg/rng.hpp"
#include "gseg/tensor.hpp"

namespace gseg {

enum class RelationVariant { cosine, softmax };

/// Node affinities for one graph ([K x K]) or a batch of independent graphs
/// ([B x K x K]). After sparsify() the values hold r_ij where r_ij > theta
/// and exactly 0 elsewhere, and `mask` records which entries were kept.
struct RelationMatrix {
  Tensor values;
  RelationVariant variant = RelationVariant::softmax;
  std::optional<std::vector<std::uint8_t>> mask;
  std::vector<double> thetas;  // one per graph, set by sparsify()

  std::size_t graph_count() const { return values.rank() == 3 ? values.dim(0) : 1; }
  std::size_t node_count() const { return values.dim(values.rank() - 1); }
  /// Threshold of a single-graph matrix.
  double theta() const;
  /// Number of kept entries; K*K*B when no mask has been applied.
  std::size_t kept_edges() const;
};

/// One learnable graph convolution X W^(l). Weights are square (D x D).
struct GraphLayer {
  Tensor weight;
  std::size_t layer_index = 0;

  static GraphLayer identity(std::size_t dim, std::size_t layer_index);
  /// Identity plus uniform noise of amplitude `jitter / sqrt(dim)`.
  static GraphLayer random(std::size_t dim, std::size_t layer_index, Rng& rng, double jitter = 0.1);
};

struct GraphConfig {
  RelationVariant variant = RelationVariant::softmax;
  /// theta = c * mean(R), recomputed on every forward pass.
  double theta_coefficient = 0.25;
  /// Route propagation through the mask-driven sparse kernel instead of a
  /// dense product with the masked matrix. Both give identical values.
  bool sparse_propagation = true;
};

/// r_ij = <x_i, x_j> / (|x_i| |x_j|). A zero row relates to nothing but
/// itself: r_ii = 1, r_ij = 0. Diagonal of nonzero rows is exactly 1.
/// nodes: [K x D] or [B x K x D].
RelationMatrix relation_cosine(const Tensor& nodes);
/// softmax_rows(X X^T), per graph.
RelationMatrix relation_softmax(const Tensor& nodes);
RelationMatrix build_relation(const Tensor& nodes, RelationVariant variant);

/// c times the mean of all K^2 entries of a single [K x K] matrix.
double make_theta(const Tensor& values, double coefficient = 0.25);
/// One threshold per graph of a [K x K] or [B x K x K] matrix.
std::vector<double> make_thetas(const Tensor& values, double coefficient);

/// Keeps r_ij where r_ij > theta. The mask is a constant for differentiation.
RelationMatrix sparsify(const RelationMatrix& rel, double theta);
RelationMatrix sparsify(const RelationMatrix& rel, std::span<const double> thetas);

/// x_i' = sum_j r_ij x_j over kept edges, walking only the kept entries.
Tensor node_update_sparse(const RelationMatrix& rel, const Tensor& nodes);
/// Same result as a dense (masked) matrix product.
Tensor node_update_dense(const RelationMatrix& rel, const Tensor& nodes);
/// Sparse kernel when a mask is present, dense product otherwise.
Tensor node_update(const RelationMatrix& rel, const Tensor& nodes);

/// nodes [.. x K x D] times the layer weight [D x D'].
Tensor graph_conv(const Tensor& nodes, const GraphLayer& layer);

/// One round: relation -> sparsify(c * mean) -> node_update -> graph_conv.
Tensor graph_round(const Tensor& nodes, const GraphLayer& layer, const GraphConfig& config);
/// L rounds, with the relation rebuilt from the current nodes each time.
Tensor run_graph(const Tensor& nodes, std::span<const GraphLayer> layers, const GraphConfig& config);

/// Records a fingerprint of every sparsity mask built on this thread while
/// alive. Finite-difference checks use it to reject samples whose
/// perturbation flips an edge across the threshold.
class MaskTrace {
 public:
  MaskTrace();
  ~MaskTrace();
  MaskTrace(const MaskTrace&) = delete;
  MaskTrace& operator=(const MaskTrace&) = delete;

  std::uint64_t fingerprint() const { return hash_; }
  std::size_t masks_seen() const { return count_; }
  void reset() {
    hash_ = kOffset;
    count_ = 0;
  }

  static void record(std::span<const std::uint8_t> mask);

 private:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  std::uint64_t hash_ = kOffset;
  std::size_t count_ = 0;
  MaskTrace* previous_ = nullptr;
};

}  // namespace gseg
