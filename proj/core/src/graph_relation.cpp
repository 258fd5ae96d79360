#include "gseg/graph_relation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gseg/ops.hpp"

namespace gseg {

namespace {

thread_local MaskTrace* active_trace = nullptr;

struct GraphDims {
  std::size_t batch;
  std::size_t nodes;
  std::size_t features;
};

GraphDims node_dims(const Tensor& nodes, const char* op) {
  if (nodes.rank() == 2) return {1, nodes.dim(0), nodes.dim(1)};
  if (nodes.rank() == 3) return {nodes.dim(0), nodes.dim(1), nodes.dim(2)};
  throw ShapeError(std::string(op) + ": nodes must be [K x D] or [B x K x D], got " + shape_to_string(nodes.shape()));
}

void require_relation_for(const RelationMatrix& rel, const GraphDims& d, const char* op) {
  const Shape expected = rel.values.rank() == 3 ? Shape{d.batch, d.nodes, d.nodes} : Shape{d.nodes, d.nodes};
  const bool batch_ok = rel.values.rank() == 3 || d.batch == 1;
  if (!batch_ok || rel.values.shape() != expected) {
    throw ShapeError(std::string(op) + ": relation " + shape_to_string(rel.values.shape()) +
                     " does not match nodes with K=" + std::to_string(d.nodes) + ", B=" + std::to_string(d.batch));
  }
}

}  // namespace

double RelationMatrix::theta() const {
  if (thetas.size() != 1) throw std::logic_error("theta(): matrix has not been sparsified as a single graph");
  return thetas.front();
}

std::size_t RelationMatrix::kept_edges() const {
  if (!mask) return values.numel();
  return static_cast<std::size_t>(std::count(mask->begin(), mask->end(), std::uint8_t{1}));
}

GraphLayer GraphLayer::identity(std::size_t dim, std::size_t layer_index) {
  std::vector<double> w(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) w[i * dim + i] = 1.0;
  return GraphLayer{Tensor::from_data({dim, dim}, std::move(w), true), layer_index};
}

GraphLayer GraphLayer::random(std::size_t dim, std::size_t layer_index, Rng& rng, double jitter) {
  GraphLayer layer = identity(dim, layer_index);
  const double amp = jitter / std::sqrt(static_cast<double>(dim));
  for (double& v : layer.weight.mutable_data()) v += rng.uniform(-amp, amp);
  return layer;
}

RelationMatrix relation_cosine(const Tensor& nodes) {
  const GraphDims d = node_dims(nodes, "relation_cosine");
  const std::size_t K = d.nodes, D = d.features;
  const double* x = nodes.data().data();
  std::vector<double> norms(d.batch * K);
  for (std::size_t n = 0; n < d.batch * K; ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < D; ++k) s += x[n * D + k] * x[n * D + k];
    norms[n] = std::sqrt(s);
  }
  std::vector<double> r(d.batch * K * K, 0.0);
  for (std::size_t b = 0; b < d.batch; ++b) {
    const double* xb = x + b * K * D;
    const double* nb = norms.data() + b * K;
    double* rb = r.data() + b * K * K;
    for (std::size_t i = 0; i < K; ++i) {
      rb[i * K + i] = 1.0;
      if (nb[i] == 0.0) continue;
      for (std::size_t j = i + 1; j < K; ++j) {
        if (nb[j] == 0.0) continue;
        double dot = 0.0;
        for (std::size_t k = 0; k < D; ++k) dot += xb[i * D + k] * xb[j * D + k];
        const double v = std::clamp(dot / (nb[i] * nb[j]), -1.0, 1.0);
        rb[i * K + j] = v;
        rb[j * K + i] = v;
      }
    }
  }
  Shape shape = nodes.rank() == 3 ? Shape{d.batch, K, K} : Shape{K, K};
  auto values = r;
  Tensor out = Tensor::make_result(
      std::move(shape), std::move(r), {nodes},
      [nodes, d, norms = std::move(norms), values = std::move(values)](std::span<const double> g) {
        Tensor t = nodes;
        auto gx = t.mutable_grad();
        const std::size_t K = d.nodes, D = d.features;
        const double* x = nodes.data().data();
        for (std::size_t b = 0; b < d.batch; ++b) {
          const double* xb = x + b * K * D;
          const double* nb = norms.data() + b * K;
          const double* rb = values.data() + b * K * K;
          const double* gb = g.data() + b * K * K;
          double* gxb = gx.data() + b * K * D;
          for (std::size_t i = 0; i < K; ++i) {
            if (nb[i] == 0.0) continue;
            for (std::size_t j = 0; j < K; ++j) {
              if (j == i || nb[j] == 0.0) continue;
              // Entry (i, j) depends on x_i and x_j; accumulate both sides.
              const double gij = gb[i * K + j];
              if (gij == 0.0) continue;
              const double inv = 1.0 / (nb[i] * nb[j]);
              const double rij = rb[i * K + j];
              const double si = rij / (nb[i] * nb[i]);
              const double sj = rij / (nb[j] * nb[j]);
              for (std::size_t k = 0; k < D; ++k) {
                gxb[i * D + k] += gij * (xb[j * D + k] * inv - si * xb[i * D + k]);
                gxb[j * D + k] += gij * (xb[i * D + k] * inv - sj * xb[j * D + k]);
              }
            }
          }
        }
      });
  return RelationMatrix{std::move(out), RelationVariant::cosine, std::nullopt, {}};
}

RelationMatrix relation_softmax(const Tensor& nodes) {
  node_dims(nodes, "relation_softmax");
  Tensor scores = nodes.rank() == 2 ? matmul(nodes, transpose(nodes)) : batched_matmul(nodes, transpose(nodes));
  return RelationMatrix{softmax_rows(scores), RelationVariant::softmax, std::nullopt, {}};
}

RelationMatrix build_relation(const Tensor& nodes, RelationVariant variant) {
  return variant == RelationVariant::cosine ? relation_cosine(nodes) : relation_softmax(nodes);
}

double make_theta(const Tensor& values, double coefficient) {
  if (values.rank() != 2 || values.dim(0) != values.dim(1) || values.dim(0) == 0) {
    throw ShapeError("make_theta: expected a non-empty [K x K] matrix, got " + shape_to_string(values.shape()));
  }
  return make_thetas(values, coefficient).front();
}

std::vector<double> make_thetas(const Tensor& values, double coefficient) {
  const std::size_t K = values.dim(values.rank() - 1);
  const std::size_t per_graph = K * K;
  if (per_graph == 0) throw ShapeError("make_thetas: empty relation matrix");
  const std::size_t graphs = values.numel() / per_graph;
  std::vector<double> thetas(graphs);
  const auto v = values.data();
  for (std::size_t b = 0; b < graphs; ++b) {
    double total = 0.0;
    for (std::size_t e = 0; e < per_graph; ++e) total += v[b * per_graph + e];
    thetas[b] = coefficient * (total / static_cast<double>(per_graph));
  }
  return thetas;
}

RelationMatrix sparsify(const RelationMatrix& rel, double theta) {
  const double one[] = {theta};
  return sparsify(rel, std::span<const double>(one));
}

RelationMatrix sparsify(const RelationMatrix& rel, std::span<const double> thetas) {
  if (thetas.size() != rel.graph_count()) {
    throw ShapeError("sparsify: " + std::to_string(thetas.size()) + " thresholds for " +
                     std::to_string(rel.graph_count()) + " graphs");
  }
  const std::size_t per_graph = rel.node_count() * rel.node_count();
  const auto v = rel.values.data();
  std::vector<std::uint8_t> mask(v.size());
  std::vector<double> out(v.size());
  for (std::size_t e = 0; e < v.size(); ++e) {
    const bool keep = v[e] > thetas[e / per_graph];
    mask[e] = keep ? 1 : 0;
    out[e] = keep ? v[e] : 0.0;
  }
  MaskTrace::record(mask);
  const Tensor& src = rel.values;
  Tensor values = Tensor::make_result(src.shape(), std::move(out), {src}, [src, mask](std::span<const double> g) {
    Tensor t = src;
    auto gs = t.mutable_grad();
    for (std::size_t e = 0; e < g.size(); ++e) {
      if (mask[e]) gs[e] += g[e];
    }
  });
  return RelationMatrix{std::move(values), rel.variant, std::move(mask),
                        std::vector<double>(thetas.begin(), thetas.end())};
}

Tensor node_update_dense(const RelationMatrix& rel, const Tensor& nodes) {
  const GraphDims d = node_dims(nodes, "node_update");
  require_relation_for(rel, d, "node_update");
  if (nodes.rank() == 2) return matmul(rel.values, nodes);
  return batched_matmul(rel.values, nodes);
}

Tensor node_update_sparse(const RelationMatrix& rel, const Tensor& nodes) {
  const GraphDims d = node_dims(nodes, "node_update");
  require_relation_for(rel, d, "node_update");
  const std::size_t K = d.nodes, D = d.features;

  // Compressed rows of kept edges: (flat relation offset, source node).
  std::vector<std::size_t> row_start(d.batch * K + 1, 0);
  std::vector<std::size_t> edge_entry;
  const auto rv = rel.values.data();
  for (std::size_t row = 0; row < d.batch * K; ++row) {
    for (std::size_t j = 0; j < K; ++j) {
      const std::size_t e = row * K + j;
      const bool keep = rel.mask ? (*rel.mask)[e] != 0 : true;
      if (keep) edge_entry.push_back(e);
    }
    row_start[row + 1] = edge_entry.size();
  }

  const double* x = nodes.data().data();
  std::vector<double> out(d.batch * K * D, 0.0);
  for (std::size_t row = 0; row < d.batch * K; ++row) {
    const std::size_t b = row / K;
    double* o = out.data() + row * D;
    for (std::size_t p = row_start[row]; p < row_start[row + 1]; ++p) {
      const std::size_t e = edge_entry[p];
      const double r = rv[e];
      const double* xj = x + (b * K + e % K) * D;
      for (std::size_t k = 0; k < D; ++k) o[k] += r * xj[k];
    }
  }

  const Tensor& values = rel.values;
  return Tensor::make_result(
      nodes.shape(), std::move(out), {values, nodes},
      [values, nodes, d, row_start = std::move(row_start), edge_entry = std::move(edge_entry)](std::span<const double> g) {
        Tensor tv = values, tn = nodes;
        const std::size_t K = d.nodes, D = d.features;
        const auto rv = values.data();
        const double* x = nodes.data().data();
        double* gv = tv.requires_grad() ? tv.mutable_grad().data() : nullptr;
        double* gx = tn.requires_grad() ? tn.mutable_grad().data() : nullptr;
        for (std::size_t row = 0; row < d.batch * K; ++row) {
          const std::size_t b = row / K;
          const double* gi = g.data() + row * D;
          for (std::size_t p = row_start[row]; p < row_start[row + 1]; ++p) {
            const std::size_t e = edge_entry[p];
            const std::size_t src = b * K + e % K;
            if (gv) {
              double acc = 0.0;
              for (std::size_t k = 0; k < D; ++k) acc += gi[k] * x[src * D + k];
              gv[e] += acc;
            }
            if (gx) {
              for (std::size_t k = 0; k < D; ++k) gx[src * D + k] += rv[e] * gi[k];
            }
          }
        }
      });
}

Tensor node_update(const RelationMatrix& rel, const Tensor& nodes) {
  return rel.mask ? node_update_sparse(rel, nodes) : node_update_dense(rel, nodes);
}

Tensor graph_conv(const Tensor& nodes, const GraphLayer& layer) {
  const GraphDims d = node_dims(nodes, "graph_conv");
  if (layer.weight.rank() != 2 || layer.weight.dim(0) != d.features) {
    throw ShapeError("graph_conv: node dim " + std::to_string(d.features) + " does not match weight " +
                     shape_to_string(layer.weight.shape()));
  }
  if (nodes.rank() == 2) return matmul(nodes, layer.weight);
  const std::size_t out_dim = layer.weight.dim(1);
  Tensor flat = reshape(nodes, {d.batch * d.nodes, d.features});
  return reshape(matmul(flat, layer.weight), {d.batch, d.nodes, out_dim});
}

Tensor graph_round(const Tensor& nodes, const GraphLayer& layer, const GraphConfig& config) {
  RelationMatrix rel = build_relation(nodes, config.variant);
  const std::vector<double> thetas = make_thetas(rel.values, config.theta_coefficient);
  RelationMatrix sparse = sparsify(rel, thetas);
  Tensor updated = config.sparse_propagation ? node_update_sparse(sparse, nodes) : node_update_dense(sparse, nodes);
  return graph_conv(updated, layer);
}

Tensor run_graph(const Tensor& nodes, std::span<const GraphLayer> layers, const GraphConfig& config) {
  if (layers.empty()) throw std::invalid_argument("run_graph: graph depth must be at least 1");
  Tensor current = nodes;
  for (const GraphLayer& layer : layers) current = graph_round(current, layer, config);
  return current;
}

MaskTrace::MaskTrace() : previous_(active_trace) { active_trace = this; }

MaskTrace::~MaskTrace() { active_trace = previous_; }

void MaskTrace::record(std::span<const std::uint8_t> mask) {
  for (MaskTrace* t = active_trace; t != nullptr; t = t->previous_) {
    std::uint64_t h = t->hash_;
    for (std::uint8_t m : mask) {
      h ^= m;
      h *= 0x100000001b3ULL;
    }
    h ^= mask.size();
    h *= 0x100000001b3ULL;
    t->hash_ = h;
    ++t->count_;
  }
}

}  // namespace gseg
