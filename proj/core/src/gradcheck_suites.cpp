#include <cmath>

#include "gseg/boundary_attention.hpp"
#include "gseg/dataset.hpp"
#include "gseg/gradcheck.hpp"
#include "gseg/graph_relation.hpp"
#include "gseg/ops.hpp"
#include "gseg/relation_modules.hpp"
#include "gseg/rng.hpp"
#include "gseg/segmenter.hpp"
#include "gseg/window_grid.hpp"

namespace gseg {

namespace {

using CaseBody = std::function<GradCheckResult(std::uint64_t, const GradCheckOptions&)>;

Tensor leaf(Shape shape, Rng& rng) { return uniform_tensor(std::move(shape), -1.0, 1.0, rng, true); }

/// Builds a case from a factory that, given an Rng, returns the inputs to
/// perturb and an op producing a tensor from them.
template <typename Setup>
CaseBody tensor_case(std::string name, Setup setup) {
  return [name, setup](std::uint64_t seed, const GradCheckOptions& options) {
    Rng rng(seed);
    auto [inputs, op] = setup(rng);
    // Scalar probe of a tensor-valued output: sum(out * R) with a fixed random R.
    Rng probe_rng = rng.fork();
    Tensor probe_weights;
    auto loss = [&]() {
      Tensor out = op(inputs);
      if (out.numel() == 1) return out;
      if (!probe_weights.defined()) probe_weights = uniform_tensor(out.shape(), -1.0, 1.0, probe_rng);
      return sum(hadamard(out, probe_weights));
    };
    return check_gradients(name, inputs, loss, options, seed ^ 0x5bd1e995ULL);
  };
}

using Inputs = std::vector<Tensor>;
using Op = std::function<Tensor(const Inputs&)>;

void add_case(std::vector<GradCase>& out, GradScope scope, std::string name, std::function<std::pair<Inputs, Op>(Rng&)> setup) {
  out.push_back(GradCase{name, scope, tensor_case(name, std::move(setup))});
}

void tensor_op_cases(std::vector<GradCase>& out) {
  const auto S = GradScope::tensor_ops;
  add_case(out, S, "add", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r), leaf({10, 12}, r)}, Op([](const Inputs& in) { return add(in[0], in[1]); })};
  });
  add_case(out, S, "sub", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r), leaf({10, 12}, r)}, Op([](const Inputs& in) { return sub(in[0], in[1]); })};
  });
  add_case(out, S, "hadamard", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r), leaf({10, 12}, r)},
                     Op([](const Inputs& in) { return hadamard(in[0], in[1]); })};
  });
  add_case(out, S, "scale", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r)}, Op([](const Inputs& in) { return scale(in[0], -1.7); })};
  });
  add_case(out, S, "sum", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r)}, Op([](const Inputs& in) { return sum(in[0]); })};
  });
  add_case(out, S, "reshape", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r)}, Op([](const Inputs& in) { return reshape(in[0], {4, 30}); })};
  });
  add_case(out, S, "transpose", [](Rng& r) {
    return std::pair{Inputs{leaf({3, 6, 7}, r)}, Op([](const Inputs& in) { return transpose(in[0]); })};
  });
  add_case(out, S, "matmul", [](Rng& r) {
    return std::pair{Inputs{leaf({9, 10}, r), leaf({10, 8}, r)}, Op([](const Inputs& in) { return matmul(in[0], in[1]); })};
  });
  add_case(out, S, "batched_matmul", [](Rng& r) {
    return std::pair{Inputs{leaf({3, 5, 6}, r), leaf({3, 6, 4}, r)},
                     Op([](const Inputs& in) { return batched_matmul(in[0], in[1]); })};
  });
  add_case(out, S, "softmax_rows", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r)}, Op([](const Inputs& in) { return softmax_rows(in[0]); })};
  });
  add_case(out, S, "gelu_tanh", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r)}, Op([](const Inputs& in) { return gelu(in[0], GeluMode::tanh); })};
  });
  add_case(out, S, "gelu_erf", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r)}, Op([](const Inputs& in) { return gelu(in[0], GeluMode::erf); })};
  });
  add_case(out, S, "sigmoid", [](Rng& r) {
    return std::pair{Inputs{leaf({10, 12}, r)}, Op([](const Inputs& in) { return sigmoid(in[0]); })};
  });
  add_case(out, S, "conv2d_k1", [](Rng& r) {
    return std::pair{Inputs{leaf({4, 6, 6}, r), leaf({3, 4, 1, 1}, r)},
                     Op([](const Inputs& in) { return conv2d(in[0], in[1]); })};
  });
  add_case(out, S, "conv2d_k3", [](Rng& r) {
    return std::pair{Inputs{leaf({3, 6, 6}, r), leaf({2, 3, 3, 3}, r)},
                     Op([](const Inputs& in) { return conv2d(in[0], in[1]); })};
  });
  add_case(out, S, "conv2d_k7", [](Rng& r) {
    return std::pair{Inputs{leaf({2, 8, 8}, r), leaf({2, 2, 7, 7}, r)},
                     Op([](const Inputs& in) { return conv2d(in[0], in[1]); })};
  });
  add_case(out, S, "cross_entropy", [](Rng& r) {
    std::vector<std::int32_t> labels(36);
    for (auto& l : labels) l = static_cast<std::int32_t>(r.below(3));
    return std::pair{Inputs{leaf({3, 6, 6}, r)},
                     Op([labels](const Inputs& in) { return cross_entropy(scale(in[0], 2.0), labels); })};
  });
}

void graph_cases(std::vector<GradCase>& out) {
  const auto S = GradScope::graph;
  add_case(out, S, "relation_cosine", [](Rng& r) {
    return std::pair{Inputs{leaf({8, 14}, r)}, Op([](const Inputs& in) { return relation_cosine(in[0]).values; })};
  });
  add_case(out, S, "relation_softmax", [](Rng& r) {
    return std::pair{Inputs{leaf({8, 14}, r)}, Op([](const Inputs& in) { return relation_softmax(in[0]).values; })};
  });
  add_case(out, S, "sparsify", [](Rng& r) {
    return std::pair{Inputs{leaf({8, 14}, r)}, Op([](const Inputs& in) {
                       RelationMatrix rel = relation_softmax(in[0]);
                       return sparsify(rel, make_theta(rel.values, 1.0)).values;
                     })};
  });
  add_case(out, S, "node_update_sparse", [](Rng& r) {
    return std::pair{Inputs{leaf({8, 14}, r)}, Op([](const Inputs& in) {
                       RelationMatrix rel = relation_softmax(in[0]);
                       return node_update_sparse(sparsify(rel, make_theta(rel.values, 1.0)), in[0]);
                     })};
  });
  add_case(out, S, "node_update_dense", [](Rng& r) {
    return std::pair{Inputs{leaf({8, 14}, r)}, Op([](const Inputs& in) {
                       RelationMatrix rel = relation_cosine(in[0]);
                       return node_update_dense(sparsify(rel, make_theta(rel.values, 0.25)), in[0]);
                     })};
  });
  add_case(out, S, "graph_conv", [](Rng& r) {
    GraphLayer layer = GraphLayer::random(14, 0, r, 1.0);
    return std::pair{Inputs{leaf({8, 14}, r), layer.weight}, Op([](const Inputs& in) {
                       return graph_conv(in[0], GraphLayer{in[1], 0});
                     })};
  });
  add_case(out, S, "run_graph_softmax_L2", [](Rng& r) {
    std::vector<GraphLayer> layers{GraphLayer::random(6, 0, r, 1.0), GraphLayer::random(6, 1, r, 1.0)};
    return std::pair{Inputs{leaf({9, 6}, r), layers[0].weight, layers[1].weight}, Op([](const Inputs& in) {
                       std::vector<GraphLayer> ls{{in[1], 0}, {in[2], 1}};
                       return run_graph(in[0], ls, GraphConfig{RelationVariant::softmax, 0.25, true});
                     })};
  });
  add_case(out, S, "run_graph_cosine_L2", [](Rng& r) {
    std::vector<GraphLayer> layers{GraphLayer::random(6, 0, r, 1.0), GraphLayer::random(6, 1, r, 1.0)};
    return std::pair{Inputs{leaf({9, 6}, r), layers[0].weight, layers[1].weight}, Op([](const Inputs& in) {
                       std::vector<GraphLayer> ls{{in[1], 0}, {in[2], 1}};
                       return run_graph(in[0], ls, GraphConfig{RelationVariant::cosine, 0.25, true});
                     })};
  });
  add_case(out, S, "run_graph_batched", [](Rng& r) {
    std::vector<GraphLayer> layers{GraphLayer::random(3, 0, r, 1.0)};
    return std::pair{Inputs{leaf({4, 6, 3}, r), layers[0].weight}, Op([](const Inputs& in) {
                       std::vector<GraphLayer> ls{{in[1], 0}};
                       return run_graph(in[0], ls, GraphConfig{RelationVariant::softmax, 0.25, true});
                     })};
  });
}

Inputs relation_inputs(const Tensor& x, const RelationParams& p) {
  Inputs in{x, p.squeeze, p.unsqueeze};
  for (const auto& l : p.graph) in.push_back(l.weight);
  return in;
}

void module_cases(std::vector<GradCase>& out, GradScope scope) {
  // Toy sizes: C=4, H=W=4, 2x2 windows, ratio 2.
  auto grid = WindowGrid::create(4, 4, 4, 2, 2);
  const GraphConfig config{RelationVariant::softmax, 0.25, true};

  if (scope == GradScope::gr || scope == GradScope::all) {
    add_case(out, GradScope::gr, "global_relation", [grid, config](Rng& r) {
      auto params = std::make_shared<GlobalRelationParams>(GlobalRelationParams::create(grid, 2, 1, r, false));
      Tensor x = leaf({4, 4, 4}, r);
      return std::pair{relation_inputs(x, *params),
                       Op([params, grid, config](const Inputs& in) { return global_relation(in[0], grid, *params, config); })};
    });
    add_case(out, GradScope::gr, "global_relation_cosine_L2", [grid](Rng& r) {
      auto params = std::make_shared<GlobalRelationParams>(GlobalRelationParams::create(grid, 2, 2, r, false));
      Tensor x = leaf({4, 4, 4}, r);
      const GraphConfig cosine{RelationVariant::cosine, 0.25, true};
      return std::pair{relation_inputs(x, *params),
                       Op([params, grid, cosine](const Inputs& in) { return global_relation(in[0], grid, *params, cosine); })};
    });
  }
  if (scope == GradScope::lr || scope == GradScope::all) {
    add_case(out, GradScope::lr, "local_relation", [grid, config](Rng& r) {
      auto params = std::make_shared<LocalRelationParams>(LocalRelationParams::create(grid, 2, 1, r, false));
      Tensor x = leaf({4, 4, 4}, r);
      return std::pair{relation_inputs(x, *params),
                       Op([params, grid, config](const Inputs& in) { return local_relation(in[0], grid, *params, config); })};
    });
  }
  if (scope == GradScope::gt || scope == GradScope::all) {
    for (FusionType fusion : {FusionType::gr_then_lr, FusionType::lr_then_gr, FusionType::parallel}) {
      add_case(out, GradScope::gt, "gt_" + std::string(to_string(fusion)), [grid, config, fusion](Rng& r) {
        auto gr = std::make_shared<GlobalRelationParams>(GlobalRelationParams::create(grid, 2, 1, r, false));
        auto lr = std::make_shared<LocalRelationParams>(LocalRelationParams::create(grid, 2, 1, r, false));
        Tensor x = leaf({4, 4, 4}, r);
        Inputs in = relation_inputs(x, *gr);
        Inputs lr_in = relation_inputs(x, *lr);
        in.insert(in.end(), lr_in.begin() + 1, lr_in.end());
        return std::pair{in, Op([gr, lr, grid, config, fusion](const Inputs& v) {
                           return graph_transformer_block(v[0], grid, *gr, *lr, fusion, config);
                         })};
      });
    }
  }
  if (scope == GradScope::ba || scope == GradScope::all) {
    for (GeluMode mode : {GeluMode::tanh, GeluMode::erf}) {
      const std::string name = mode == GeluMode::tanh ? "ba_apply" : "ba_apply_erf";
      add_case(out, GradScope::ba, name, [mode](Rng& r) {
        auto params = std::make_shared<BAParams>(BAParams::create(4, 2, r, false, mode));
        Tensor y = leaf({4, 6, 6}, r);
        return std::pair{Inputs{y, params->squeeze, params->local, params->unsqueeze},
                         Op([params](const Inputs& in) { return ba_apply(in[0], *params); })};
      });
    }
  }
}

void segmenter_case(std::vector<GradCase>& out) {
  out.push_back(GradCase{"segmenter", GradScope::all, [](std::uint64_t seed, const GradCheckOptions& options) {
                           SegmenterConfig config;
                           config.seed = seed;
                           config.channels = 8;
                           config.r_gr = config.r_lr = config.r_ba = 2;
                           config.mlp_ratio = 2;
                           auto model = std::make_shared<Segmenter>(config);
                           // Leave the zero-initialised restore convs non-zero so every path carries gradient.
                           Rng rng(seed + 17);
                           for (Parameter& p : model->parameters()) {
                             if (p.name.ends_with("unsqueeze")) {
                               for (double& v : p.tensor.mutable_data()) v = rng.uniform(-0.3, 0.3);
                             }
                           }
                           const Dataset data = synth_dataset(DatasetKind::blobs, 1, 8, 8, 3, seed, 0.1);
                           std::vector<Tensor> inputs;
                           for (Parameter& p : model->parameters()) inputs.push_back(p.tensor);
                           const Sample sample = data.front();
                           auto loss = [model, sample]() { return cross_entropy(model->forward(sample.image), sample.labels.values); };
                           return check_gradients("segmenter", inputs, loss, options, seed ^ 0x2545f491ULL);
                         }});
}

}  // namespace

std::vector<GradCase> gradcheck_cases(GradScope scope) {
  std::vector<GradCase> out;
  if (scope == GradScope::tensor_ops || scope == GradScope::all) tensor_op_cases(out);
  if (scope == GradScope::graph || scope == GradScope::all) graph_cases(out);
  module_cases(out, scope);
  if (scope == GradScope::all) segmenter_case(out);
  return out;
}

}  // namespace gseg
