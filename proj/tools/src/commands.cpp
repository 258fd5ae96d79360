#include "gseg_cli/commands.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "gseg/checkpoint.hpp"
#include "gseg/config.hpp"
#include "gseg/dataset.hpp"
#include "gseg/graph_relation.hpp"
#include "gseg/image_io.hpp"
#include "gseg/metrics.hpp"
#include "gseg/rng.hpp"
#include "gseg/train.hpp"

namespace gseg::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

std::filesystem::path prepare_out(const RunConfig& run, const char* fallback) {
  std::filesystem::path dir = run.out_dir.value_or(fallback);
  std::filesystem::create_directories(dir);
  return dir;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

// Tees CSV lines to the console and, if requested, to a file.
class CsvSink {
 public:
  CsvSink(std::ostream* console, const std::optional<std::filesystem::path>& file) : console_(console) {
    if (file) file_ = open_csv(*file);
  }
  void line(const std::string& text) {
    if (console_) *console_ << text << '\n';
    if (file_.is_open()) file_ << text << '\n';
  }

 private:
  std::ostream* console_;
  std::ofstream file_;
};

std::optional<std::filesystem::path> out_file(const RunConfig& run, const char* name) {
  if (!run.out_dir) return std::nullopt;
  std::filesystem::create_directories(*run.out_dir);
  return *run.out_dir / name;
}

struct RunResult {
  EvalReport eval;
  std::size_t params = 0;
};

RunResult train_and_evaluate(const SegmenterConfig& config) {
  Segmenter model(config);
  train(model, training_set(config), TrainOptions::from_config(config));
  return {evaluate_miou(model, test_set(config), config.band), model.parameter_count()};
}

double mean_ms(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double stddev_ms(const std::vector<double>& v) {
  const double m = mean_ms(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(acc / (v.size() - 1)) : 0.0;
}

template <typename F>
std::vector<double> time_reps(std::size_t reps, F&& f) {
  std::vector<double> out;
  out.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    out.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return out;
}

}  // namespace

SegmenterConfig RunConfig::resolve() const {
  SegmenterConfig config = config_path ? load_config(*config_path) : SegmenterConfig{};
  for (const auto& o : overrides) apply_override(config, o);
  if (seed) config.seed = *seed;
  config.validate();
  return config;
}

int cmd_gradcheck(const RunConfig& run, const GradcheckArgs& args, std::span<const GradCase> cases, std::ostream& out,
                  std::ostream& err) {
  const std::uint64_t base = run.seed.value_or(0);
  std::vector<std::uint64_t> seeds(args.seeds);
  std::iota(seeds.begin(), seeds.end(), base);
  GradCheckOptions options;
  options.samples = args.samples;

  const auto results = run_gradcheck(cases, seeds, options);
  CsvSink csv(&out, out_file(run, "gradcheck.csv"));
  csv.line("op,max_rel_err,samples");
  int code = kOk;
  for (const auto& r : results) {
    csv.line(r.op + "," + fmt(r.max_rel_err) + "," + std::to_string(r.samples));
    if (!r.passed()) {
      err << "gradcheck FAILED: " << r.op << " max_rel_err=" << fmt(r.max_rel_err) << " samples=" << r.samples
          << '\n';
      code = kVerificationFailure;
    }
  }
  if (results.empty()) {
    err << "gradcheck: no cases selected\n";
    code = kVerificationFailure;
  }
  return code;
}

int cmd_gradcheck(const RunConfig& run, const GradcheckArgs& args, std::ostream& out, std::ostream& err) {
  const auto cases = gradcheck_cases(args.scope);
  return cmd_gradcheck(run, args, cases, out, err);
}

int cmd_train(const RunConfig& run, const TrainArgs& args, std::ostream& out, std::ostream&) {
  const SegmenterConfig config = run.resolve();
  const std::filesystem::path dir = prepare_out(run, "gseg_run");

  const Dataset train_data = training_set(config);
  const Dataset test_data = test_set(config);
  if (args.export_data) {
    save_dataset(*args.export_data / "train", train_data);
    save_dataset(*args.export_data / "test", test_data);
  }

  Segmenter model(config);
  const TrainingReport report = train(model, train_data, TrainOptions::from_config(config));
  const EvalReport eval = evaluate_miou(model, test_data, config.band);

  save_checkpoint(model, dir / "model.wgts");
  {
    auto f = open_csv(dir / "loss_curve.csv");
    f << "step,loss\n";
    for (std::size_t i = 0; i < report.loss_curve.size(); ++i) f << i << ',' << fmt(report.loss_curve[i]) << '\n';
  }
  write_iou_csv(dir / "metrics.csv", eval.miou);
  {
    auto f = open_csv(dir / "summary.csv");
    f << "key,value\n";
    f << "param_count," << model.parameter_count() << '\n';
    f << "baseline_param_count," << Segmenter::baseline_parameter_count(config) << '\n';
    f << "gt_param_count," << Segmenter::graph_transformer_overhead(config) << '\n';
    f << "ba_param_count," << Segmenter::boundary_attention_overhead(config) << '\n';
    f << "steps," << config.steps << '\n';
    f << "final_loss," << fmt(report.final_loss) << '\n';
    f << "train_pixel_accuracy," << fmt(report.pixel_accuracy) << '\n';
    f << "test_miou," << fmt(eval.miou.mean) << '\n';
    f << "test_pixel_accuracy," << fmt(eval.miou.pixel_accuracy) << '\n';
    f << "test_boundary_accuracy," << fmt_opt(eval.boundary_accuracy) << '\n';
  }
  {
    auto f = open_csv(dir / "config.txt");
    f << format_config(config);
  }
  out << "params=" << model.parameter_count() << " final_loss=" << fmt(report.final_loss)
      << " train_acc=" << fmt(report.pixel_accuracy) << " test_miou=" << fmt(eval.miou.mean)
      << " boundary_acc=" << fmt_opt(eval.boundary_accuracy) << '\n';
  out << "wrote " << dir.string() << "/{model.wgts,loss_curve.csv,metrics.csv,summary.csv}\n";
  return kOk;
}

int cmd_eval(const RunConfig& run, const EvalArgs& args, std::ostream& out, std::ostream&) {
  const SegmenterConfig config = run.resolve();
  const Segmenter model = load_checkpoint(args.checkpoint, config);
  const Dataset data = args.data_dir ? load_dataset(*args.data_dir, config.num_classes) : test_set(config);
  const EvalReport eval = evaluate_miou(model, data, config.band);
  if (run.out_dir) {
    std::filesystem::create_directories(*run.out_dir);
    write_iou_csv(*run.out_dir / "metrics.csv", eval.miou);
  }
  out << "class_id,iou\n";
  for (std::size_t c = 0; c < eval.miou.iou.size(); ++c) out << c << ',' << fmt_opt(eval.miou.iou[c]) << '\n';
  out << "miou=" << fmt(eval.miou.mean) << " pixel_accuracy=" << fmt(eval.miou.pixel_accuracy)
      << " boundary_accuracy=" << fmt_opt(eval.boundary_accuracy) << '\n';
  return kOk;
}

std::vector<AblationSetting> ablation_settings(const std::string& axis) {
  std::vector<AblationSetting> out;
  if (axis == "theta") {
    for (const char* c : {"2", "1", "1/2", "1/4", "1/8"}) out.push_back({c, {std::string("theta_coefficient=") + c}});
  } else if (axis == "ratio") {
    for (int r : {2, 4, 8, 16, 32}) {
      const std::string v = std::to_string(r);
      out.push_back({v, {"r_gr=" + v, "r_lr=" + v, "r_ba=" + v}});
    }
  } else if (axis == "fusion") {
    for (const char* f : {"gr_then_lr", "lr_then_gr", "parallel"}) out.push_back({f, {std::string("fusion=") + f}});
  } else if (axis == "components") {
    out.push_back({"baseline", {"enable_gt=false", "enable_ba=false"}});
    out.push_back({"gt", {"enable_gt=true", "enable_ba=false"}});
    out.push_back({"ba", {"enable_gt=false", "enable_ba=true"}});
    out.push_back({"gt_ba", {"enable_gt=true", "enable_ba=true"}});
  } else {
    throw ConfigError("unknown ablation axis '" + axis + "' (expected theta, ratio, fusion or components)");
  }
  return out;
}

int cmd_ablate(const RunConfig& run, const std::string& axis, std::ostream& out, std::ostream& err) {
  const auto settings = ablation_settings(axis);
  const SegmenterConfig base = run.resolve();
  CsvSink csv(&out, out_file(run, ("ablate_" + axis + ".csv").c_str()));
  csv.line("axis,setting,miou,boundary_acc,param_count,status");
  for (const auto& s : settings) {
    SegmenterConfig config = base;
    try {
      for (const auto& o : s.overrides) apply_override(config, o);
      config.validate();
    } catch (const ConfigError& e) {
      err << "ablate " << axis << "=" << s.label << ": " << e.what() << '\n';
      csv.line(axis + "," + s.label + ",,,,config_error");
      continue;
    }
    const RunResult r = train_and_evaluate(config);
    csv.line(axis + "," + s.label + "," + fmt(r.eval.miou.mean) + "," + fmt_opt(r.eval.boundary_accuracy) + "," +
             std::to_string(r.params) + ",ok");
  }
  return kOk;
}

int cmd_bench(const RunConfig& run, const BenchArgs& args, std::ostream& out, std::ostream& err) {
  if (args.reps == 0) throw ConfigError("reps must be positive");
  const std::uint64_t seed = run.seed.value_or(0);
  const RelationVariant variant = RelationVariant::softmax;
  CsvSink csv(&out, out_file(run, "bench.csv"));
  CsvSink spread(nullptr, out_file(run, "bench_stddev.csv"));
  csv.line("K,D,c,dense_ms,sparse_ms,max_abs_diff");
  spread.line("K,D,c,dense_sd_ms,sparse_sd_ms,kept_edges");
  int code = kOk;
  for (std::size_t K : args.k) {
    for (std::size_t D : args.d) {
      for (double c : args.c) {
        Rng rng(seed ^ (K * 1000003ULL + D));
        const Tensor x = uniform_tensor({K, D}, -1.0, 1.0, rng);
        const RelationMatrix rel = build_relation(x, variant);
        const RelationMatrix masked = sparsify(rel, make_theta(rel.values, c));

        Tensor dense_out, sparse_out;
        const auto dense_t = time_reps(args.reps, [&] { dense_out = node_update_dense(masked, x); });
        const auto sparse_t = time_reps(args.reps, [&] { sparse_out = node_update_sparse(masked, x); });
        double diff = 0.0;
        for (std::size_t i = 0; i < dense_out.numel(); ++i) {
          diff = std::max(diff, std::abs(dense_out.data()[i] - sparse_out.data()[i]));
        }
        if (diff != 0.0) code = kVerificationFailure;
        const std::string key = std::to_string(K) + "," + std::to_string(D) + "," + fmt(c);
        csv.line(key + "," + fmt(mean_ms(dense_t)) + "," + fmt(mean_ms(sparse_t)) + "," + fmt(diff));
        spread.line(key + "," + fmt(stddev_ms(dense_t)) + "," + fmt(stddev_ms(sparse_t)) + "," +
                    std::to_string(masked.kept_edges()));
      }
    }
  }
  if (code != kOk) err << "bench: sparse and dense node updates disagree\n";
  return code;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Window graph relation segmentation toolkit"};
  app.require_subcommand(1);

  RunConfig run;
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--override", run.overrides, "KEY=VALUE configuration override (repeatable)");
  };

  GradcheckArgs gc;
  std::string scope = "all";
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(gradcheck);
  gradcheck->add_option("--scope", scope, "tensor_ops, graph, gr, lr, gt, ba or all");
  gradcheck->add_option("--seeds", gc.seeds, "number of seeds per case");
  gradcheck->add_option("--samples", gc.samples, "entries checked per case and seed");

  TrainArgs ta;
  std::string export_dir;
  auto* train_cmd = app.add_subcommand("train", "train the toy segmenter");
  add_common(train_cmd);
  train_cmd->add_option("--export-data", export_dir, "also write the train/test sets as PPM/PGM");

  EvalArgs ea;
  std::string checkpoint, data_dir;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "PPM/PGM dataset directory (default: synthetic test set)");

  std::string axis;
  auto* ablate = app.add_subcommand("ablate", "ablation sweep");
  add_common(ablate);
  ablate->add_option("--axis", axis, "theta, ratio, fusion or components")->required();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "dense vs sparse node update timing");
  add_common(bench);
  bench->add_option("--k", ba.k, "node counts")->delimiter(',');
  bench->add_option("--d", ba.d, "node dimensions")->delimiter(',');
  bench->add_option("--c", ba.c, "threshold coefficients")->delimiter(',');
  bench->add_option("--reps", ba.reps, "repetitions per point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << e.what() << '\n';
    return kConfigError;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    auto given = [&](const char* name) { return sub->count(name) > 0; };
    if (given("--config")) run.config_path = config_path;
    if (given("--seed")) run.seed = seed;
    if (given("--out")) run.out_dir = out_dir;

    if (sub == gradcheck) {
      gc.scope = parse_grad_scope(scope);
      return cmd_gradcheck(run, gc, out, err);
    }
    if (sub == train_cmd) {
      if (!export_dir.empty()) ta.export_data = export_dir;
      return cmd_train(run, ta, out, err);
    }
    if (sub == eval) {
      ea.checkpoint = checkpoint;
      if (!data_dir.empty()) ea.data_dir = data_dir;
      return cmd_eval(run, ea, out, err);
    }
    if (sub == ablate) return cmd_ablate(run, axis, out, err);
    return cmd_bench(run, ba, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kVerificationFailure;
  }
}

}  // namespace gseg::cli
