#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gseg/gradcheck.hpp"
#include "gseg/segmenter.hpp"

namespace gseg::cli {

/// Stable process exit codes.
enum ExitCode : int { kOk = 0, kVerificationFailure = 1, kConfigError = 2 };

/// Options shared by every subcommand.
struct RunConfig {
  std::optional<std::filesystem::path> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::vector<std::string> overrides;

  /// Defaults, then the config file, then overrides, then --seed. Validated.
  SegmenterConfig resolve() const;
};

struct GradcheckArgs {
  GradScope scope = GradScope::all;
  std::size_t seeds = 5;
  std::size_t samples = 100;
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> data_dir;
};

struct TrainArgs {
  std::optional<std::filesystem::path> export_data;
};

struct BenchArgs {
  std::vector<std::size_t> k = {2, 4, 8, 16};
  std::vector<std::size_t> d = {2, 8, 32};
  std::vector<double> c = {2.0, 1.0, 0.5, 0.25, 0.125};
  std::size_t reps = 30;
};

/// Runs the given cases; writes `op,max_rel_err,samples` CSV to `out` and
/// names every failing op on `err`.
int cmd_gradcheck(const RunConfig& run, const GradcheckArgs& args, std::span<const GradCase> cases, std::ostream& out,
                  std::ostream& err);
int cmd_gradcheck(const RunConfig& run, const GradcheckArgs& args, std::ostream& out, std::ostream& err);

/// Writes model.wgts, loss_curve.csv, metrics.csv and summary.csv into the
/// output directory.
int cmd_train(const RunConfig& run, const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& run, const EvalArgs& args, std::ostream& out, std::ostream& err);

/// Axes: theta, ratio, fusion, components.
int cmd_ablate(const RunConfig& run, const std::string& axis, std::ostream& out, std::ostream& err);
int cmd_bench(const RunConfig& run, const BenchArgs& args, std::ostream& out, std::ostream& err);

/// One ablation setting applied on top of a base config.
struct AblationSetting {
  std::string label;
  std::vector<std::string> overrides;
};
std::vector<AblationSetting> ablation_settings(const std::string& axis);

/// Parses argv and dispatches. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gseg::cli
