#include "gseg/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gseg {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                    std::string(expected) + ")");
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

double parse_real_plain(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a real number");
  return out;
}

// Reals may be written as fractions, e.g. theta_coefficient = 1/4.
double parse_real(std::string_view key, std::string_view v) {
  const auto slash = v.find('/');
  const double out = slash == std::string_view::npos
                         ? parse_real_plain(key, v)
                         : parse_real_plain(key, trim(v.substr(0, slash))) / parse_real_plain(key, trim(v.substr(slash + 1)));
  if (!std::isfinite(out)) bad_value(key, v, "a finite real number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<StageSpec> parse_stages(std::string_view key, std::string_view v) {
  std::vector<StageSpec> stages;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const std::string_view item = trim(v.substr(0, comma));
    v = comma == std::string_view::npos ? std::string_view{} : v.substr(comma + 1);
    const auto c1 = item.find(':');
    const auto c2 = c1 == std::string_view::npos ? c1 : item.find(':', c1 + 1);
    if (c2 == std::string_view::npos) bad_value(key, item, "blocks:M:N");
    stages.push_back(StageSpec{parse_uint(key, item.substr(0, c1)), parse_uint(key, item.substr(c1 + 1, c2 - c1 - 1)),
                               parse_uint(key, item.substr(c2 + 1))});
  }
  if (stages.empty()) bad_value(key, v, "at least one blocks:M:N entry");
  return stages;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct KeyHandler {
  std::function<void(SegmenterConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const SegmenterConfig&)> get;
};

template <typename T>
std::pair<std::string, KeyHandler> uint_key(std::string name, T SegmenterConfig::*field) {
  return {std::move(name),
          {[field](SegmenterConfig& c, std::string_view k, std::string_view v) { c.*field = static_cast<T>(parse_uint(k, v)); },
           [field](const SegmenterConfig& c) { return std::to_string(c.*field); }}};
}

std::pair<std::string, KeyHandler> real_key(std::string name, double SegmenterConfig::*field) {
  return {std::move(name),
          {[field](SegmenterConfig& c, std::string_view k, std::string_view v) { c.*field = parse_real(k, v); },
           [field](const SegmenterConfig& c) { return format_real(c.*field); }}};
}

std::pair<std::string, KeyHandler> bool_key(std::string name, bool SegmenterConfig::*field) {
  return {std::move(name),
          {[field](SegmenterConfig& c, std::string_view k, std::string_view v) { c.*field = parse_bool(k, v); },
           [field](const SegmenterConfig& c) { return std::string(c.*field ? "true" : "false"); }}};
}

const std::vector<std::pair<std::string, KeyHandler>>& handlers() {
  static const std::vector<std::pair<std::string, KeyHandler>> table = {
      uint_key("channels", &SegmenterConfig::channels),
      {"stages",
       {[](SegmenterConfig& c, std::string_view k, std::string_view v) { c.stages = parse_stages(k, v); },
        [](const SegmenterConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.stages.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(c.stages[i].blocks) + ":" + std::to_string(c.stages[i].rows) + ":" +
                   std::to_string(c.stages[i].cols);
          }
          return out;
        }}},
      uint_key("num_classes", &SegmenterConfig::num_classes),
      uint_key("mlp_ratio", &SegmenterConfig::mlp_ratio),
      {"fusion",
       {[](SegmenterConfig& c, std::string_view k, std::string_view v) {
          try {
            c.fusion = parse_fusion(v);
          } catch (const std::invalid_argument&) {
            bad_value(k, v, "gr_then_lr, lr_then_gr or parallel");
          }
        },
        [](const SegmenterConfig& c) { return std::string(to_string(c.fusion)); }}},
      uint_key("r_gr", &SegmenterConfig::r_gr),
      uint_key("r_lr", &SegmenterConfig::r_lr),
      uint_key("r_ba", &SegmenterConfig::r_ba),
      real_key("theta_coefficient", &SegmenterConfig::theta_coefficient),
      uint_key("graph_depth", &SegmenterConfig::graph_depth),
      {"relation",
       {[](SegmenterConfig& c, std::string_view k, std::string_view v) {
          if (v == "softmax") {
            c.relation = RelationVariant::softmax;
          } else if (v == "cosine") {
            c.relation = RelationVariant::cosine;
          } else {
            bad_value(k, v, "softmax or cosine");
          }
        },
        [](const SegmenterConfig& c) {
          return std::string(c.relation == RelationVariant::softmax ? "softmax" : "cosine");
        }}},
      bool_key("sparse_propagation", &SegmenterConfig::sparse_propagation),
      {"gelu",
       {[](SegmenterConfig& c, std::string_view k, std::string_view v) {
          if (v == "tanh") {
            c.gelu = GeluMode::tanh;
          } else if (v == "erf") {
            c.gelu = GeluMode::erf;
          } else {
            bad_value(k, v, "tanh or erf");
          }
        },
        [](const SegmenterConfig& c) { return std::string(c.gelu == GeluMode::tanh ? "tanh" : "erf"); }}},
      bool_key("enable_gt", &SegmenterConfig::enable_gt),
      bool_key("enable_ba", &SegmenterConfig::enable_ba),
      uint_key("seed", &SegmenterConfig::seed),
      {"dataset",
       {[](SegmenterConfig& c, std::string_view, std::string_view v) { c.dataset = parse_dataset_kind(v); },
        [](const SegmenterConfig& c) { return std::string(to_string(c.dataset)); }}},
      uint_key("height", &SegmenterConfig::height),
      uint_key("width", &SegmenterConfig::width),
      uint_key("train_samples", &SegmenterConfig::train_samples),
      uint_key("test_samples", &SegmenterConfig::test_samples),
      real_key("noise", &SegmenterConfig::noise),
      uint_key("steps", &SegmenterConfig::steps),
      uint_key("batch", &SegmenterConfig::batch),
      real_key("learning_rate", &SegmenterConfig::learning_rate),
      bool_key("two_phase", &SegmenterConfig::two_phase),
      uint_key("band", &SegmenterConfig::band),
  };
  return table;
}


const KeyHandler& find_handler(std::string_view key) {
  for (const auto& [name, handler] : handlers()) {
    if (name == key) return handler;
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [name, handler] : handlers()) out.push_back(name);
    return out;
  }();
  return keys;
}

void apply_override(SegmenterConfig& config, std::string_view key, std::string_view value) {
  find_handler(trim(key)).set(config, trim(key), trim(value));
}

void apply_override(SegmenterConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form KEY=VALUE");
  }
  apply_override(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

SegmenterConfig parse_config(std::string_view text, SegmenterConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_override(base, line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

SegmenterConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const SegmenterConfig& config) {
  std::string out;
  for (const auto& [name, handler] : handlers()) out += name + " = " + handler.get(config) + "\n";
  return out;
}

}  // namespace gseg
