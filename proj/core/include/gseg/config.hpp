#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gseg/segmenter.hpp"

namespace gseg {

/// Every key accepted in a config file or override, in file order.
const std::vector<std::string>& config_keys();

/// Sets one key. Unknown keys and unparsable values raise ConfigError.
void apply_override(SegmenterConfig& config, std::string_view key, std::string_view value);
/// "key=value" form.
void apply_override(SegmenterConfig& config, std::string_view assignment);

/// Line-oriented `key = value` text; `#` starts a comment. Keys not present
/// keep their value from `base`. The result is not validated.
SegmenterConfig parse_config(std::string_view text, SegmenterConfig base = {});
SegmenterConfig load_config(const std::filesystem::path& path);

/// Inverse of parse_config: one line per key, round-trips exactly.
std::string format_config(const SegmenterConfig& config);

}  // namespace gseg
