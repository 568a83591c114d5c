#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pnp/trainer.hpp"

namespace pnp::cli {

/// Everything `pnp train` needs beyond the dataset path.
struct RunConfig {
  TrainConfig train;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
};

/// Sets one key from its text form. Throws ConfigError on an unknown key or
/// a malformed value.
void set_key(RunConfig& cfg, std::string_view key, std::string_view value);

/// Applies "key=value" lines. Blank lines and lines starting with '#' are
/// skipped. Throws ConfigError naming the offending line.
void apply_config_text(RunConfig& cfg, std::istream& in);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Every key with its current value, one "key=value" per line, in a fixed
/// order. Feeding the output back through apply_config_text reproduces cfg.
std::string dump_config(const RunConfig& cfg);

std::vector<std::string> config_keys();

/// Named ablation switches accepted by `--ablate`.
std::vector<std::string> ablation_names();
void apply_ablation(RunConfig& cfg, std::string_view name);

}  // namespace pnp::cli
