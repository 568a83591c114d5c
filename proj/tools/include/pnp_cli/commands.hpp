#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pnp::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitDivergence = 3,
};

// Fixed names inside a training run directory.
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kMetricsFile = "metrics.jsonl";
inline constexpr const char* kCheckpointDir = "checkpoints";
inline constexpr const char* kFinalCheckpoint = "final.ckpt";
inline constexpr const char* kDivergedCheckpoint = "diverged.ckpt";
inline constexpr const char* kReportFile = "report.json";

std::string epoch_checkpoint_name(std::size_t epoch);
std::filesystem::path manifest_path(const std::filesystem::path& dataset);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// One cluster id per line, for the unlabelled rows in file order.
std::vector<std::size_t> read_predictions(const std::filesystem::path& path);

}  // namespace pnp::cli
