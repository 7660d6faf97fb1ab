#pragma once

// Flat key=value run configuration: architecture, optimiser, data paths and output location.
// Unknown keys are rejected; absent keys keep the defaults below.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "vdcnn/model.hpp"
#include "vdcnn/trainer.hpp"

namespace vdcnn {

struct RunConfig {
  ArchSpec arch;
  OptimConfig optim;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::size_t train_limit = 0;  // use only the first N rows; 0 = all
  std::size_t test_limit = 0;
  std::filesystem::path output_dir = "run";

  /// Relative paths are resolved against base_dir. Throws ConfigError.
  static RunConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});

  /// Every key, defaults included, in a fixed order. parse(to_text()) reproduces the config.
  std::string to_text() const;

  /// Throws ConfigError naming the violated rule.
  void validate() const;
};

/// Reads and parses a config file, then applies a VDCNN_SEED override when the
/// variable is set. Throws ConfigError (unreadable files included).
RunConfig load_run_config(const std::filesystem::path& path);

/// Replaces the seed with the decimal value in `text`. Throws ConfigError if it is not one.
void apply_seed_override(RunConfig& cfg, std::string_view text);

std::string_view to_string(Precision p);
std::optional<Precision> parse_precision(std::string_view text);

}  // namespace vdcnn
