#pragma once

// Command implementations behind the `vdcnn` executable. Each returns a process exit code.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "vdcnn/gradcheck_suite.hpp"

namespace vdcnn::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kConfigError = 2,  // also unreadable checkpoints and checkpoint/dataset mismatches
  kDataError = 3,
  kDiverged = 4,
};

/// Trains per the config. Writes <output_dir>/metrics.csv (one line per epoch, no
/// wall time), timing.csv, config.txt and best.ckpt; echoes each epoch with its wall time to out.
int train(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

/// Prints error_pct=<value> for the checkpoint on a CSV dataset.
int eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
         std::ostream& out, std::ostream& err);

/// Resolved config, per-layer shapes and parameter counts, totals and depth.
int inspect(const std::filesystem::path& config, std::ostream& out, std::ostream& err);

/// Runs the standard gradient-check suite at the given precision.
int gradcheck(Precision precision, std::ostream& out);

/// Reports the cases and returns kCheckFailed listing failures, kOk otherwise.
int gradcheck(const std::vector<GradCheckCase>& cases, double threshold, std::ostream& out);

/// Space-separated ids of `text` encoded at length s.
int encode(const std::string& text, std::size_t s, std::ostream& out, std::ostream& err);

struct SynthOptions {
  std::filesystem::path output_dir;
  std::size_t n_samples = 4000;
  std::size_t n_train = 3200;
  std::size_t length = 128;
  std::string motif = "k9{q";
  std::uint64_t seed = 1;
};

/// Writes the motif task as <output_dir>/train.csv and test.csv.
int synth(const SynthOptions& options, std::ostream& out, std::ostream& err);

}  // namespace vdcnn::cli
