#pragma once

// Binary motif-detection task: random strings over the printable vocabulary
// plus space, labelled 1 iff a fixed short motif occurs somewhere in the string.

#include <cstddef>
#include <cstdint>
#include <string>

#include "vdcnn/dataset.hpp"

namespace vdcnn {

struct MotifTaskConfig {
  std::size_t n_samples = 4000;
  std::size_t length = 128;
  std::string motif = "k9{q";
  std::uint64_t seed = 1;
};

/// Exactly half positives (the motif planted at a uniform position) and half
/// negatives (redrawn until motif-free), in a seeded random order.
Dataset make_motif_dataset(const MotifTaskConfig& cfg);

}  // namespace vdcnn
