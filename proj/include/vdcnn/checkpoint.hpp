#pragma once

// Binary checkpoint: the architecture text followed by every named tensor.
//
//   "VDCN" | u16 version | u8 precision (32 or 64)
//   u32 spec length | spec text (key=value lines)
//   repeated until end of file:
//     u32 name length | name | u32 rank | u64 extent * rank | raw values
//
// Integers and values are little-endian.

#include <cstdint>
#include <filesystem>
#include <string>

#include "vdcnn/errors.hpp"
#include "vdcnn/model.hpp"

namespace vdcnn {

enum class CheckpointErrorKind {
  io,
  bad_magic,
  version,
  precision,
  truncated,
  bad_spec,
  shape,
  missing_tensor,
  unexpected_tensor,
};

std::string_view to_string(CheckpointErrorKind kind);

class CheckpointError : public Error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what)
      : Error("checkpoint " + std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  CheckpointErrorKind kind() const noexcept { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint16_t version = kCheckpointVersion;
  Precision precision = Precision::f32;
  ArchSpec spec;
};

/// Writes to a temporary sibling and renames it into place.
template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path);

/// Reads and validates everything up to the first tensor record.
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Restores a model whose precision matches T. Gradients come back zeroed.
template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace vdcnn
