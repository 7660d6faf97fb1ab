#pragma once

// Classification datasets: headerless CSV ingestion, fixed-length encoding and
// seeded mini-batch iteration.
//
// CSV rows look like  "3","title","body"  : a 1-based class index followed by
// one or more text fields, which are joined with single spaces.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vdcnn/text.hpp"

namespace vdcnn {

struct Sample {
  std::int32_t label = 0;  // 0-based
  std::string text;
};

struct Dataset {
  std::string name;
  std::size_t n_classes = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  /// Throws DataError if empty or a label falls outside [0, n_classes).
  void validate() const;
};

/// Splits CSV text into records of fields. Quoted fields may contain commas,
/// newlines and "" escapes. Throws DataError naming the 1-based record number.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Throws DataError on unreadable files, malformed quoting, rows with fewer than
/// two fields and class indices outside [1, n_classes].
Dataset load_csv(const std::filesystem::path& path, std::size_t n_classes);

/// Writes the same format load_csv reads (every field quoted, 1-based labels).
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// First n samples and the rest.
std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t n_first);

/// Dataset encoded once at a fixed length. Ids are stored as bytes.
struct EncodedDataset {
  std::size_t seq_len = 0;
  std::size_t n_classes = 0;
  std::vector<std::uint8_t> ids;  // size() x seq_len
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
};

EncodedDataset encode_dataset(const Dataset& data, std::size_t seq_len,
                              const Vocabulary& vocab = default_vocabulary());

struct Batch {
  std::vector<TokenId> ids;  // size() x seq_len
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
};

/// Sample indices of every batch in one epoch. With shuffle the permutation is a
/// function of (seed, epoch) only; the last batch may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n_samples, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch,
                                                    bool shuffle);

Batch gather(const EncodedDataset& data, std::span<const std::size_t> indices);

/// Every batch of one epoch, materialised.
std::vector<Batch> batches(const EncodedDataset& data, std::size_t batch_size, std::uint64_t seed,
                           bool shuffle, std::size_t epoch = 0);

}  // namespace vdcnn
