#include "vdcnn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "vdcnn/errors.hpp"
#include "vdcnn/init.hpp"
#include "vdcnn/key_value.hpp"

namespace vdcnn {

void Dataset::validate() const {
  if (samples.empty()) throw DataError("dataset '" + name + "' is empty");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto label = samples[i].label;
    if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
      throw DataError("dataset '" + name + "': sample " + std::to_string(i + 1) + " has label " +
                      std::to_string(label) + " outside [0, " + std::to_string(n_classes) + ")");
    }
  }
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  std::size_t line = 1;
  std::size_t record_line = 1;
  auto fail = [&](const std::string& why) {
    throw DataError("row " + std::to_string(records.size() + 1) + " (line " +
                    std::to_string(record_line) + "): " + why);
  };
  auto end_record = [&] {
    fields.push_back(std::move(field));
    field.clear();
    // A record consisting of one empty unquoted field is a blank line.
    if (!(fields.size() == 1 && fields[0].empty())) records.push_back(std::move(fields));
    fields.clear();
  };

  std::size_t i = 0;
  bool at_field_start = true;
  bool quoted_done = false;  // the current field was quoted and its closing quote seen
  while (i < text.size()) {
    const char c = text[i];
    if (at_field_start && c == '"') {
      ++i;
      while (true) {
        if (i >= text.size()) fail("unterminated quoted field");
        if (text[i] == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        if (text[i] == '\n') ++line;
        field += text[i++];
      }
      at_field_start = false;
      quoted_done = true;
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      at_field_start = true;
      quoted_done = false;
      ++i;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      ++i;
      end_record();
      ++line;
      record_line = line;
      at_field_start = true;
      quoted_done = false;
    } else if (quoted_done) {
      fail("unexpected character after closing quote");
    } else if (c == '"') {
      fail("quote inside an unquoted field");
    } else {
      field += c;
      at_field_start = false;
      ++i;
    }
  }
  if (!at_field_start || !fields.empty() || quoted_done) end_record();
  return records;
}

Dataset load_csv(const std::filesystem::path& path, std::size_t n_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read failed for " + path.string());

  Dataset data;
  data.name = path.filename().string();
  data.n_classes = n_classes;
  std::vector<std::vector<std::string>> records;
  try {
    records = parse_csv(text);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  data.samples.reserve(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    auto fail = [&](const std::string& why) {
      throw DataError(path.string() + ": row " + std::to_string(r + 1) + ": " + why);
    };
    if (rec.size() < 2) fail("expected a class index and at least one text field");
    const std::string_view label_text = trim(rec[0]);
    long label = 0;
    const auto* end = label_text.data() + label_text.size();
    const auto [ptr, ec] = std::from_chars(label_text.data(), end, label);
    if (label_text.empty() || ec != std::errc{} || ptr != end) {
      fail("class index '" + rec[0] + "' is not an integer");
    }
    if (label < 1 || static_cast<unsigned long>(label) > n_classes) {
      fail("class index " + std::to_string(label) + " outside [1, " + std::to_string(n_classes) + "]");
    }
    Sample s;
    s.label = static_cast<std::int32_t>(label - 1);
    for (std::size_t f = 1; f < rec.size(); ++f) {
      if (f > 1) s.text += ' ';
      s.text += rec[f];
    }
    data.samples.push_back(std::move(s));
  }
  if (data.samples.empty()) throw DataError(path.string() + ": no rows");
  return data;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const Sample& s : data.samples) {
    out << '"' << (s.label + 1) << "\",\"";
    for (char c : s.text) {
      if (c == '"') out << '"';
      out << c;
    }
    out << "\"\n";
  }
  if (!out.flush()) throw DataError("write failed for " + path.string());
}

std::pair<Dataset, Dataset> split(const Dataset& data, std::size_t n_first) {
  if (n_first > data.size()) {
    throw DataError("cannot take " + std::to_string(n_first) + " samples from a dataset of " +
                    std::to_string(data.size()));
  }
  Dataset a{data.name, data.n_classes, {}};
  Dataset b{data.name, data.n_classes, {}};
  const auto mid = data.samples.begin() + static_cast<std::ptrdiff_t>(n_first);
  a.samples.assign(data.samples.begin(), mid);
  b.samples.assign(mid, data.samples.end());
  return {std::move(a), std::move(b)};
}

EncodedDataset encode_dataset(const Dataset& data, std::size_t seq_len, const Vocabulary& vocab) {
  data.validate();
  if (seq_len == 0) throw DataError("sequence length must be at least 1");
  EncodedDataset out;
  out.seq_len = seq_len;
  out.n_classes = data.n_classes;
  out.ids.resize(data.size() * seq_len);
  out.labels.reserve(data.size());
  std::vector<TokenId> row(seq_len);
  for (std::size_t i = 0; i < data.size(); ++i) {
    vocab.encode_into(data.samples[i].text, row);
    std::copy(row.begin(), row.end(), out.ids.begin() + static_cast<std::ptrdiff_t>(i * seq_len));
    out.labels.push_back(data.samples[i].label);
  }
  return out;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n_samples, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch,
                                                    bool shuffle) {
  if (n_samples == 0) throw DataError("cannot batch an empty dataset");
  if (batch_size == 0) throw DataError("batch size must be at least 1");
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    std::mt19937_64 rng(derive_seed(seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n_samples; start += batch_size) {
    const std::size_t stop = std::min(n_samples, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

Batch gather(const EncodedDataset& data, std::span<const std::size_t> indices) {
  Batch b;
  b.ids.resize(indices.size() * data.seq_len);
  b.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= data.size()) throw RangeError("sample index " + std::to_string(i) + " out of range");
    const auto src = data.ids.begin() + static_cast<std::ptrdiff_t>(i * data.seq_len);
    std::copy(src, src + static_cast<std::ptrdiff_t>(data.seq_len),
              b.ids.begin() + static_cast<std::ptrdiff_t>(r * data.seq_len));
    b.labels.push_back(data.labels[i]);
  }
  return b;
}

std::vector<Batch> batches(const EncodedDataset& data, std::size_t batch_size, std::uint64_t seed,
                           bool shuffle, std::size_t epoch) {
  std::vector<Batch> out;
  for (const auto& idx : batch_indices(data.size(), batch_size, seed, epoch, shuffle)) {
    out.push_back(gather(data, idx));
  }
  return out;
}

}  // namespace vdcnn
