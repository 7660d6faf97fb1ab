#include "vdcnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <vector>

namespace vdcnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O writes host byte order and assumes little-endian");

namespace {

constexpr char kMagic[4] = {'V', 'D', 'C', 'N'};

std::uint8_t precision_tag(Precision p) { return p == Precision::f32 ? 32 : 64; }

class Writer {
 public:
  template <typename V>
  void put(V v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(V));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  bool at_end() const { return pos_ == bytes_.size(); }

  template <typename V>
  V get(const char* what) {
    V v;
    get_bytes(&v, sizeof(V), what);
    return v;
  }
  void get_bytes(void* out, std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointErrorKind::truncated,
                            std::string("file ends inside ") + what + " at byte " +
                                std::to_string(pos_));
    }
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::string get_string(std::size_t n, const char* what) {
    std::string s(n, '\0');
    get_bytes(s.data(), n, what);
    return s;
  }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorKind::io, "cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw CheckpointError(CheckpointErrorKind::io, "read failed for " + path.string());
  return bytes;
}

CheckpointHeader read_header(Reader& r) {
  char magic[4];
  r.get_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorKind::bad_magic, "not a checkpoint file");
  }
  CheckpointHeader h;
  h.version = r.get<std::uint16_t>("version");
  if (h.version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorKind::version,
                          "unsupported version " + std::to_string(h.version));
  }
  const auto tag = r.get<std::uint8_t>("precision tag");
  if (tag == 32) {
    h.precision = Precision::f32;
  } else if (tag == 64) {
    h.precision = Precision::f64;
  } else {
    throw CheckpointError(CheckpointErrorKind::precision,
                          "unknown precision tag " + std::to_string(tag));
  }
  const auto spec_len = r.get<std::uint32_t>("spec length");
  const std::string text = r.get_string(spec_len, "spec text");
  try {
    h.spec = ArchSpec::from_text(text);
    h.spec.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointErrorKind::bad_spec, e.what());
  }
  return h;
}

}  // namespace

std::string_view to_string(CheckpointErrorKind kind) {
  switch (kind) {
    case CheckpointErrorKind::io: return "io";
    case CheckpointErrorKind::bad_magic: return "bad_magic";
    case CheckpointErrorKind::version: return "version";
    case CheckpointErrorKind::precision: return "precision";
    case CheckpointErrorKind::truncated: return "truncated";
    case CheckpointErrorKind::bad_spec: return "bad_spec";
    case CheckpointErrorKind::shape: return "shape";
    case CheckpointErrorKind::missing_tensor: return "missing_tensor";
    case CheckpointErrorKind::unexpected_tensor: return "unexpected_tensor";
  }
  return "unknown";
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path) {
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint16_t>(kCheckpointVersion);
  w.put<std::uint8_t>(precision_tag(precision_of<T>()));
  const std::string spec = model.spec.to_text();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.size()));
  w.put_bytes(spec.data(), spec.size());
  for (const auto& [name, tensor] : model.named_tensors()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tensor->rank()));
    for (std::size_t e : tensor->shape()) w.put<std::uint64_t>(e);
    w.put_bytes(tensor->raw(), tensor->size() * sizeof(T));
  }

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointErrorKind::io, "cannot write " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out.flush()) throw CheckpointError(CheckpointErrorKind::io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw CheckpointError(CheckpointErrorKind::io, "cannot move checkpoint into " + path.string());
  }
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  Reader r(read_file(path));
  return read_header(r);
}

template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& path) {
  Reader r(read_file(path));
  const CheckpointHeader h = read_header(r);
  if (h.precision != precision_of<T>()) {
    throw CheckpointError(CheckpointErrorKind::precision,
                          std::string("file holds ") + (h.precision == Precision::f32 ? "f32" : "f64") +
                              " values, requested " + (precision_of<T>() == Precision::f32 ? "f32" : "f64"));
  }
  Model<T> model = build<T>(h.spec, 0);
  std::map<std::string, Tensor<T>*, std::less<>> slots;
  for (auto& [name, tensor] : model.named_tensors()) slots.emplace(name, tensor);
  std::set<std::string, std::less<>> seen;

  while (!r.at_end()) {
    const auto name_len = r.get<std::uint32_t>("tensor name length");
    const std::string name = r.get_string(name_len, "tensor name");
    const auto slot = slots.find(name);
    if (slot == slots.end() || !seen.insert(name).second) {
      throw CheckpointError(CheckpointErrorKind::unexpected_tensor,
                            "tensor '" + name + "' is unknown or repeated");
    }
    const auto rank = r.get<std::uint32_t>("tensor rank");
    if (rank > 8) {
      throw CheckpointError(CheckpointErrorKind::shape, "tensor '" + name + "' has rank " + std::to_string(rank));
    }
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(r.get<std::uint64_t>("tensor extents"));
    Tensor<T>& target = *slot->second;
    if (shape != target.shape()) {
      throw CheckpointError(CheckpointErrorKind::shape,
                            "tensor '" + name + "' stored as " + to_string(shape) + ", expected " +
                                to_string(target.shape()));
    }
    r.get_bytes(target.raw(), target.size() * sizeof(T), "tensor values");
  }
  for (const auto& [name, tensor] : slots) {
    if (!seen.contains(name)) {
      throw CheckpointError(CheckpointErrorKind::missing_tensor, "tensor '" + name + "' not found");
    }
  }
  for (Parameter<T>* p : model.parameters()) p->zero_grad();
  return model;
}

template void save_checkpoint<float>(const Model<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const Model<double>&, const std::filesystem::path&);
template Model<float> load_checkpoint<float>(const std::filesystem::path&);
template Model<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace vdcnn
