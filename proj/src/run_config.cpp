#include "vdcnn/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vdcnn/key_value.hpp"

namespace vdcnn {

namespace {

std::size_t parse_size(const std::string& key, std::string_view text) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

double parse_real(const std::string& key, std::string_view text) {
  double v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError(key + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

std::string real_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view value) {
  std::filesystem::path p{std::string(value)};
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

}  // namespace

std::string_view to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

std::optional<Precision> parse_precision(std::string_view text) {
  if (text == "f32" || text == "32" || text == "float") return Precision::f32;
  if (text == "f64" || text == "64" || text == "double") return Precision::f64;
  return std::nullopt;
}

RunConfig RunConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  for (const KeyValue& kv : parse_key_values(text)) {
    const std::string& k = kv.key;
    const std::string_view v = kv.value;
    try {
      if (cfg.arch.apply(k, v)) continue;
      if (k == "lr0") {
        cfg.optim.lr0 = parse_real(k, v);
      } else if (k == "momentum") {
        cfg.optim.momentum = parse_real(k, v);
      } else if (k == "batch_size") {
        cfg.optim.batch_size = parse_size(k, v);
      } else if (k == "halve_every") {
        cfg.optim.halve_every = parse_size(k, v);
      } else if (k == "max_epochs") {
        cfg.optim.max_epochs = parse_size(k, v);
      } else if (k == "seed") {
        cfg.optim.seed = parse_size(k, v);
      } else if (k == "precision") {
        const auto p = parse_precision(v);
        if (!p) throw ConfigError("precision: expected f32 or f64, got '" + std::string(v) + "'");
        cfg.optim.precision = *p;
      } else if (k == "clip_norm") {
        if (v == "none") {
          cfg.optim.clip_norm.reset();
        } else {
          cfg.optim.clip_norm = parse_real(k, v);
        }
      } else if (k == "train_path") {
        cfg.train_path = resolve(base_dir, v);
      } else if (k == "test_path") {
        cfg.test_path = resolve(base_dir, v);
      } else if (k == "train_limit") {
        cfg.train_limit = parse_size(k, v);
      } else if (k == "test_limit") {
        cfg.test_limit = parse_size(k, v);
      } else if (k == "output_dir") {
        cfg.output_dir = resolve(base_dir, v);
      } else {
        throw ConfigError("unknown key '" + k + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(kv.line) + ": " + e.what());
    }
  }
  return cfg;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "# architecture\n" << arch.to_text();
  os << "# optimisation\n"
     << "lr0=" << real_text(optim.lr0) << '\n'
     << "momentum=" << real_text(optim.momentum) << '\n'
     << "batch_size=" << optim.batch_size << '\n'
     << "halve_every=" << optim.halve_every << '\n'
     << "max_epochs=" << optim.max_epochs << '\n'
     << "seed=" << optim.seed << '\n'
     << "precision=" << to_string(optim.precision) << '\n'
     << "clip_norm=" << (optim.clip_norm ? real_text(*optim.clip_norm) : std::string("none")) << '\n';
  os << "# data\n"
     << "train_path=" << train_path.string() << '\n'
     << "test_path=" << test_path.string() << '\n'
     << "train_limit=" << train_limit << '\n'
     << "test_limit=" << test_limit << '\n'
     << "output_dir=" << output_dir.string() << '\n';
  return os.str();
}

void RunConfig::validate() const {
  arch.validate();
  optim.validate();
}

void apply_seed_override(RunConfig& cfg, std::string_view text) {
  cfg.optim.seed = parse_size("VDCNN_SEED", trim(text));
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  RunConfig cfg;
  try {
    cfg = RunConfig::parse(text, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (const char* seed = std::getenv("VDCNN_SEED"); seed != nullptr) apply_seed_override(cfg, seed);
  return cfg;
}

}  // namespace vdcnn
