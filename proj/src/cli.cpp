#include "vdcnn/cli.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "vdcnn/checkpoint.hpp"
#include "vdcnn/dataset.hpp"
#include "vdcnn/run_config.hpp"
#include "vdcnn/synthetic.hpp"
#include "vdcnn/trainer.hpp"

namespace vdcnn::cli {

namespace {

Dataset take_first(Dataset data, std::size_t limit) {
  if (limit != 0 && limit < data.samples.size()) data.samples.resize(limit);
  return data;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

template <typename T>
int train_with(const RunConfig& cfg, const EncodedDataset& train_set, const EncodedDataset& test_set,
               std::ostream& out, std::ostream& err) {
  Model<T> model = build<T>(cfg.arch, cfg.optim.seed);
  std::ofstream metrics = open_output(cfg.output_dir / "metrics.csv");
  std::ofstream timing = open_output(cfg.output_dir / "timing.csv");
  timing << "epoch,seconds\n";
  TrainOptions options;
  options.best_checkpoint = cfg.output_dir / "best.ckpt";
  options.on_epoch = [&](const EpochRecord& r) {
    metrics << format_record(r, false) << '\n' << std::flush;
    char line[64];
    std::snprintf(line, sizeof line, "%zu,%.3f\n", r.epoch, r.seconds);
    timing << line << std::flush;
    out << format_record(r, true) << '\n' << std::flush;
  };
  out << kMetricsHeader << ",seconds\n";
  try {
    const TrainHistory h = train(model, train_set, test_set, cfg.optim, options);
    if (h.best_epoch != 0) {
      char line[96];
      std::snprintf(line, sizeof line, "best_epoch=%zu best_test_err=%.2f\n", h.best_epoch,
                    h.best_test_err);
      out << line;
    }
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << " (" << e.history().epochs.size() << " epochs completed)\n";
    return kDiverged;
  }
  return kOk;
}

template <typename T>
int eval_with(const std::filesystem::path& checkpoint, const Dataset& data, std::ostream& out,
              std::ostream& err) {
  Model<T> model = load_checkpoint<T>(checkpoint);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    if (static_cast<std::size_t>(data.samples[i].label) >= model.spec.n_classes) {
      err << "error: row " << i + 1 << " has class " << data.samples[i].label + 1
          << " but the checkpoint was trained for " << model.spec.n_classes << " classes\n";
      return kConfigError;
    }
  }
  Dataset d = data;
  d.n_classes = model.spec.n_classes;
  const EncodedDataset encoded = encode_dataset(d, model.spec.seq_len);
  char line[64];
  std::snprintf(line, sizeof line, "error_pct=%.2f\n", evaluate(model, encoded));
  out << line;
  return kOk;
}

std::string shape_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

}  // namespace

int train(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_run_config(config);
    cfg.validate();
    if (cfg.train_path.empty() || cfg.test_path.empty()) {
      throw ConfigError("train_path and test_path are required");
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    const Dataset train_data = take_first(load_csv(cfg.train_path, cfg.arch.n_classes), cfg.train_limit);
    const Dataset test_data = take_first(load_csv(cfg.test_path, cfg.arch.n_classes), cfg.test_limit);
    const EncodedDataset train_set = encode_dataset(train_data, cfg.arch.seq_len);
    const EncodedDataset test_set = encode_dataset(test_data, cfg.arch.seq_len);
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec) throw DataError("cannot create " + cfg.output_dir.string() + ": " + ec.message());
    open_output(cfg.output_dir / "config.txt") << cfg.to_text();
    out << "train=" << train_set.size() << " test=" << test_set.size()
        << " depth=" << cfg.arch.depth() << " precision=" << to_string(cfg.optim.precision)
        << " output=" << cfg.output_dir.string() << '\n';
    return cfg.optim.precision == Precision::f64 ? train_with<double>(cfg, train_set, test_set, out, err)
                                                 : train_with<float>(cfg, train_set, test_set, out, err);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const CheckpointError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

int eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
         std::ostream& out, std::ostream& err) {
  Precision precision;
  try {
    precision = read_checkpoint_header(checkpoint).precision;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kConfigError;
  }
  Dataset dataset;
  try {
    dataset = load_csv(data, static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()));
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  try {
    return precision == Precision::f64 ? eval_with<double>(checkpoint, dataset, out, err)
                                       : eval_with<float>(checkpoint, dataset, out, err);
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}

int inspect(const std::filesystem::path& config, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::vector<LayerInfo> layers;
  try {
    cfg = load_run_config(config);
    cfg.validate();
    layers = describe(cfg.arch);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  out << cfg.to_text();
  out << "# layers\n";
  char line[160];
  for (const LayerInfo& l : layers) {
    std::snprintf(line, sizeof line, "%-28s %-12s %12zu\n", l.name.c_str(), shape_text(l.output).c_str(),
                  l.params);
    out << line;
  }
  const auto widths = cfg.arch.widths();
  const auto lengths = cfg.arch.level_lengths();
  out << "# levels\n";
  for (std::size_t i = 0; i < 4; ++i) {
    out << "level" << i + 1 << " width=" << widths[i] << " length=" << lengths[i]
        << " blocks=" << cfg.arch.block_counts[i] << " conv_layers=" << 2 * cfg.arch.block_counts[i]
        << '\n';
  }
  const ParamCount c = count_params(cfg.arch);
  out << "# totals\n"
      << "conv=" << c.conv() << " (weights " << c.conv_weights << ", biases " << c.conv_biases << ")\n"
      << "fc=" << c.fc << '\n'
      << "batchnorm=" << c.batchnorm << '\n'
      << "embedding=" << c.embedding << '\n'
      << "total=" << c.total() << '\n'
      << "classifier_inputs=" << cfg.arch.classifier_inputs() << '\n'
      << "depth=" << cfg.arch.depth() << '\n';
  return kOk;
}

int gradcheck(const std::vector<GradCheckCase>& cases, double threshold, std::ostream& out) {
  const auto results = run_gradcheck_cases(cases, threshold, out);
  std::string failed;
  for (const auto& r : results) {
    if (!r.passed) failed += (failed.empty() ? "" : ", ") + r.name;
  }
  char line[64];
  std::snprintf(line, sizeof line, "threshold=%.0e\n", threshold);
  out << line;
  if (!failed.empty()) {
    out << "FAILED: " << failed << '\n';
    return kCheckFailed;
  }
  out << "all " << results.size() << " checks passed\n";
  return kOk;
}

int gradcheck(Precision precision, std::ostream& out) {
  out << "precision=" << to_string(precision) << '\n';
  return gradcheck(standard_gradcheck_cases(precision), gradcheck_threshold(precision), out);
}

int encode(const std::string& text, std::size_t s, std::ostream& out, std::ostream& err) {
  if (s == 0) {
    err << "config error: --s must be at least 1\n";
    return kConfigError;
  }
  const auto ids = default_vocabulary().encode(text, s);
  for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << ids[i];
  out << '\n';
  return kOk;
}

int synth(const SynthOptions& options, std::ostream& out, std::ostream& err) {
  try {
    if (options.n_train > options.n_samples) throw ConfigError("n_train exceeds n_samples");
    MotifTaskConfig task;
    task.n_samples = options.n_samples;
    task.length = options.length;
    task.motif = options.motif;
    task.seed = options.seed;
    const auto [train_set, test_set] = split(make_motif_dataset(task), options.n_train);
    std::error_code ec;
    std::filesystem::create_directories(options.output_dir, ec);
    if (ec) throw DataError("cannot create " + options.output_dir.string());
    write_csv(train_set, options.output_dir / "train.csv");
    write_csv(test_set, options.output_dir / "test.csv");
    out << "wrote " << train_set.size() << " train and " << test_set.size() << " test rows to "
        << options.output_dir.string() << '\n';
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace vdcnn::cli
