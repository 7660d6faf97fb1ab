#include <iostream>

#include "CLI11.hpp"
#include "vdcnn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Very deep character-level CNN: train, evaluate, inspect, check gradients"};
  app.require_subcommand(1);

  std::string config;
  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config, "run configuration (key=value)")->required();

  std::string checkpoint;
  std::string data;
  auto* eval = app.add_subcommand("eval", "test error of a checkpoint on a CSV dataset");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--data", data)->required();

  auto* inspect = app.add_subcommand("inspect", "architecture report for a config");
  inspect->add_option("--config", config, "run configuration (key=value)")->required();

  bool f32 = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_flag("--f32", f32, "check the 32-bit kernels (threshold 1e-3)");

  std::string text;
  std::size_t s = 1014;
  auto* encode = app.add_subcommand("encode", "print the token ids of a string");
  encode->add_option("--text", text)->required();
  encode->add_option("--s", s, "sequence length")->capture_default_str();

  vdcnn::cli::SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "write the synthetic motif task as CSV");
  synth->add_option("--out", synth_opts.output_dir, "output directory")->required();
  synth->add_option("--samples", synth_opts.n_samples)->capture_default_str();
  synth->add_option("--train", synth_opts.n_train, "rows that go to train.csv")->capture_default_str();
  synth->add_option("--length", synth_opts.length)->capture_default_str();
  synth->add_option("--motif", synth_opts.motif)->capture_default_str();
  synth->add_option("--seed", synth_opts.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vdcnn::cli::kConfigError;
  }

  if (*train) return vdcnn::cli::train(config, std::cout, std::cerr);
  if (*eval) return vdcnn::cli::eval(checkpoint, data, std::cout, std::cerr);
  if (*inspect) return vdcnn::cli::inspect(config, std::cout, std::cerr);
  if (*gradcheck) {
    return vdcnn::cli::gradcheck(f32 ? vdcnn::Precision::f32 : vdcnn::Precision::f64, std::cout);
  }
  if (*encode) return vdcnn::cli::encode(text, s, std::cout, std::cerr);
  if (*synth) return vdcnn::cli::synth(synth_opts, std::cout, std::cerr);
  return vdcnn::cli::kConfigError;
}
