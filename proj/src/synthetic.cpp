#include "vdcnn/synthetic.hpp"

#include <algorithm>
#include <random>

#include "vdcnn/errors.hpp"
#include "vdcnn/init.hpp"

namespace vdcnn {

Dataset make_motif_dataset(const MotifTaskConfig& cfg) {
  if (cfg.motif.empty() || cfg.motif.size() > cfg.length) {
    throw ConfigError("motif must be non-empty and no longer than the strings");
  }
  const std::string alphabet = std::string(Vocabulary::kAlphabet) + ' ';
  for (char c : cfg.motif) {
    if (alphabet.find(c) == std::string::npos) throw ConfigError("motif uses a character outside the vocabulary");
  }
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x5eed));
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<std::size_t> where(0, cfg.length - cfg.motif.size());
  auto random_string = [&] {
    std::string s(cfg.length, ' ');
    for (char& c : s) c = alphabet[pick(rng)];
    return s;
  };

  Dataset data{"motif", 2, {}};
  data.samples.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    const bool positive = i % 2 == 0;
    std::string s = random_string();
    if (positive) {
      s.replace(where(rng), cfg.motif.size(), cfg.motif);
    } else {
      while (s.find(cfg.motif) != std::string::npos) s = random_string();
    }
    data.samples.push_back({positive ? 1 : 0, std::move(s)});
  }
  std::shuffle(data.samples.begin(), data.samples.end(), rng);
  return data;
}

}  // namespace vdcnn
