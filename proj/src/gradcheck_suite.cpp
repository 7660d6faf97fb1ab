#include "vdcnn/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <memory>
#include <numeric>
#include <random>

#include "vdcnn/model.hpp"
#include "vdcnn/nn_ops.hpp"

namespace vdcnn {

namespace {

template <typename T>
Tensor<T> uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (T& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

// |v| in [0.2, 1] with a random sign.
template <typename T>
Tensor<T> away_from_zero(Shape shape, std::mt19937_64& rng) {
  Tensor<T> t = uniform<T>(std::move(shape), rng, 0.2, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (T& v : t.data()) {
    if (flip(rng)) v = -v;
  }
  return t;
}

// All entries distinct, neighbours in sorted order at least 0.03 apart.
template <typename T>
Tensor<T> well_separated(Shape shape, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::vector<std::size_t> rank(t.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::shuffle(rank.begin(), rank.end(), rng);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  const double mid = static_cast<double>(t.size()) / 2;
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = static_cast<T>((static_cast<double>(rank[i]) - mid) * 0.05 + jitter(rng));
  }
  return t;
}

template <typename T>
void round_to_float(Tensor<T>& t) {
  for (T& v : t.data()) v = static_cast<T>(static_cast<float>(v));
}

// Owns the parameters of one check and the fixed weights of its objective.
template <typename T>
struct Fixture {
  using value_type = T;

  std::vector<std::unique_ptr<Parameter<T>>> owned;
  std::vector<Parameter<T>*> checked;
  std::shared_ptr<void> keep;  // anything else the objective refers to
  Tensor<T> weights;           // rank 0 until the first projection
  std::mt19937_64 rng;
  bool float_twin = false;  // round everything to float values (double twin of a float check)

  explicit Fixture(std::uint64_t seed) : rng(seed) {}

  Parameter<T>& add(std::string name, Tensor<T> value) {
    owned.push_back(std::make_unique<Parameter<T>>(std::move(name), std::move(value)));
    checked.push_back(owned.back().get());
    return *owned.back();
  }
  void track(Parameter<T>& p) { checked.push_back(&p); }

  // Random projection to a scalar so every output entry carries a distinct weight.
  Var project(Tape<T>& tape, Var y) {
    if (weights.rank() == 0) {
      weights = uniform<T>(tape.shape(y), rng, -1.0, 1.0);
      if (float_twin) round_to_float(weights);
    }
    return weighted_sum(tape, y, weights);
  }
};

// In f32 mode the analytic gradient comes from a float fixture and the finite
// differences from a double twin built from the same draws, rounded to float values.
template <typename Setup>
GradCheckCase make_case(std::string name, Precision precision, std::uint64_t seed, Setup setup,
                        std::size_t max_entries = 0) {
  return {name, [=] {
            GradCheckOptions opt = gradcheck_options(precision);
            opt.max_entries_per_parameter = max_entries;
            opt.seed = seed;
            auto fd = std::make_shared<Fixture<double>>(seed);
            if (precision == Precision::f64) {
              const ScalarFunction<double> f = setup(*fd);
              return grad_check<double>(f, fd->checked, opt);
            }
            fd->float_twin = true;
            auto ff = std::make_shared<Fixture<float>>(seed);
            const ScalarFunction<float> f32 = setup(*ff);
            const ScalarFunction<double> f64 = setup(*fd);
            for (Parameter<double>* p : fd->checked) round_to_float(p->value);
            return grad_check_mixed<float, double>(f32, ff->checked, f64, fd->checked, opt);
          }};
}

std::vector<GradCheckCase> cases_for(Precision precision) {
  std::vector<GradCheckCase> out;

  out.push_back(make_case("matmul", precision, 11, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& a = fx.add("a", uniform<T>({4, 5}, fx.rng, -1, 1));
    auto& b = fx.add("b", uniform<T>({5, 3}, fx.rng, -1, 1));
    return ScalarFunction<T>([&fx, &a, &b](Tape<T>& t) {
      return fx.project(t, matmul(t, t.parameter(a), t.parameter(b)));
    });
  }));

  out.push_back(make_case("elementwise", precision, 12, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& a = fx.add("a", uniform<T>({4, 6}, fx.rng, -1, 1));
    auto& b = fx.add("b", uniform<T>({4, 6}, fx.rng, -1, 1));
    auto& c = fx.add("c", uniform<T>({4, 6}, fx.rng, -1, 1));
    auto& d = fx.add("d", away_from_zero<T>({4, 6}, fx.rng));
    auto& bias = fx.add("bias", uniform<T>({4}, fx.rng, -1, 1));
    return ScalarFunction<T>([&](Tape<T>& t) {
      const Var va = t.parameter(a);
      const Var prod = mul(t, add(t, va, t.parameter(b)), sub(t, va, t.parameter(c)));
      const Var r = scale(t, relu(t, t.parameter(d)), T(1.5));
      return fx.project(t, add_channel_bias(t, add(t, prod, r), t.parameter(bias)));
    });
  }));

  out.push_back(make_case("embedding", precision, 13, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& table = fx.add("table", uniform<T>({69, 5}, fx.rng, -0.5, 0.5));
    auto ids = std::make_shared<std::vector<TokenId>>(14);
    std::uniform_int_distribution<TokenId> pick(0, 9);  // a small range so ids repeat
    for (auto& id : *ids) id = pick(fx.rng);
    return ScalarFunction<T>([&fx, &table, ids](Tape<T>& t) {
      return fx.project(t, embedding_lookup(t, std::span<const TokenId>(*ids), 2, t.parameter(table)));
    });
  }));

  out.push_back(make_case("temporal_conv", precision, 14, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& x = fx.add("x", uniform<T>({2, 3, 9}, fx.rng, -1, 1));
    auto& k = fx.add("kernels", uniform<T>({4, 3, 3}, fx.rng, -1, 1));
    auto& b = fx.add("bias", uniform<T>({4}, fx.rng, -1, 1));
    return ScalarFunction<T>([&](Tape<T>& t) {
      return fx.project(t, temporal_conv(t, t.parameter(x), t.parameter(k), t.parameter(b), 1, 1));
    });
  }));

  out.push_back(make_case("temporal_conv_stride2", precision, 15, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& x = fx.add("x", uniform<T>({2, 3, 10}, fx.rng, -1, 1));
    auto& k = fx.add("kernels", uniform<T>({4, 3, 3}, fx.rng, -1, 1));
    auto& p = fx.add("projection", uniform<T>({4, 3, 1}, fx.rng, -1, 1));
    return ScalarFunction<T>([&](Tape<T>& t) {
      const Var vx = t.parameter(x);
      const Var main = temporal_conv(t, vx, t.parameter(k), std::nullopt, 2, 1);
      const Var skip = temporal_conv(t, vx, t.parameter(p), std::nullopt, 2, 0);
      return fx.project(t, add(t, main, skip));
    });
  }));

  out.push_back(make_case("temporal_batch_norm", precision, 16, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& x = fx.add("x", uniform<T>({3, 4, 5}, fx.rng, -2, 2));
    auto state = std::make_shared<BatchNormState<T>>(BatchNormState<T>::make("bn", 4));
    state->gamma.value = uniform<T>({4}, fx.rng, 0.5, 1.5);
    state->beta.value = uniform<T>({4}, fx.rng, -0.5, 0.5);
    fx.track(state->gamma);
    fx.track(state->beta);
    fx.keep = state;
    return ScalarFunction<T>([&fx, &x, state](Tape<T>& t) {
      return fx.project(t, temporal_batch_norm(t, t.parameter(x), *state, Mode::train));
    });
  }));

  out.push_back(make_case("temporal_max_pool", precision, 17, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& x = fx.add("x", well_separated<T>({2, 3, 11}, fx.rng));
    return ScalarFunction<T>([&](Tape<T>& t) {
      return fx.project(t, temporal_max_pool(t, t.parameter(x), 3, 2, 1));
    });
  }));

  out.push_back(make_case("half_k_max_pool", precision, 18, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& x = fx.add("x", well_separated<T>({2, 3, 11}, fx.rng));
    return ScalarFunction<T>([&](Tape<T>& t) {
      return fx.project(t, half_k_max_pool(t, t.parameter(x)));
    });
  }));

  out.push_back(make_case("k_max_pool", precision, 19, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& x = fx.add("x", well_separated<T>({2, 3, 10}, fx.rng));
    return ScalarFunction<T>([&](Tape<T>& t) {
      return fx.project(t, k_max_pool(t, t.parameter(x), 4));
    });
  }));

  out.push_back(make_case("fully_connected", precision, 20, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& x = fx.add("x", uniform<T>({3, 6}, fx.rng, -1, 1));
    auto& wt = fx.add("weight", uniform<T>({4, 6}, fx.rng, -1, 1));
    auto& b = fx.add("bias", uniform<T>({4}, fx.rng, -1, 1));
    return ScalarFunction<T>([&](Tape<T>& t) {
      return fx.project(t, fully_connected(t, t.parameter(x), t.parameter(wt), t.parameter(b)));
    });
  }));

  out.push_back(make_case("softmax_cross_entropy", precision, 21, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    auto& logits = fx.add("logits", uniform<T>({5, 4}, fx.rng, -2, 2));
    auto labels = std::make_shared<std::vector<std::int32_t>>(5);
    std::uniform_int_distribution<std::int32_t> pick(0, 3);
    for (auto& l : *labels) l = pick(fx.rng);
    return ScalarFunction<T>([&logits, labels](Tape<T>& t) {
      return softmax_cross_entropy(t, t.parameter(logits), std::span<const std::int32_t>(*labels));
    });
  }));

  out.push_back(make_case("full_model", precision, 22, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    ArchSpec spec;
    spec.block_counts = {1, 1, 1, 1};
    spec.width_multiplier = {1, 8};
    spec.seq_len = 32;
    spec.kmax_k = 4;  // 32 -> 16 -> 8 -> 4 leaves four positions
    spec.n_classes = 3;
    auto model = std::make_shared<Model<T>>(build<T>(spec, 22));
    for (Parameter<T>* p : model->parameters()) fx.track(*p);
    fx.keep = model;
    auto ids = std::make_shared<std::vector<TokenId>>(2 * spec.seq_len);
    std::uniform_int_distribution<TokenId> pick(1, 68);
    for (auto& id : *ids) id = pick(fx.rng);
    auto labels = std::make_shared<std::vector<std::int32_t>>(std::vector<std::int32_t>{0, 2});
    return ScalarFunction<T>([model, ids, labels](Tape<T>& t) {
      const Var logits = forward(t, *model, std::span<const TokenId>(*ids), 2, Mode::train);
      return softmax_cross_entropy(t, logits, std::span<const std::int32_t>(*labels));
    });
  }, 6));

  // Identity and strided projection shortcuts: two blocks in level 1, stride-2 entry to the rest.
  out.push_back(make_case("full_model_shortcut", precision, 23, [](auto& fx) {
    using T = typename std::decay_t<decltype(fx)>::value_type;
    ArchSpec spec;
    spec.block_counts = {2, 1, 1, 1};
    spec.width_multiplier = {1, 8};
    spec.pool_kind = PoolKind::strided_conv;
    spec.shortcut = ShortcutKind::enabled;
    spec.seq_len = 32;
    spec.kmax_k = 4;
    spec.n_classes = 3;
    auto model = std::make_shared<Model<T>>(build<T>(spec, 23));
    for (Parameter<T>* p : model->parameters()) fx.track(*p);
    fx.keep = model;
    auto ids = std::make_shared<std::vector<TokenId>>(2 * spec.seq_len);
    std::uniform_int_distribution<TokenId> pick(1, 68);
    for (auto& id : *ids) id = pick(fx.rng);
    auto labels = std::make_shared<std::vector<std::int32_t>>(std::vector<std::int32_t>{1, 0});
    return ScalarFunction<T>([model, ids, labels](Tape<T>& t) {
      const Var logits = forward(t, *model, std::span<const TokenId>(*ids), 2, Mode::train);
      return softmax_cross_entropy(t, logits, std::span<const std::int32_t>(*labels));
    });
  }, 6));

  return out;
}

}  // namespace

double gradcheck_threshold(Precision precision) {
  return precision == Precision::f64 ? 1e-5 : 1e-3;
}

GradCheckOptions gradcheck_options(Precision precision) {
  GradCheckOptions opt;
  opt.epsilon = 1e-6;
  if (precision == Precision::f32) {
    // Float gradients of sums that nearly cancel carry absolute, not relative, error.
    opt.denominator_floor = 1e-2;
  }
  return opt;
}

std::vector<GradCheckCase> standard_gradcheck_cases(Precision precision) {
  return cases_for(precision);
}

std::vector<GradCheckCaseResult> run_gradcheck_cases(const std::vector<GradCheckCase>& cases,
                                                     double threshold, std::ostream& out) {
  std::vector<GradCheckCaseResult> results;
  for (const GradCheckCase& c : cases) {
    GradCheckCaseResult r;
    r.name = c.name;
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      const GradCheckReport report = c.run();
      r.max_rel_error = report.max_rel_error;
      r.worst_parameter = report.worst_parameter;
      r.passed = report.max_rel_error < threshold;
    } catch (const std::exception& e) {
      error = e.what();
      r.passed = false;
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char line[256];
    if (error.empty()) {
      std::snprintf(line, sizeof line, "%-24s max_rel_error=%.3e  worst=%s  %.2fs  %s", r.name.c_str(),
                    r.max_rel_error, r.worst_parameter.c_str(), r.seconds, r.passed ? "ok" : "FAIL");
      out << line << '\n';
    } else {
      out << r.name << "  error: " << error << "  FAIL\n";
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace vdcnn
