#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vdcnn/nn_ops.hpp"

using namespace vdcnn;

namespace {

Tensor<double> from(const std::vector<double>& v, Shape s) { return Tensor<double>(std::move(s), v); }

std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_SUITE("nn_ops") {

TEST_CASE("output-length helpers") {
  CHECK(conv_output_length(10, 3, 1, 1) == 10);
  CHECK(conv_output_length(10, 3, 2, 1) == 5);
  CHECK(conv_output_length(3, 3, 1, 0) == 1);
  CHECK_THROWS_AS(conv_output_length(2, 3, 1, 0), ShapeError);
  CHECK_THROWS_AS(conv_output_length(5, 3, 0, 1), ShapeError);
  CHECK(max_pool_output_length(1024) == 512);
  CHECK(max_pool_output_length(1014) == 507);
  CHECK(max_pool_output_length(507) == 254);
  CHECK(half_kmax_output_length(7) == 4);
  // Every down-sampling kind halves with rounding up.
  for (std::size_t s = 1; s <= 300; ++s) {
    const std::size_t want = (s + 1) / 2;
    CHECK(downsampled_length(PoolKind::maxpool_3_2, s) == want);
    CHECK(downsampled_length(PoolKind::half_kmax, s) == want);
    CHECK(downsampled_length(PoolKind::strided_conv, s) == want);
  }
}

TEST_CASE("pool kind names round-trip and accept aliases") {
  for (PoolKind k : {PoolKind::strided_conv, PoolKind::half_kmax, PoolKind::maxpool_3_2}) {
    CHECK(parse_pool_kind(to_string(k)) == k);
  }
  CHECK(parse_pool_kind("kmax") == PoolKind::half_kmax);
  CHECK(parse_pool_kind("conv") == PoolKind::strided_conv);
  CHECK(parse_pool_kind("maxpool") == PoolKind::maxpool_3_2);
  CHECK_FALSE(parse_pool_kind("avg").has_value());
}

TEST_CASE("embedding lookup gathers rows into [m x f0 x s]") {
  Parameter<double> table("t", Tensor<double>::matrix({{0, 0}, {1, 10}, {2, 20}}));
  const std::vector<TokenId> ids{1, 2, 2, 0, 1, 1};
  Tape<double> tape;
  const Var y = embedding_lookup(tape, std::span<const TokenId>(ids), 2, tape.parameter(table));
  CHECK(tape.shape(y) == Shape{2, 2, 3});
  CHECK(tape.value(y).at(0, 1, 1) == 20);
  CHECK(tape.value(y).at(1, 0, 2) == 1);
  tape.backward(sum(tape, y));
  CHECK(table.grad.at(1, 0) == 3);
  CHECK(table.grad.at(2, 1) == 2);
  CHECK(table.grad.at(0, 0) == 1);

  Tape<double> single;
  const Var z = embedding_lookup(single, std::span<const TokenId>(ids).first(3), single.parameter(table));
  CHECK(single.shape(z) == Shape{2, 3});
}

TEST_CASE("embedding rejects ids outside the vocabulary") {
  Parameter<double> table("t", Tensor<double>(Shape{4, 2}, 1.0));
  for (TokenId bad : {-1, 4}) {
    const std::vector<TokenId> ids{0, bad};
    Tape<double> tape;
    CHECK_THROWS_AS(embedding_lookup(tape, std::span<const TokenId>(ids), tape.parameter(table)),
                    RangeError);
  }
  const std::vector<TokenId> ids{0, 1, 2};
  Tape<double> tape;
  CHECK_THROWS_AS(embedding_lookup(tape, std::span<const TokenId>(ids), 2, tape.parameter(table)),
                  ShapeError);
}

TEST_CASE("temporal conv agrees with the oracle over random shapes") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = dim(rng), cin = dim(rng), cout = dim(rng);
    const std::size_t width = trial % 2 ? 3 : 1, stride = 1 + trial % 3 / 2, pad = width / 2;
    const std::size_t len = width + dim(rng) * 3;
    const auto x = oracle::random_vector(m * cin * len, rng);
    const auto w = oracle::random_vector(cout * cin * width, rng);
    const auto b = oracle::random_vector(cout, rng);
    Parameter<double> pw("w", from(w, {cout, cin, width}));
    Parameter<double> pb("b", from(b, {cout}));
    Tape<double> tape;
    const Var y = temporal_conv(tape, tape.constant(from(x, {m, cin, len})), tape.parameter(pw),
                                std::optional<Var>(tape.parameter(pb)), stride, pad);
    const auto want = oracle::conv1d(x, w, &b, m, cin, len, cout, width, stride, pad);
    const auto got = values(tape.value(y));
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - want[i]) <= 1e-12 * std::max(1.0, std::abs(want[i])));
    }
  }
}

TEST_CASE("temporal conv on a single sequence keeps rank 2 and validates shapes") {
  ConvWeights<double> cw{Parameter<double>("k", Tensor<double>(Shape{4, 2, 3}, 1.0)), std::nullopt};
  Tape<double> tape;
  const Var y = temporal_conv(tape, tape.constant(Tensor<double>(Shape{2, 6}, 1.0)), cw, 1, 1);
  CHECK(tape.shape(y) == Shape{4, 6});
  CHECK(tape.value(y).at(0, 0) == 4.0);  // left edge sees one zero-padded column
  CHECK(tape.value(y).at(0, 3) == 6.0);
  CHECK_THROWS_AS(temporal_conv(tape, tape.constant(Tensor<double>(Shape{3, 6}, 1.0)), cw, 1, 1),
                  ShapeError);
}

TEST_CASE("batch norm normalises each channel over batch and time") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 2 + trial % 3, c = 3, len = 16;
    auto x = oracle::random_vector(m * c * len, rng, -2.0, 7.0);
    auto state = BatchNormState<double>::make("bn", c);
    Tape<double> tape;
    const Var y = temporal_batch_norm(tape, tape.constant(from(x, {m, c, len})), state, Mode::train);
    std::vector<double> mean, var;
    oracle::channel_stats(values(tape.value(y)), m, c, len, mean, var);
    std::vector<double> xmean, xvar;
    oracle::channel_stats(x, m, c, len, xmean, xvar);
    for (std::size_t ch = 0; ch < c; ++ch) {
      CHECK(std::abs(mean[ch]) < 1e-6);
      CHECK(std::abs(var[ch] - 1.0) < 1e-3);
      // Running statistics moved 10% of the way from (0, 1).
      CHECK(state.running_mean[ch] == doctest::Approx(0.1 * xmean[ch]).epsilon(1e-12));
      CHECK(state.running_var[ch] == doctest::Approx(0.9 + 0.1 * xvar[ch]).epsilon(1e-12));
    }
  }
}

TEST_CASE("batch norm applies gamma and beta and uses running stats in eval") {
  auto state = BatchNormState<double>::make("bn", 1);
  state.gamma.value[0] = 3.0;
  state.beta.value[0] = -1.0;
  state.running_mean[0] = 2.0;
  state.running_var[0] = 4.0 - state.epsilon;
  Tape<double> tape;
  const Var y = temporal_batch_norm(tape, tape.constant(Tensor<double>::matrix({{2.0, 4.0}})),
                                    state, Mode::eval);
  CHECK(tape.value(y)[0] == doctest::Approx(-1.0));
  CHECK(tape.value(y)[1] == doctest::Approx(2.0));
  CHECK(state.running_mean[0] == 2.0);  // eval leaves the statistics alone

  auto wrong = BatchNormState<double>::make("bn", 2);
  CHECK_THROWS_AS(temporal_batch_norm(tape, tape.constant(Tensor<double>(Shape{1, 3}, 0.0)), wrong,
                                      Mode::train),
                  ShapeError);
}

TEST_CASE("max pool matches the oracle and sends gradient to the first maximum") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> level(-2, 2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 1 + trial % 3, c = 2, len = 1 + trial;
    std::vector<double> x(m * c * len);
    for (double& e : x) e = level(rng);
    Tape<double> tape;
    const Var in = tape.input(from(x, {m, c, len}));
    const Var y = temporal_max_pool(tape, in);
    const auto want = oracle::max_pool(x, m * c, len, 3, 2, 1);
    CHECK(values(tape.value(y)) == want.values);
    tape.backward(sum(tape, y));
    std::vector<double> expect(x.size(), 0.0);
    for (std::size_t i = 0; i < want.positions.size(); ++i) {
      const std::size_t row = i / ((len + 1) / 2);
      expect[row * len + want.positions[i]] += 1.0;
    }
    CHECK(values(*tape.grad(in)) == expect);
  }
}

TEST_CASE("k-max keeps the k largest in temporal order with ties going earlier") {
  Tape<double> tape;
  const Var x = tape.input(Tensor<double>::matrix({{1, 5, 3, 5, 2, 5}}));
  const Var y = k_max_pool(tape, x, 2);
  CHECK(values(tape.value(y)) == std::vector<double>{5, 5});
  tape.backward(weighted_sum(tape, y, Tensor<double>::matrix({{1, 10}})));
  CHECK(values(*tape.grad(x)) == std::vector<double>{0, 1, 0, 10, 0, 0});

  Tape<double> t2;
  const Var z = k_max_pool(t2, t2.constant(Tensor<double>::matrix({{4, 1, 3, 2}})), 3);
  CHECK(values(t2.value(z)) == std::vector<double>{4, 3, 2});
}

TEST_CASE("k-max agrees with the oracle and rejects k outside [1, s]") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = 2, c = 3, len = 2 + trial;
    const auto x = oracle::random_vector(m * c * len, rng);
    const std::size_t k = 1 + trial % len;
    Tape<double> tape;
    const Var y = k_max_pool(tape, tape.constant(from(x, {m, c, len})), k);
    CHECK(tape.shape(y) == Shape{m, c, k});
    CHECK(values(tape.value(y)) == oracle::k_max(x, m * c, len, k).values);
    const Var h = half_k_max_pool(tape, tape.constant(from(x, {m, c, len})));
    CHECK(values(tape.value(h)) == oracle::k_max(x, m * c, len, (len + 1) / 2).values);
  }
  Tape<double> tape;
  const Var x = tape.constant(Tensor<double>(Shape{2, 5}, 0.0));
  CHECK_THROWS_AS(k_max_pool(tape, x, 6), ShapeError);
  CHECK_THROWS_AS(k_max_pool(tape, x, 0), ShapeError);
}

TEST_CASE("fully connected layer") {
  Parameter<double> w("w", Tensor<double>::matrix({{1, 2, 3}, {0, -1, 0}}));
  Parameter<double> b("b", Tensor<double>::vector({0.5, 1}));
  Tape<double> tape;
  const Var y = fully_connected(tape, tape.constant(Tensor<double>::matrix({{1, 1, 1}, {0, 2, 0}})),
                                tape.parameter(w), tape.parameter(b));
  CHECK(values(tape.value(y)) == std::vector<double>{6.5, 0, 4.5, -1});
  tape.backward(sum(tape, y));
  CHECK(values(b.grad) == std::vector<double>{2, 2});
  CHECK(values(w.grad) == std::vector<double>{1, 3, 1, 1, 3, 1});
  CHECK_THROWS_AS(fully_connected(tape, tape.constant(Tensor<double>(Shape{2, 4}, 0.0)),
                                  tape.parameter(w), tape.parameter(b)),
                  ShapeError);
}

TEST_CASE("softmax cross entropy values and gradient") {
  for (std::size_t n : {2u, 4u, 7u}) {
    Tape<double> tape;
    const std::vector<std::int32_t> labels{0, static_cast<std::int32_t>(n - 1)};
    const Var logits = tape.input(Tensor<double>(Shape{2, n}, 0.3));
    const Var loss = softmax_cross_entropy(tape, logits, std::span<const std::int32_t>(labels));
    CHECK(tape.value(loss).item() == doctest::Approx(std::log(double(n))));
    tape.backward(loss);
    // (softmax - onehot) / m
    CHECK((*tape.grad(logits)).at(0, 0) == doctest::Approx((1.0 / n - 1.0) / 2));
    CHECK((*tape.grad(logits)).at(0, 1) == doctest::Approx(1.0 / n / 2));
  }
  Tape<double> tape;
  const Var big = tape.constant(Tensor<double>::matrix({{1000, 0}}));
  const std::vector<std::int32_t> one{1};
  CHECK(tape.value(softmax_cross_entropy(tape, big, std::span<const std::int32_t>(one))).item() ==
        doctest::Approx(1000.0));
  const std::vector<std::int32_t> bad{2};
  CHECK_THROWS_AS(softmax_cross_entropy(tape, big, std::span<const std::int32_t>(bad)), RangeError);
  const std::vector<std::int32_t> two{0, 1};
  CHECK_THROWS_AS(softmax_cross_entropy(tape, big, std::span<const std::int32_t>(two)), ShapeError);
}

TEST_CASE("flatten") {
  Tape<double> tape;
  const Var y = flatten(tape, tape.constant(Tensor<double>(Shape{3, 4, 5}, 1.0)));
  CHECK(tape.shape(y) == Shape{3, 20});
}

TEST_CASE("operators are also available in single precision") {
  Parameter<float> w("w", Tensor<float>(Shape{2, 1, 3}, 0.5f));
  Tape<float> tape;
  const Var x = tape.constant(Tensor<float>(Shape{1, 1, 8}, 1.0f));
  const Var y = k_max_pool(tape, temporal_max_pool(tape, temporal_conv(tape, x, tape.parameter(w),
                                                                       std::nullopt, 1, 1)),
                           2);
  CHECK(tape.shape(y) == Shape{1, 2, 2});
  CHECK(tape.value(y)[0] == 1.5f);
}

}  // TEST_SUITE
