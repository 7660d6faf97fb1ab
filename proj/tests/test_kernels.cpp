#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "vdcnn/kernels.hpp"

using namespace vdcnn::kernels;

namespace {

template <typename T>
std::vector<T> random_buffer(std::size_t n, std::mt19937_64& rng) {
  const auto v = oracle::random_vector(n, rng);
  return std::vector<T>(v.begin(), v.end());
}

template <typename T>
void check_close(const std::vector<T>& a, const std::vector<T>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(double(a[i])), std::abs(double(b[i]))});
    CHECK(std::abs(double(a[i]) - double(b[i])) <= tol * scale);
  }
}

template <typename T>
void gemm_matches_reference(double tol) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 70);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = dim(rng), n = dim(rng), k = dim(rng);
    const Trans ta = trial % 2 ? Trans::yes : Trans::no;
    const Trans tb = (trial / 2) % 2 ? Trans::yes : Trans::no;
    // Padded leading dimensions exercise the stride arguments.
    const std::size_t lda = (ta == Trans::no ? k : m) + 3;
    const std::size_t ldb = (tb == Trans::no ? n : k) + 1;
    const std::size_t ldc = n + 2;
    const auto a = random_buffer<T>((ta == Trans::no ? m : k) * lda, rng);
    const auto b = random_buffer<T>((tb == Trans::no ? k : n) * ldb, rng);
    auto c_fast = random_buffer<T>(m * ldc, rng);
    auto c_ref = c_fast;
    const T alpha = T(0.75), beta = trial % 3 ? T(0.5) : T(0);
    gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb, beta, c_fast.data(), ldc);
    reference::gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb, beta, c_ref.data(), ldc);
    check_close(c_fast, c_ref, tol);
  }
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("parallel gemm matches the serial reference for every transpose") {
  gemm_matches_reference<double>(1e-12);
  gemm_matches_reference<float>(1e-4);
}

TEST_CASE("gemm with beta = 0 ignores garbage in C") {
  const double a[] = {1, 2, 3, 4};
  const double b[] = {5, 6, 7, 8};
  double c[] = {NAN, NAN, NAN, NAN};
  gemm(Trans::no, Trans::no, 2, 2, 2, 1.0, a, 2, b, 2, 0.0, c, 2);
  CHECK(c[0] == 19);
  CHECK(c[3] == 50);
}

TEST_CASE("parallel conv forward and backward match the brute-force oracle") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> small(1, 6);
  for (int trial = 0; trial < 40; ++trial) {
    Conv1dGeometry g;
    g.batch = small(rng);
    g.in_channels = small(rng);
    g.out_channels = small(rng);
    g.kernel_width = 1 + trial % 3 * 2;
    g.stride = 1 + trial % 2;
    g.pad = g.kernel_width / 2;
    g.length = g.kernel_width + small(rng) * 4;
    const std::size_t lout = g.out_length();
    const auto x = oracle::random_vector(g.batch * g.in_channels * g.length, rng);
    const auto w = oracle::random_vector(g.out_channels * g.in_channels * g.kernel_width, rng);
    const auto bias = oracle::random_vector(g.out_channels, rng);
    const auto dy = oracle::random_vector(g.batch * g.out_channels * lout, rng);

    std::vector<double> y(g.batch * g.out_channels * lout), y_ref(y.size());
    conv1d_forward(g, x.data(), w.data(), bias.data(), y.data());
    reference::conv1d_forward(g, x.data(), w.data(), bias.data(), y_ref.data());
    const auto y_oracle = oracle::conv1d(x, w, &bias, g.batch, g.in_channels, g.length,
                                         g.out_channels, g.kernel_width, g.stride, g.pad);
    check_close(y, y_oracle, 1e-12);
    check_close(y_ref, y_oracle, 1e-12);

    std::vector<double> dx(x.size(), 0.0), dw(w.size(), 0.0), db(bias.size(), 0.0);
    conv1d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    const auto grads = oracle::conv1d_grads(x, w, dy, g.batch, g.in_channels, g.length,
                                            g.out_channels, g.kernel_width, g.stride, g.pad);
    check_close(dx, grads.dx, 1e-12);
    check_close(dw, grads.dw, 1e-12);
    check_close(db, grads.dbias, 1e-12);
  }
}

TEST_CASE("conv backward accumulates and tolerates null outputs") {
  Conv1dGeometry g;
  g.length = 5;
  g.pad = 1;
  const std::vector<double> x{1, 2, 3, 4, 5}, w{1, 1, 1}, dy{1, 1, 1, 1, 1};
  std::vector<double> dw(3, 10.0);
  conv1d_backward<double>(g, x.data(), w.data(), dy.data(), nullptr, dw.data(), nullptr);
  CHECK(dw[0] == 10 + 1 + 2 + 3 + 4);
  CHECK(dw[1] == 10 + 15);
}

TEST_CASE("im2col and col2im are adjoint") {
  std::mt19937_64 rng(5);
  Conv1dGeometry g;
  g.batch = 2;
  g.in_channels = 3;
  g.length = 9;
  g.stride = 2;
  g.pad = 1;
  const auto x = oracle::random_vector(g.batch * g.in_channels * g.length, rng);
  const auto c = oracle::random_vector(g.col_rows() * g.col_cols(), rng);
  std::vector<double> col(c.size()), back(x.size(), 0.0);
  im2col(g, x.data(), col.data());
  col2im_add(g, c.data(), back.data());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < c.size(); ++i) lhs += col[i] * c[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("pooling kernels agree with the reference and the oracle exactly") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> len_dist(1, 40);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t rows = 1 + trial % 5, len = len_dist(rng);
    std::vector<double> x(rows * len);
    // Few distinct levels so that ties are common.
    for (double& e : x) e = level(rng);
    const std::size_t lout = (len + 2 - 3) / 2 + 1;
    std::vector<double> y(rows * lout), y_ref(rows * lout);
    std::vector<std::uint32_t> arg(rows * lout), arg_ref(rows * lout);
    max_pool1d_forward(rows, len, 3, 2, 1, x.data(), y.data(), arg.data());
    reference::max_pool1d_forward(rows, len, 3, 2, 1, x.data(), y_ref.data(), arg_ref.data());
    const auto want = oracle::max_pool(x, rows, len, 3, 2, 1);
    CHECK(y == want.values);
    CHECK(arg == want.positions);
    CHECK(y_ref == want.values);
    CHECK(arg_ref == want.positions);

    const std::size_t k = 1 + trial % len;
    std::vector<double> ky(rows * k), ky_ref(rows * k);
    std::vector<std::uint32_t> ki(rows * k), ki_ref(rows * k);
    kmax_forward(rows, len, k, x.data(), ky.data(), ki.data());
    reference::kmax_forward(rows, len, k, x.data(), ky_ref.data(), ki_ref.data());
    const auto kwant = oracle::k_max(x, rows, len, k);
    CHECK(ky == kwant.values);
    CHECK(ki == kwant.positions);
    CHECK(ky_ref == kwant.values);
    CHECK(ki_ref == kwant.positions);
  }
}

TEST_CASE("scatter_rows_add routes gradients to selected positions") {
  const std::uint32_t index[] = {0, 2, 1, 1};
  const double dy[] = {1, 2, 3, 4};
  std::vector<double> dx(6, 0.0);
  scatter_rows_add<double>(2, 3, 2, index, dy, dx.data());
  CHECK(dx == std::vector<double>{1, 0, 2, 0, 7, 0});
}

TEST_CASE("channel moments match a two-pass oracle") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + trial % 4, c = 1 + trial % 7, len = 3 + trial;
    const auto x = oracle::random_vector(m * c * len, rng, -3.0, 5.0);
    std::vector<double> mean(c), var(c), mean_ref(c), var_ref(c), mean_o, var_o;
    channel_moments(m, c, len, x.data(), mean.data(), var.data());
    reference::channel_moments(m, c, len, x.data(), mean_ref.data(), var_ref.data());
    oracle::channel_stats(x, m, c, len, mean_o, var_o);
    check_close(mean, mean_o, 1e-12);
    check_close(var, var_o, 1e-12);
    check_close(mean_ref, mean_o, 1e-12);
    check_close(var_ref, var_o, 1e-12);
  }
}

TEST_CASE("batch norm backward matches the closed form") {
  // One channel, four values: dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat)).
  const double xhat[] = {-1.5, -0.5, 0.5, 1.5};
  const double dy[] = {1, 0, 2, -1};
  const double gamma = 2, inv_std = 0.5;
  std::vector<double> dx(4, 0.0);
  double dgamma = 0, dbeta = 0;
  batch_norm_backward<double>(1, 1, 4, xhat, &gamma, &inv_std, dy, dx.data(), &dgamma, &dbeta);
  double mdy = 0.5, mdyx = 0;
  for (int i = 0; i < 4; ++i) mdyx += dy[i] * xhat[i] / 4;
  for (int i = 0; i < 4; ++i) {
    CHECK(dx[i] == doctest::Approx(gamma * inv_std * (dy[i] - mdy - xhat[i] * mdyx)));
  }
  CHECK(dbeta == 2.0);
  CHECK(dgamma == doctest::Approx(4 * mdyx));
}

}  // TEST_SUITE
