#include <doctest.h>

#include <cmath>
#include <tuple>

#include "artgan/error.hpp"
#include "artgan/kernels.hpp"
#include "artgan/rng.hpp"

using namespace artgan;
using namespace artgan::kernels;

namespace {

Tensor random_tensor(Rng& rng, Shape shape) { return sample_normal(rng, shape); }

// Gather form straight from the definition.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int s, int p) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), k = w.dim(2);
  const int OH = (H + 2 * p - k) / s + 1, OW = (W + 2 * p - k) / s + 1;
  Tensor y({std::size_t(N), std::size_t(F), std::size_t(OH), std::size_t(OW)});
  for (int n = 0; n < N; ++n)
    for (int f = 0; f < F; ++f)
      for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j) {
          double acc = b.empty() ? 0.0 : b[f];
          for (int c = 0; c < C; ++c)
            for (int u = 0; u < k; ++u)
              for (int v = 0; v < k; ++v) {
                const int r = i * s - p + u, q = j * s - p + v;
                if (r < 0 || r >= H || q < 0 || q >= W) continue;
                acc += w.at(f, c, u, v) * x.at(n, c, r, q);
              }
          y.at(n, f, i, j) = acc;
        }
  return y;
}

// Scatter form: every input pixel stamps the kernel onto the output.
Tensor naive_deconv(const Tensor& x, const Tensor& w, const Tensor& b, int s, int p) {
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(1), k = w.dim(2);
  const int OH = (H - 1) * s - 2 * p + k, OW = (W - 1) * s - 2 * p + k;
  Tensor y({std::size_t(N), std::size_t(Cout), std::size_t(OH), std::size_t(OW)});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < Cin; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j)
          for (int o = 0; o < Cout; ++o)
            for (int u = 0; u < k; ++u)
              for (int v = 0; v < k; ++v) {
                const int r = i * s - p + u, q = j * s - p + v;
                if (r < 0 || r >= OH || q < 0 || q >= OW) continue;
                y.at(n, o, r, q) += w.at(c, o, u, v) * x.at(n, c, i, j);
              }
  if (!b.empty())
    for (int n = 0; n < N; ++n)
      for (int o = 0; o < Cout; ++o)
        for (int r = 0; r < OH; ++r)
          for (int q = 0; q < OW; ++q) y.at(n, o, r, q) += b[o];
  return y;
}

double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// (k, stride, pad) of every row of both architecture tables.
const std::tuple<std::size_t, std::size_t, std::size_t> kTableGeometries[] = {
    {4, 1, 0}, {4, 2, 1}, {3, 1, 1}};

}  // namespace

TEST_CASE("conv output extents match the table rows") {
  CHECK(conv_output_extent(64, 4, {2, 1}) == 32);
  CHECK(conv_output_extent(32, 3, {1, 1}) == 32);
  CHECK(conv_output_extent(32, 4, {2, 1}) == 16);
  CHECK(deconv_output_extent(1, 4, {1, 0}) == 4);
  CHECK(deconv_output_extent(4, 4, {2, 1}) == 8);
  CHECK(deconv_output_extent(32, 4, {2, 1}) == 64);
  CHECK_THROWS_AS(conv_output_extent(2, 5, {1, 1}), ShapeError);
}

TEST_CASE("conv then deconv with the same geometry restores the spatial size") {
  for (auto [k, s, p] : kTableGeometries) {
    for (std::size_t in : {4u, 8u, 16u, 32u, 64u}) {
      const std::size_t out = conv_output_extent(in, k, {s, p});
      CHECK(deconv_output_extent(out, k, {s, p}) == in);
    }
  }
}

TEST_CASE("scalar convolution") {
  const Tensor x({1, 1, 1, 1}, std::vector<double>{3.0});
  const Tensor w({1, 1, 1, 1}, std::vector<double>{2.0});
  const Tensor b({1}, std::vector<double>{0.0});
  CHECK(conv2d(x, w, b, {1, 0})[0] == 6.0);
}

TEST_CASE("conv2d rejects a channel mismatch") {
  CHECK_THROWS_AS(conv2d(Tensor({1, 3, 8, 8}), Tensor({4, 2, 3, 3}), Tensor(), {1, 1}),
                  ShapeError);
  CHECK_THROWS_AS(deconv2d(Tensor({1, 3, 8, 8}), Tensor({2, 4, 3, 3}), Tensor(), {1, 1}),
                  ShapeError);
}

TEST_CASE("GEMM convolution agrees with the direct-loop oracle") {
  Rng rng(5);
  for (auto [k, s, p] : kTableGeometries) {
    const Tensor x = random_tensor(rng, {3, 5, 9, 9});
    const Tensor w = random_tensor(rng, {4, 5, k, k});
    const Tensor b = random_tensor(rng, {4});
    const Tensor fast = conv2d(x, w, b, {s, p});
    const Tensor slow = naive_conv(x, w, b, int(s), int(p));
    REQUIRE(fast.shape() == slow.shape());
    CHECK(max_abs_diff(fast, slow) < 1e-12);
    CHECK(max_abs_diff(reference::conv2d(x, w, b, {s, p}), slow) < 1e-12);
  }
}

TEST_CASE("transposed convolution agrees with a scatter-loop oracle") {
  Rng rng(6);
  for (auto [k, s, p] : kTableGeometries) {
    const Tensor x = random_tensor(rng, {2, 4, 5, 5});
    const Tensor w = random_tensor(rng, {4, 3, k, k});
    const Tensor b = random_tensor(rng, {3});
    const Tensor fast = deconv2d(x, w, b, {s, p});
    const Tensor slow = naive_deconv(x, w, b, int(s), int(p));
    REQUIRE(fast.shape() == slow.shape());
    CHECK(max_abs_diff(fast, slow) < 1e-12);
    CHECK(max_abs_diff(reference::deconv2d(x, w, b, {s, p}), slow) < 1e-12);
  }
}

TEST_CASE("large batches are chunked without changing results") {
  Rng rng(8);
  const Tensor x = random_tensor(rng, {40, 8, 32, 32});
  const Tensor w = random_tensor(rng, {6, 8, 4, 4});
  const Tensor y = conv2d(x, w, Tensor(), {2, 1});
  const Tensor y1 = conv2d(x.slice_batch(37, 38), w, Tensor(), {2, 1});
  CHECK(max_abs_diff(y.slice_batch(37, 38), y1) < 1e-12);
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
  Rng rng(9);
  for (auto [k, s, p] : kTableGeometries) {
    const Tensor x = random_tensor(rng, {2, 3, 8, 8});
    const Tensor w = random_tensor(rng, {5, 3, k, k});
    const Tensor cx = conv2d(x, w, Tensor(), {s, p});
    const Tensor y = random_tensor(rng, cx.shape());
    const double lhs = dot(cx, y);
    const double rhs = dot(x, deconv2d(y, w, Tensor(), {s, p}));
    CHECK(rel_diff(lhs, rhs) < 1e-10);
  }
}

TEST_CASE("conv weight and input gradients match their oracles") {
  Rng rng(10);
  for (auto [k, s, p] : kTableGeometries) {
    const Tensor x = random_tensor(rng, {2, 3, 8, 8});
    const Tensor w = random_tensor(rng, {4, 3, k, k});
    const Tensor gy = random_tensor(rng, conv2d(x, w, Tensor(), {s, p}).shape());
    // <conv(x, w), gy> is linear in w and x, so gradients are exact probes.
    const Tensor gw = conv2d_backward_weight(x, gy, k, {s, p});
    CHECK(max_abs_diff(gw, reference::conv2d_backward_weight(x, gy, k, {s, p})) < 1e-12);
    for (std::size_t i : {0u, 7u, 23u}) {
      Tensor e(w.shape());
      e[i] = 1.0;
      CHECK(rel_diff(gw[i], dot(naive_conv(x, e, Tensor(), int(s), int(p)), gy)) < 1e-12);
    }
    const Tensor gx = conv2d_backward_input(gy, w, 8, 8, {s, p});
    for (std::size_t i : {0u, 65u, 300u}) {
      Tensor e(x.shape());
      e[i] = 1.0;
      CHECK(std::abs(gx[i] - dot(naive_conv(e, w, Tensor(), int(s), int(p)), gy)) < 1e-12);
    }
  }
}

TEST_CASE("deconv weight gradient is linear-probe exact") {
  Rng rng(12);
  const Tensor x = random_tensor(rng, {2, 4, 4, 4});
  const Tensor w = random_tensor(rng, {4, 3, 4, 4});
  const Tensor gy = random_tensor(rng, deconv2d(x, w, Tensor(), {2, 1}).shape());
  const Tensor gw = deconv2d_backward_weight(x, gy, 4, {2, 1});
  REQUIRE(gw.shape() == w.shape());
  for (std::size_t i : {0u, 17u, 100u, 191u}) {
    Tensor e(w.shape());
    e[i] = 1.0;
    CHECK(rel_diff(gw[i], dot(naive_deconv(x, e, Tensor(), 2, 1), gy)) < 1e-12);
  }
  const Tensor gx = deconv2d_backward_input(gy, w, {2, 1});
  for (std::size_t i : {0u, 31u, 127u}) {
    Tensor e(x.shape());
    e[i] = 1.0;
    CHECK(std::abs(gx[i] - dot(naive_deconv(e, w, Tensor(), 2, 1), gy)) < 1e-12);
  }
}

TEST_CASE("bias gradient is the per-channel sum") {
  Tensor g({2, 2, 1, 2}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor b = channel_sum(g);
  CHECK(b[0] == 1 + 2 + 5 + 6);
  CHECK(b[1] == 3 + 4 + 7 + 8);
}

TEST_CASE("linear layer") {
  const Tensor x({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor w({2, 3});
  const Tensor b({2}, std::vector<double>{0.5, -1.5});
  const Tensor y = linear(x, w, b);
  CHECK(y[0] == 0.5);
  CHECK(y[3] == -1.5);

  Rng rng(13);
  const Tensor xr = random_tensor(rng, {3, 2, 2, 2});
  const Tensor wr = random_tensor(rng, {4, 8});
  const Tensor gy = random_tensor(rng, {3, 4});
  const Tensor gx = linear_backward_input(gy, wr, xr.shape());
  const Tensor gw = linear_backward_weight(xr, gy);
  CHECK(gx.shape() == xr.shape());
  CHECK(rel_diff(dot(linear(xr, wr, Tensor()), gy), dot(xr, gx)) < 1e-12);
  CHECK(rel_diff(dot(linear(xr, wr, Tensor()), gy), dot(wr, gw)) < 1e-12);
}

namespace {

struct Stats {
  std::vector<double> mean, var, updates{0.0};
  explicit Stats(std::size_t c) : mean(c, 0.0), var(c, 1.0) {}
  RunningStats view() { return {mean, var, updates}; }
};

}  // namespace

TEST_CASE("batchnorm hand example with zero epsilon") {
  const Tensor x({2, 1, 1, 1}, std::vector<double>{1.0, 3.0});
  const Tensor gamma({1}, 1.0), beta({1}, 0.0);
  Stats s(1);
  const Tensor y = batchnorm(x, gamma, beta, Mode::train, s.view(), nullptr, 0.0);
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-15));
  // EMA of batch statistics (mean 2, biased variance 1).
  CHECK(s.mean[0] == doctest::Approx(0.2));
  CHECK(s.var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.0));
  CHECK(s.updates[0] == 1.0);
}

TEST_CASE("batchnorm: constant channel collapses to beta") {
  const Tensor x({4, 2, 3, 3}, 7.0);
  const Tensor gamma({2}, 1.0), beta({2}, std::vector<double>{0.0, 0.25});
  Stats s(2);
  const Tensor y = batchnorm(x, gamma, beta, Mode::train, s.view(), nullptr);
  for (std::size_t n = 0; n < 4; ++n) {
    CHECK(std::abs(y.at(n, 0, 1, 1)) < 1e-12);
    CHECK(y.at(n, 1, 2, 0) == doctest::Approx(0.25));
  }
}

TEST_CASE("batchnorm: train output is standardized per channel") {
  Rng rng(14);
  Tensor x = random_tensor(rng, {8, 3, 5, 5});
  x *= 4.0;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += 2.0;
  const Tensor gamma({3}, 1.0), beta({3}, 0.0);
  Stats s(3);
  const Tensor y = batchnorm(x, gamma, beta, Mode::train, s.view(), nullptr);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t i = 0; i < 25; ++i) m += y.at(n, c, i / 5, i % 5);
    m /= 200.0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t i = 0; i < 25; ++i) {
        const double d = y.at(n, c, i / 5, i % 5) - m;
        v += d * d;
      }
    v /= 200.0;
    CHECK(std::abs(m) < 1e-8);
    // eps = 1e-5 against a batch variance of about 16 shifts v by ~6e-7.
    CHECK(std::abs(v - 1.0) < 1e-6);
  }
}

TEST_CASE("batchnorm: already normalized input passes through") {
  const Tensor x({2, 1, 1, 1}, std::vector<double>{-1.0, 1.0});
  Stats s(1);
  const Tensor y =
      batchnorm(x, Tensor({1}, 1.0), Tensor({1}, 0.0), Mode::train, s.view(), nullptr);
  CHECK(std::abs(y[0] + 1.0) < 1e-5);
  CHECK(std::abs(y[1] - 1.0) < 1e-5);
}

TEST_CASE("batchnorm: eval mode uses running statistics and needs them") {
  const Tensor x({2, 1, 1, 1}, std::vector<double>{1.0, 3.0});
  const Tensor gamma({1}, 2.0), beta({1}, 0.5);
  Stats s(1);
  CHECK_THROWS_AS(batchnorm(x, gamma, beta, Mode::eval, s.view(), nullptr), StateError);
  s.mean[0] = 1.0;
  s.var[0] = 4.0;
  s.updates[0] = 3.0;
  const Tensor y = batchnorm(x, gamma, beta, Mode::eval, s.view(), nullptr, 0.0);
  CHECK(y[0] == doctest::Approx(0.5));
  CHECK(y[1] == doctest::Approx(2.5));
  CHECK(s.updates[0] == 3.0);
}

TEST_CASE("batchnorm: train mode needs two values per channel") {
  Stats s(1);
  CHECK_THROWS_AS(batchnorm(Tensor({1, 1, 1, 1}), Tensor({1}, 1.0), Tensor({1}),
                            Mode::train, s.view(), nullptr),
                  ShapeError);
}

TEST_CASE("batchnorm backward: input gradient sums to zero and matches differences") {
  Rng rng(15);
  Tensor x = random_tensor(rng, {4, 2, 3, 3});
  const Tensor gamma({2}, std::vector<double>{1.3, 0.7});
  const Tensor beta({2}, std::vector<double>{0.1, -0.2});
  const Tensor gy = random_tensor(rng, x.shape());
  Stats s(2);
  BatchNormCache cache;
  batchnorm(x, gamma, beta, Mode::train, s.view(), &cache);
  const auto g = batchnorm_backward(gy, gamma, cache);
  // Shifting a whole channel leaves the output unchanged.
  double total = 0.0;
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t i = 0; i < 9; ++i) total += g.input.at(n, 0, i / 3, i % 3);
  CHECK(std::abs(total) < 1e-12);

  auto objective = [&](const Tensor& in) {
    Stats t(2);
    return dot(batchnorm(in, gamma, beta, Mode::train, t.view(), nullptr), gy);
  };
  for (std::size_t i : {0u, 10u, 50u}) {
    const double h = 1e-6, saved = x[i];
    x[i] = saved + h;
    const double up = objective(x);
    x[i] = saved - h;
    const double down = objective(x);
    x[i] = saved;
    CHECK(rel_diff(g.input[i], (up - down) / (2 * h)) < 1e-6);
  }
}

TEST_CASE("activations") {
  const Tensor x({3}, std::vector<double>{-1.0, 0.0, 5.0});
  const Tensor leaky = activate(x, {ActivationKind::leaky_relu, 0.2});
  CHECK(leaky[0] == doctest::Approx(-0.2));
  CHECK(leaky[2] == 5.0);
  const Tensor relu = activate(Tensor({2}, std::vector<double>{-5.0, 5.0}),
                               {ActivationKind::relu});
  CHECK(relu[0] == 0.0);
  CHECK(relu[1] == 5.0);
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("sigmoid is symmetric and strictly inside (0, 1)") {
  for (double x = -50.0; x <= 50.0; x += 0.37) {
    CHECK(std::abs(sigmoid(x) + sigmoid(-x) - 1.0) < 1e-12);
  }
  for (double x : {-1000.0, -40.0, 40.0, 1000.0}) {
    CHECK(sigmoid(x) > 0.0);
    CHECK(sigmoid(x) < 1.0);
  }
}

TEST_CASE("activation derivatives") {
  const Tensor x({2}, std::vector<double>{-2.0, 0.0});
  const Tensor ones({2}, 1.0);
  const Tensor y = activate(x, {ActivationKind::sigmoid});
  const Tensor g = activation_backward(ones, x, y, {ActivationKind::sigmoid});
  CHECK(g[1] == doctest::Approx(0.25));
  const Tensor gl = activation_backward(ones, x, activate(x, {ActivationKind::leaky_relu}),
                                        {ActivationKind::leaky_relu, 0.2});
  CHECK(gl[0] == doctest::Approx(0.2));
  const Tensor gr =
      activation_backward(ones, x, activate(x, {ActivationKind::relu}), {ActivationKind::relu});
  CHECK(gr[0] == 0.0);
}

TEST_CASE("kink monitor records piecewise-linear sign patterns") {
  const Tensor x({3}, std::vector<double>{-1.0, 2.0, 0.0});
  KinkMonitor outer;
  activate(x, {ActivationKind::relu});
  activate(x, {ActivationKind::sigmoid});
  {
    KinkMonitor inner;
    activate(x, {ActivationKind::leaky_relu});
    CHECK(inner.pattern() == std::vector<bool>{false, true, false});
  }
  CHECK(outer.pattern() == std::vector<bool>{false, true, false});
}
