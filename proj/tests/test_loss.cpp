#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "artgan/error.hpp"
#include "artgan/loss.hpp"
#include "artgan/rng.hpp"

using namespace artgan;
using namespace artgan::loss;

namespace {

const double kLn2 = std::numbers::ln2;

// Extended precision keeps 1 - p accurate enough for |z| <= 20.
long double clamped_sigmoid(double z) {
  const long double p = 1.0L / (1.0L + std::exp(-static_cast<long double>(z)));
  return std::clamp(p, 1e-300L, 1.0L - 1e-18L);
}

double naive_row(const Tensor& logits, std::size_t row, std::size_t hot) {
  const std::size_t cols = logits.dim(1);
  long double s = 0.0L;
  for (std::size_t i = 0; i < cols; ++i) {
    const long double p = clamped_sigmoid(logits[row * cols + i]);
    s -= (i + 1 == hot) ? std::log(p) : std::log(1.0L - p);
  }
  return static_cast<double>(s);
}

Tensor uniform_logits(Rng& rng, std::size_t n, std::size_t cols, double span) {
  Tensor t({n, cols});
  for (auto& v : t.data()) v = (2.0 * rng.uniform() - 1.0) * span;
  return t;
}

std::vector<std::size_t> random_classes(Rng& rng, std::size_t n, std::size_t K) {
  std::vector<std::size_t> c(n);
  for (auto& v : c) v = rng.uniform_index(K) + 1;
  return c;
}

}  // namespace

TEST_CASE("one-hot label vectors") {
  CHECK(one_hot_real(1, 3).data()[0] == 1.0);
  const Tensor t = one_hot_real(3, 3);
  CHECK(std::vector<double>(t.data().begin(), t.data().end()) ==
        std::vector<double>{0, 0, 1, 0});
  CHECK_THROWS_AS(one_hot_real(4, 3), std::out_of_range);
  CHECK_THROWS_AS(one_hot_real(0, 3), std::out_of_range);
  const Tensor f = one_hot_fake(3);
  CHECK(std::vector<double>(f.data().begin(), f.data().end()) ==
        std::vector<double>{0, 0, 0, 1});
}

TEST_CASE("label batches are one-hot with FAKE reserved") {
  const std::vector<std::size_t> classes{2, 1, 3};
  const LabelBatch real = LabelBatch::real(classes, 3);
  const LabelBatch fake = LabelBatch::fake(3, 3);
  const LabelBatch g = LabelBatch::assigned(classes, 3);
  CHECK(real.targets().shape() == Shape{3, 4});
  CHECK(g.targets().shape() == Shape{3, 3});
  for (std::size_t r = 0; r < 3; ++r) {
    double rs = 0.0, fs = 0.0, gs = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      rs += real.targets()[r * 4 + i];
      fs += fake.targets()[r * 4 + i];
    }
    for (std::size_t i = 0; i < 3; ++i) gs += g.targets()[r * 3 + i];
    CHECK(rs == 1.0);
    CHECK(fs == 1.0);
    CHECK(gs == 1.0);
    CHECK(real.targets()[r * 4 + 3] == 0.0);
    CHECK(fake.targets()[r * 4 + 3] == 1.0);
    CHECK(real.targets()[r * 4 + classes[r] - 1] == 1.0);
  }
  const std::vector<std::size_t> bad{4};
  CHECK_THROWS_AS(LabelBatch::assigned(bad, 3), std::out_of_range);
  Tensor two_hot({1, 3}, std::vector<double>{1, 1, 0});
  CHECK_THROWS_AS(LabelBatch::from_assigned_targets(two_hot), std::invalid_argument);
  Tensor ok({2, 3}, std::vector<double>{0, 1, 0, 0, 0, 1});
  const LabelBatch parsed = LabelBatch::from_assigned_targets(ok);
  CHECK(parsed.classes()[0] == 2);
  CHECK(parsed.classes()[1] == 3);
}

TEST_CASE("discriminator loss at uniform logits") {
  const Tensor zeros({1, 3});
  const std::vector<std::size_t> k{1};
  const DiscriminatorLoss d = loss_d(zeros, k, zeros);
  CHECK(std::abs(d.real_term - 3 * kLn2) < 1e-9);
  CHECK(std::abs(d.fake_term - 3 * kLn2) < 1e-9);
  CHECK(std::abs(d.total - 6 * kLn2) < 1e-9);
}

TEST_CASE("discriminator loss vanishes under perfect classification") {
  const std::vector<std::size_t> k{1};
  for (double L : {20.0, 40.0, 800.0}) {
    const Tensor real({1, 3}, std::vector<double>{L, -L, -L});
    const Tensor fake({1, 3}, std::vector<double>{-L, -L, L});
    const DiscriminatorLoss d = loss_d(real, k, fake);
    CHECK(d.real_term <= 3.0 * std::exp(-L) * (1 + 1e-12));
    CHECK(d.fake_term <= 3.0 * std::exp(-L) * (1 + 1e-12));
    CHECK(std::isfinite(d.total));
  }
  const Tensor wrong({1, 3}, std::vector<double>{-800.0, 800.0, 800.0});
  CHECK(loss_d(wrong, k, wrong).total == doctest::Approx(4 * 800.0));
}

TEST_CASE("generator adversarial loss examples") {
  const std::vector<std::size_t> k{1};
  const LossResult u = loss_adv(Tensor({1, 3}), k);
  CHECK(std::abs(u.value - 3 * kLn2) < 1e-9);
  const Tensor perfect({1, 3}, std::vector<double>{50.0, -50.0, -50.0});
  CHECK(loss_adv(perfect, k).value < 1e-20);
  const std::vector<std::size_t> fake_class{3};
  CHECK_THROWS_AS(loss_adv(Tensor({1, 3}), fake_class), std::out_of_range);
  CHECK_THROWS_AS(loss_adv(Tensor({2, 3}), k), ShapeError);
}

TEST_CASE("adversarial gradient is (p - target) / M") {
  Rng rng(3);
  const std::size_t M = 5, K = 4;
  const Tensor z = uniform_logits(rng, M, K + 1, 4.0);
  const auto k = random_classes(rng, M, K);
  const LossResult r = loss_adv(z, k);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t i = 0; i < K + 1; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z[m * (K + 1) + i]));
      const double t = (i + 1 == k[m]) ? 1.0 : 0.0;
      CHECK(std::abs(r.grad[m * (K + 1) + i] - (p - t) / M) < 1e-15);
    }
}

TEST_CASE("reconstruction loss examples") {
  Rng rng(4);
  const Tensor x = sample_normal(rng, {2, 3, 4, 4});
  const LossResult same = loss_l2(x, x);
  CHECK(same.value == 0.0);
  CHECK(max_abs_diff(same.grad, Tensor(same.grad.shape())) == 0.0);

  Tensor a({1, 1, 1, 1}, 0.75), b({1, 1, 1, 1}, 0.25);
  CHECK(std::abs(loss_l2(a, b).value - 0.25) < 1e-9);

  Tensor r({2, 1, 1, 3}, std::vector<double>{1, 0, 0, 1, 1, 1});
  Tensor zero({2, 1, 1, 3});
  CHECK(std::abs(loss_l2(r, zero).value - 2.0) < 1e-9);
  CHECK_THROWS_AS(loss_l2(r, Tensor({2, 1, 1, 2})), ShapeError);
}

TEST_CASE("generator objective") {
  CHECK(loss_g(2.0, 0.5, 1.0) == 2.5);
  CHECK(loss_g(2.0, 0.5, 0.0) == 2.0);
  CHECK(loss_g(2.0, 0.5) == 2.5);
}

TEST_CASE("logit-space losses agree with clamped-probability evaluation") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t M = 1 + rng.uniform_index(6), K = 2 + rng.uniform_index(4);
    const Tensor real = uniform_logits(rng, M, K + 1, 20.0);
    const Tensor fake = uniform_logits(rng, M, K + 1, 20.0);
    const auto k = random_classes(rng, M, K);
    double naive_real = 0.0, naive_fake = 0.0, naive_adv = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      naive_real += naive_row(real, m, k[m]);
      naive_fake += naive_row(fake, m, K + 1);
      naive_adv += naive_row(fake, m, k[m]);
    }
    const DiscriminatorLoss d = loss_d(real, k, fake);
    CHECK(std::abs(d.real_term - naive_real / M) < 1e-9);
    CHECK(std::abs(d.fake_term - naive_fake / M) < 1e-9);
    CHECK(std::abs(loss_adv(fake, k).value - naive_adv / M) < 1e-9);
  }
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(6);
  const std::size_t M = 3, K = 3;
  Tensor real = uniform_logits(rng, M, K + 1, 3.0);
  Tensor fake = uniform_logits(rng, M, K + 1, 3.0);
  const auto k = random_classes(rng, M, K);
  const DiscriminatorLoss d = loss_d(real, k, fake);
  const LossResult adv = loss_adv(fake, k);
  const double h = 1e-5;
  auto rel = [](double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-10});
  };
  for (std::size_t i = 0; i < real.size(); ++i) {
    const double s = real[i];
    real[i] = s + h;
    const double up = loss_d(real, k, fake).total;
    real[i] = s - h;
    const double down = loss_d(real, k, fake).total;
    real[i] = s;
    CHECK(rel(d.grad_real[i], (up - down) / (2 * h)) < 1e-6);
  }
  for (std::size_t i = 0; i < fake.size(); ++i) {
    const double s = fake[i];
    fake[i] = s + h;
    const double up_d = loss_d(real, k, fake).total, up_a = loss_adv(fake, k).value;
    fake[i] = s - h;
    const double dn_d = loss_d(real, k, fake).total, dn_a = loss_adv(fake, k).value;
    fake[i] = s;
    CHECK(rel(d.grad_fake[i], (up_d - dn_d) / (2 * h)) < 1e-6);
    CHECK(rel(adv.grad[i], (up_a - dn_a) / (2 * h)) < 1e-6);
  }

  Tensor rec = sample_normal(rng, {2, 1, 2, 2});
  const Tensor target = sample_normal(rng, {2, 1, 2, 2});
  const LossResult l2 = loss_l2(rec, target);
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double s = rec[i];
    rec[i] = s + h;
    const double up = loss_l2(rec, target).value;
    rec[i] = s - h;
    const double down = loss_l2(rec, target).value;
    rec[i] = s;
    CHECK(rel(l2.grad[i], (up - down) / (2 * h)) < 1e-6);
  }
}

TEST_CASE("losses are permutation invariant") {
  Rng rng(7);
  const std::size_t M = 6, K = 4;
  const Tensor real = uniform_logits(rng, M, K + 1, 5.0);
  const Tensor fake = uniform_logits(rng, M, K + 1, 5.0);
  const auto k = random_classes(rng, M, K);
  const double base_d = loss_d(real, k, fake).total;
  const double base_adv = loss_adv(fake, k).value;

  // Shuffle samples.
  std::vector<std::size_t> order(M);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  Tensor real_p({M, K + 1}), fake_p({M, K + 1});
  std::vector<std::size_t> k_p(M);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t i = 0; i <= K; ++i) {
      real_p[m * (K + 1) + i] = real[order[m] * (K + 1) + i];
      fake_p[m * (K + 1) + i] = fake[order[m] * (K + 1) + i];
    }
    k_p[m] = k[order[m]];
  }
  CHECK(std::abs(loss_d(real_p, k_p, fake_p).total - base_d) < 1e-12);
  CHECK(std::abs(loss_adv(fake_p, k_p).value - base_adv) < 1e-12);

  // Relabel the real classes consistently; FAKE stays last.
  std::vector<std::size_t> perm(K);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);
  Tensor fake_c({M, K + 1});
  std::vector<std::size_t> k_c(M);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t i = 0; i < K; ++i) fake_c[m * (K + 1) + perm[i]] = fake[m * (K + 1) + i];
    fake_c[m * (K + 1) + K] = fake[m * (K + 1) + K];
    k_c[m] = perm[k[m] - 1] + 1;
  }
  CHECK(std::abs(loss_adv(fake_c, k_c).value - base_adv) < 1e-12);
}

TEST_CASE("losses are non-negative") {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t M = 1 + rng.uniform_index(4), K = 2 + rng.uniform_index(5);
    const Tensor real = uniform_logits(rng, M, K + 1, 60.0);
    const Tensor fake = uniform_logits(rng, M, K + 1, 60.0);
    const auto k = random_classes(rng, M, K);
    const DiscriminatorLoss d = loss_d(real, k, fake);
    CHECK(d.real_term >= 0.0);
    CHECK(d.fake_term >= 0.0);
    CHECK(loss_adv(fake, k).value >= 0.0);
  }
}

TEST_CASE("stable primitives") {
  CHECK(log_sigmoid(0.0) == doctest::Approx(-kLn2));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(log_sigmoid(800.0) == 0.0);
  CHECK(bce_with_logits(0.0, 1.0) == doctest::Approx(kLn2));
  CHECK(bce_with_logits(-1000.0, 0.0) == 0.0);
}
