#include "artgan/grad_suite.hpp"

#include <algorithm>
#include <cmath>

#include "artgan/loss.hpp"
#include "artgan/rng.hpp"

namespace artgan::verify {
namespace {

using nn::Mode;

std::vector<std::size_t> random_classes(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> out(n);
  for (auto& c : out) c = 1 + rng.uniform_index(k);
  return out;
}

}  // namespace

GradSuiteReport run_grad_suite(const GradSuiteOptions& options) {
  const auto& cfg = options.model;
  cfg.validate();
  Rng rng(options.seed);
  model::ArtGan net = model::build(cfg, rng);
  auto& G = net.generator;
  auto& D = net.discriminator;
  const std::size_t n = options.batch;

  Tensor real({n, 3, cfg.image_size, cfg.image_size});
  for (double& v : real.data()) v = rng.uniform();
  const auto real_classes = random_classes(rng, n, cfg.num_classes);
  const Tensor noise = sample_normal(rng, {n, cfg.noise_dim});
  const auto assigned = random_classes(rng, n, cfg.num_classes);
  const auto y_hat = loss::LabelBatch::assigned(assigned, cfg.num_classes);
  const Tensor fake = G.generate(noise, y_hat, Mode::train, nullptr);

  GradSuiteReport suite;
  auto record = [&](std::string name, nn::GradCheckReport report) {
    suite.max_rel_error = std::max(suite.max_rel_error, report.max_rel_error);
    suite.passed = suite.passed && report.passed;
    suite.cases.push_back({std::move(name), std::move(report)});
  };
  auto check = options.check;

  // L_D through theta_D.
  auto loss_d = [&] {
    const auto r = D.discriminate(real, Mode::train, nullptr);
    const auto f = D.discriminate(fake, Mode::train, nullptr);
    return loss::loss_d(r.logits, real_classes, f.logits).total;
  };
  auto grads_d = [&] {
    D.params().zero_grads();
    nn::StackCache rc, fc;
    const auto r = D.discriminate(real, Mode::train, &rc);
    const auto f = D.discriminate(fake, Mode::train, &fc);
    const auto l = loss::loss_d(r.logits, real_classes, f.logits);
    D.backward(l.grad_real, rc, {.param_grads = true, .input_grad = false});
    D.backward(l.grad_fake, fc, {.param_grads = true, .input_grad = false});
  };
  check.seed = options.seed * 3 + 1;
  record("L_D / theta_D", nn::grad_check(D.params(), loss_d, grads_d, check));

  // L_adv + lambda * L_L2 through theta_G. L_L2 is evaluated relative to its
  // value at the unperturbed parameters so the returned loss stays O(1) and
  // the central difference is not swamped by rounding of a large total.
  const double lambda = options.lambda_rec;
  const Tensor recon0 = model::reconstruct(G, D, real, Mode::train, nullptr);
  auto l2_offset = [&](const Tensor& recon) {
    double sum = 0.0, carry = 0.0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
      const double term =
          (recon[i] - recon0[i]) * (recon[i] + recon0[i] - 2.0 * real[i]);
      const double t = sum + term;
      carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
      sum = t;
    }
    return (sum + carry) / static_cast<double>(n);
  };
  auto loss_g = [&] {
    const Tensor x = G.generate(noise, y_hat, Mode::train, nullptr);
    const auto f = D.discriminate(x, Mode::train, nullptr);
    const double adv = loss::loss_adv(f.logits, assigned).value;
    const Tensor recon = model::reconstruct(G, D, real, Mode::train, nullptr);
    return loss::loss_g(adv, l2_offset(recon), lambda);
  };
  auto grads_g = [&] {
    G.params().zero_grads();
    nn::StackCache gc, fc, dc;
    const Tensor x = G.generate(noise, y_hat, Mode::train, &gc);
    const auto f = D.discriminate(x, Mode::train, &fc);
    const auto adv = loss::loss_adv(f.logits, assigned);
    const Tensor gx = D.backward(adv.grad, fc, {.param_grads = false, .input_grad = true});
    G.backward(gx, gc, {.param_grads = true, .input_grad = false});
    const Tensor recon = model::reconstruct(G, D, real, Mode::train, &dc);
    auto l2 = loss::loss_l2(recon, real);
    l2.grad *= lambda;
    G.backward_decode(l2.grad, dc, {.param_grads = true, .input_grad = false});
  };
  check.seed = options.seed * 3 + 2;
  record("L_adv + lambda L_L2 / theta_G",
         nn::grad_check(G.params(), loss_g, grads_g, check));

  // L_adv w.r.t. D's input.
  Tensor images = fake;
  Tensor image_grad;
  {
    nn::StackCache fc;
    const auto f = D.discriminate(images, Mode::train, &fc);
    const auto adv = loss::loss_adv(f.logits, assigned);
    image_grad = D.backward(adv.grad, fc, {.param_grads = false, .input_grad = true});
  }
  auto loss_adv = [&] {
    const auto f = D.discriminate(images, Mode::train, nullptr);
    return loss::loss_adv(f.logits, assigned).value;
  };
  const nn::GradTarget target{"generated images", &images, &image_grad};
  check.seed = options.seed * 3 + 3;
  record("L_adv / generated images",
         nn::grad_check(std::span(&target, 1), loss_adv, check));
  return suite;
}

}  // namespace artgan::verify
