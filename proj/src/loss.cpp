#include "artgan/loss.hpp"

#include <cmath>
#include <string>

#include "artgan/error.hpp"
#include "artgan/kernels.hpp"

namespace artgan::loss {
namespace {

void check_class(std::size_t k, std::size_t K, const char* what) {
  if (k < 1 || k > K) {
    throw std::out_of_range(std::string(what) + ": class " + std::to_string(k) +
                            " outside 1.." + std::to_string(K));
  }
}

std::size_t logits_classes(const Tensor& logits, const char* what) {
  if (logits.rank() != 2 || logits.dim(1) < 3) {
    throw ShapeError(std::string(what) +
                     ": logits must be N x (K+1) with K >= 2, got " +
                     logits.shape_string());
  }
  return logits.dim(1) - 1;
}

// Mean over rows of the summed BCE against one-hot `hot` (0-based column).
double add_row_bce(const Tensor& logits, std::size_t row, std::size_t hot,
                   double inv_n, Tensor& grad) {
  const std::size_t width = logits.dim(1);
  double acc = 0.0;
  for (std::size_t i = 0; i < width; ++i) {
    const double z = logits[row * width + i];
    const double t = i == hot ? 1.0 : 0.0;
    acc += bce_with_logits(z, t);
    grad[row * width + i] = (kernels::sigmoid(z) - t) * inv_n;
  }
  return acc;
}

}  // namespace

LabelBatch LabelBatch::real(std::span<const std::size_t> classes, std::size_t K) {
  Tensor t({classes.size(), K + 1});
  for (std::size_t r = 0; r < classes.size(); ++r) {
    check_class(classes[r], K, "real label");
    t[r * (K + 1) + classes[r] - 1] = 1.0;
  }
  return {K, {classes.begin(), classes.end()}, std::move(t)};
}

LabelBatch LabelBatch::fake(std::size_t n, std::size_t K) {
  Tensor t({n, K + 1});
  for (std::size_t r = 0; r < n; ++r) t[r * (K + 1) + K] = 1.0;
  return {K, std::vector<std::size_t>(n, K + 1), std::move(t)};
}

LabelBatch LabelBatch::assigned(std::span<const std::size_t> classes,
                                std::size_t K) {
  Tensor t({classes.size(), K});
  for (std::size_t r = 0; r < classes.size(); ++r) {
    check_class(classes[r], K, "assigned label");
    t[r * K + classes[r] - 1] = 1.0;
  }
  return {K, {classes.begin(), classes.end()}, std::move(t)};
}

LabelBatch LabelBatch::from_assigned_targets(const Tensor& targets) {
  if (targets.rank() != 2) {
    throw ShapeError("label targets must be N x K, got " +
                     targets.shape_string());
  }
  const std::size_t n = targets.dim(0), K = targets.dim(1);
  std::vector<std::size_t> classes(n);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t ones = 0;
    for (std::size_t c = 0; c < K; ++c) {
      const double v = targets[r * K + c];
      if (v == 1.0) {
        ++ones;
        classes[r] = c + 1;
      } else if (v != 0.0) {
        ones = 2;  // not a zero/one vector
        break;
      }
    }
    if (ones != 1) {
      throw std::invalid_argument("label row " + std::to_string(r) +
                                  " is not a one-hot vector");
    }
  }
  return {K, std::move(classes), targets};
}

Tensor one_hot_real(std::size_t k, std::size_t K) {
  check_class(k, K, "one_hot_real");
  Tensor t({K + 1});
  t[k - 1] = 1.0;
  return t;
}

Tensor one_hot_fake(std::size_t K) {
  Tensor t({K + 1});
  t[K] = 1.0;
  return t;
}

double log_sigmoid(double z) noexcept {
  // log(sigmoid(z)) = -softplus(-z)
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double bce_with_logits(double logit, double target) noexcept {
  // -[t log s(z) + (1 - t) log(1 - s(z))] with log(1 - s(z)) = log s(-z)
  return -(target * log_sigmoid(logit) + (1.0 - target) * log_sigmoid(-logit));
}

DiscriminatorLoss loss_d(const Tensor& real_logits,
                         std::span<const std::size_t> real_classes,
                         const Tensor& fake_logits) {
  const std::size_t K = logits_classes(real_logits, "loss_d real");
  if (logits_classes(fake_logits, "loss_d fake") != K) {
    throw ShapeError("loss_d: real " + real_logits.shape_string() + " and fake " +
                     fake_logits.shape_string() + " disagree on K");
  }
  if (real_classes.size() != real_logits.dim(0)) {
    throw ShapeError("loss_d: " + std::to_string(real_classes.size()) +
                     " labels for " + std::to_string(real_logits.dim(0)) +
                     " real samples");
  }
  DiscriminatorLoss out;
  out.grad_real = Tensor(real_logits.shape());
  out.grad_fake = Tensor(fake_logits.shape());
  const double inv_real = 1.0 / static_cast<double>(real_logits.dim(0));
  const double inv_fake = 1.0 / static_cast<double>(fake_logits.dim(0));
  for (std::size_t r = 0; r < real_logits.dim(0); ++r) {
    check_class(real_classes[r], K, "loss_d");
    out.real_term +=
        add_row_bce(real_logits, r, real_classes[r] - 1, inv_real, out.grad_real);
  }
  for (std::size_t r = 0; r < fake_logits.dim(0); ++r) {
    out.fake_term += add_row_bce(fake_logits, r, K, inv_fake, out.grad_fake);
  }
  out.real_term *= inv_real;
  out.fake_term *= inv_fake;
  out.total = out.real_term + out.fake_term;
  return out;
}

LossResult loss_adv(const Tensor& fake_logits,
                    std::span<const std::size_t> assigned_classes) {
  const std::size_t K = logits_classes(fake_logits, "loss_adv");
  if (assigned_classes.size() != fake_logits.dim(0)) {
    throw ShapeError("loss_adv: " + std::to_string(assigned_classes.size()) +
                     " assignments for " + std::to_string(fake_logits.dim(0)) +
                     " samples");
  }
  LossResult out{0.0, Tensor(fake_logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(fake_logits.dim(0));
  for (std::size_t r = 0; r < fake_logits.dim(0); ++r) {
    if (assigned_classes[r] == K + 1) {
      throw std::out_of_range("loss_adv: the FAKE class " +
                              std::to_string(K + 1) + " cannot be assigned");
    }
    check_class(assigned_classes[r], K, "loss_adv");
    out.value +=
        add_row_bce(fake_logits, r, assigned_classes[r] - 1, inv_n, out.grad);
  }
  out.value *= inv_n;
  return out;
}

LossResult loss_l2(const Tensor& reconstruction, const Tensor& target) {
  if (reconstruction.shape() != target.shape() || reconstruction.rank() < 1) {
    throw ShapeError("loss_l2: " + reconstruction.shape_string() + " vs " +
                     target.shape_string());
  }
  const double inv_n = 1.0 / static_cast<double>(target.dim(0));
  LossResult out{0.0, Tensor(target.shape())};
  // Neumaier summation: the sum spans every pixel of the batch.
  double sum = 0.0, carry = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = reconstruction[i] - target[i];
    const double term = d * d;
    const double t = sum + term;
    carry += std::abs(sum) >= term ? (sum - t) + term : (term - t) + sum;
    sum = t;
    out.grad[i] = 2.0 * d * inv_n;
  }
  out.value = (sum + carry) * inv_n;
  return out;
}

double loss_g(double adv, double l2, double lambda_rec) {
  return adv + lambda_rec * l2;
}

}  // namespace artgan::loss
