#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "artgan/tensor.hpp"

namespace artgan::loss {

// One-hot label rows. Class indices are 1-based; with K real classes the
// discriminator has K+1 outputs and index K+1 is the FAKE class.
class LabelBatch {
 public:
  // N x (K+1) discriminator targets for real samples of classes k in 1..K.
  static LabelBatch real(std::span<const std::size_t> classes, std::size_t K);
  // N x (K+1) discriminator targets for generated samples (all FAKE).
  static LabelBatch fake(std::size_t n, std::size_t K);
  // N x K generator conditioning vectors for assigned classes in 1..K.
  static LabelBatch assigned(std::span<const std::size_t> classes, std::size_t K);
  // Validates an N x K matrix of generator conditioning vectors.
  static LabelBatch from_assigned_targets(const Tensor& targets);

  std::size_t num_classes() const noexcept { return K_; }
  std::size_t size() const noexcept { return classes_.size(); }
  const Tensor& targets() const noexcept { return targets_; }
  std::span<const std::size_t> classes() const noexcept { return classes_; }

 private:
  LabelBatch(std::size_t K, std::vector<std::size_t> classes, Tensor targets)
      : K_(K), classes_(std::move(classes)), targets_(std::move(targets)) {}

  std::size_t K_ = 0;
  std::vector<std::size_t> classes_;
  Tensor targets_;
};

// Length-(K+1) vector with a 1 at position k (1-based) and 0 at K+1.
Tensor one_hot_real(std::size_t k, std::size_t K);
// Length-(K+1) vector with a 1 only at the FAKE position K+1.
Tensor one_hot_fake(std::size_t K);

// Sum over outputs of binary cross-entropy between sigmoid(logit) and the
// target, via softplus(z) - t*z so no probability is ever clamped.
double bce_with_logits(double logit, double target) noexcept;
double log_sigmoid(double z) noexcept;

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d value / d input
};

struct DiscriminatorLoss {
  double real_term = 0.0;
  double fake_term = 0.0;
  double total = 0.0;
  Tensor grad_real;  // d total / d real_logits
  Tensor grad_fake;  // d total / d fake_logits
};

// Discriminator loss over K+1 independent sigmoid outputs:
//   real: -[log p_k + sum_{i != k} log(1 - p_i)]            (k in 1..K)
//   fake: -[sum_{i <= K} log(1 - p_i) + log p_{K+1}]
// each averaged over its batch; total = real + fake.
DiscriminatorLoss loss_d(const Tensor& real_logits,
                         std::span<const std::size_t> real_classes,
                         const Tensor& fake_logits);

// Generator adversarial loss on generated samples with assigned classes:
//   -[log p_khat + sum_{i != khat} log(1 - p_i)], i ranging over 1..K+1,
// averaged over the batch. FAKE may not be assigned.
LossResult loss_adv(const Tensor& fake_logits,
                    std::span<const std::size_t> assigned_classes);

// Batch mean of per-image squared L2 norm ||reconstruction - target||^2.
LossResult loss_l2(const Tensor& reconstruction, const Tensor& target);

// Generator objective adv + lambda_rec * l2 (lambda_rec = 1 by default).
double loss_g(double adv, double l2, double lambda_rec = 1.0);

}  // namespace artgan::loss
