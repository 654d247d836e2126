#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "artgan/grad_check.hpp"
#include "artgan/model.hpp"

namespace artgan::verify {

struct GradSuiteOptions {
  std::uint64_t seed = 7;
  std::size_t batch = 4;
  model::ModelConfig model{8, 3, {1, 32}, 64};
  double lambda_rec = 1.0;
  nn::GradCheckOptions check{};
};

struct GradSuiteCase {
  std::string name;
  nn::GradCheckReport report;
};

struct GradSuiteReport {
  std::vector<GradSuiteCase> cases;
  double max_rel_error = 0.0;
  bool passed = true;
};

// Finite-difference checks of every training gradient on a small model:
//   L_D w.r.t. theta_D (real and generated images held fixed),
//   L_adv + lambda * L_L2 w.r.t. theta_G (adversarial path through D,
//   reconstruction path through Enc into Dec),
//   L_adv w.r.t. the generated images (D's input gradient).
// Batchnorm runs with batch statistics, as in training.
GradSuiteReport run_grad_suite(const GradSuiteOptions& options = {});

}  // namespace artgan::verify
