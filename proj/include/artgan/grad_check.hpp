#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "artgan/param_store.hpp"
#include "artgan/tensor.hpp"

namespace artgan::nn {

// A tensor to perturb and the analytic gradient to compare against.
struct GradTarget {
  std::string name;
  Tensor* value = nullptr;
  const Tensor* analytic = nullptr;
};

struct GradCheckOptions {
  // Central-difference h, within [1e-7, 1e-4]. With skip_kinks, a
  // coordinate whose interval crosses a kink is retried with h shrunk by
  // sqrt(10) per attempt down to min_step.
  double step = 1e-5;
  double min_step = 1e-7;
  double tolerance = 1e-4;     // pass bound on the max relative error
  std::size_t max_coords = 200;  // per tensor; smaller tensors are checked fully
  std::uint64_t seed = 0;      // coordinate sampling
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor). The floor
  // keeps roundoff in near-zero gradients from dominating the ratio.
  double denominator_floor = 1e-7;
  // A perturbation that changes the sign pattern of any ReLU / leaky-ReLU
  // input straddles a point where the loss is not differentiable. If only
  // one side crosses, a one-sided second-order stencil on the other side is
  // used; otherwise the step shrinks, and a coordinate that never clears
  // is skipped and replaced by a fresh one.
  bool skip_kinks = true;
};

struct TargetSummary {
  std::string name;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_target;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;
  std::vector<TargetSummary> targets;
  bool passed = true;
};

// Compares analytic gradients with (L(t + h) - L(t - h)) / 2h on sampled
// coordinates. Each perturbed value is restored exactly afterwards.
GradCheckReport grad_check(std::span<const GradTarget> targets,
                           const std::function<double()>& loss,
                           const GradCheckOptions& options = {});

// Checks every parameter (not buffer) entry of `store`, optionally limited
// to those whose group is listed. `compute_gradients` must leave the
// analytic gradient of `loss` in the store's gradient buffers.
GradCheckReport grad_check(ParamStore& store, const std::function<double()>& loss,
                           const std::function<void()>& compute_gradients,
                           const GradCheckOptions& options = {},
                           const std::vector<std::string>& groups = {});

}  // namespace artgan::nn
