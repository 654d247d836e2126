#include "artgan/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "artgan/error.hpp"
#include "artgan/kernels.hpp"
#include "artgan/rng.hpp"

namespace artgan::nn {
namespace {

struct Evaluation {
  double loss = 0.0;
  std::vector<bool> pattern;
};

Evaluation evaluate(const std::function<double()>& loss, bool track) {
  if (!track) return {loss(), {}};
  kernels::KinkMonitor monitor;
  const double value = loss();
  return {value, monitor.pattern()};
}

}  // namespace

GradCheckReport grad_check(std::span<const GradTarget> targets,
                           const std::function<double()>& loss,
                           const GradCheckOptions& options) {
  if (!(options.min_step >= 1e-7 && options.step <= 1e-4 &&
        options.min_step <= options.step)) {
    throw ConfigError("grad_check steps must satisfy 1e-7 <= min_step <= step <= 1e-4");
  }
  Rng rng(options.seed);
  GradCheckReport report;
  const Evaluation base_eval = evaluate(loss, options.skip_kinks);
  const std::vector<bool>& base = base_eval.pattern;
  const double base_loss = base_eval.loss;
  for (const auto& t : targets) {
    if (!t.value || !t.analytic || t.value->shape() != t.analytic->shape()) {
      throw ShapeError("grad_check target '" + t.name +
                       "' has missing or mismatched gradient");
    }
    TargetSummary summary{t.name, 0, 0, 0.0};
    const std::size_t size = t.value->size();
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Lazy Fisher-Yates: slot k is drawn uniformly from the unvisited rest.
    for (std::size_t k = 0; k < size && summary.coordinates < options.max_coords; ++k) {
      std::swap(order[k], order[k + rng.uniform_index(size - k)]);
      const std::size_t i = order[k];
      double& x = (*t.value)[i];
      const double saved = x;
      bool smooth = false;
      double numeric = 0.0;
      for (double h = options.step; h >= options.min_step * (1.0 - 1e-9);
           h /= std::sqrt(10.0)) {
        x = saved + h;
        const Evaluation plus = evaluate(loss, options.skip_kinks);
        x = saved - h;
        const Evaluation minus = evaluate(loss, options.skip_kinks);
        x = saved;
        if (!std::isfinite(plus.loss) || !std::isfinite(minus.loss)) {
          throw NumericError("grad_check: loss is not finite when perturbing " +
                             t.name + "[" + std::to_string(i) + "]");
        }
        numeric = (plus.loss - minus.loss) / (2.0 * h);
        const bool plus_ok = plus.pattern == base, minus_ok = minus.pattern == base;
        smooth = !options.skip_kinks || (plus_ok && minus_ok);
        if (smooth) break;
        if (plus_ok == minus_ok) continue;
        // One side crosses a kink: second-order one-sided stencil on the
        // side that stays on the base point's smooth piece.
        const double dir = plus_ok ? 1.0 : -1.0;
        x = saved + 2.0 * dir * h;
        const Evaluation far = evaluate(loss, true);
        x = saved;
        if (far.pattern != base || !std::isfinite(far.loss)) continue;
        const double near = plus_ok ? plus.loss : minus.loss;
        numeric = dir * (-3.0 * base_loss + 4.0 * near - far.loss) / (2.0 * h);
        smooth = true;
        break;
      }
      if (!smooth) {
        ++summary.skipped;
        continue;
      }
      const double analytic = (*t.analytic)[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric),
                                     options.denominator_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++summary.coordinates;
      summary.max_rel_error = std::max(summary.max_rel_error, rel);
      if (rel > report.max_rel_error || report.coordinates == 0) {
        report.max_rel_error = rel;
        report.worst_target = t.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
      ++report.coordinates;
    }
    report.skipped += summary.skipped;
    report.targets.push_back(std::move(summary));
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

GradCheckReport grad_check(ParamStore& store, const std::function<double()>& loss,
                           const std::function<void()>& compute_gradients,
                           const GradCheckOptions& options,
                           const std::vector<std::string>& groups) {
  store.zero_grads();
  compute_gradients();
  // Snapshot analytic gradients: evaluating the loss may touch the buffers.
  std::vector<Tensor> analytic;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(i);
    if (e.kind != EntryKind::parameter) continue;
    if (!groups.empty() &&
        std::find(groups.begin(), groups.end(), e.group) == groups.end())
      continue;
    chosen.push_back(i);
    analytic.push_back(e.grad);
  }
  std::vector<GradTarget> targets;
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    auto& e = store.entry(chosen[k]);
    targets.push_back({e.name, &e.value, &analytic[k]});
  }
  return grad_check(targets, loss, options);
}

}  // namespace artgan::nn
