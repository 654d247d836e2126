#include "artgan/optim.hpp"

#include <cmath>

#include "artgan/error.hpp"

namespace artgan::optim {

RmsProp::RmsProp(const nn::ParamStore& store, RmsPropConfig config)
    : config_(config) {
  accum_.reserve(store.size());
  for (const auto& e : store.entries()) {
    accum_.push_back(e.kind == nn::EntryKind::parameter
                         ? Tensor::zeros_like(e.value)
                         : Tensor());
  }
}

void RmsProp::step(nn::ParamStore& store, double lr) {
  if (store.size() != accum_.size()) {
    throw ShapeError("RmsProp: optimizer state has " +
                     std::to_string(accum_.size()) + " entries, store has " +
                     std::to_string(store.size()));
  }
  for (const auto& e : store.entries()) {
    if (e.kind == nn::EntryKind::parameter && !e.grad.all_finite()) {
      throw NumericError("non-finite gradient in parameter '" + e.name + "'");
    }
  }
  const double keep = config_.decay;
  const double mix = 1.0 - config_.decay;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    if (e.kind != nn::EntryKind::parameter) continue;
    auto r = accum_[i].data();
    auto theta = e.value.data();
    const auto g = e.grad.data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      r[j] = keep * r[j] + mix * g[j] * g[j];
      theta[j] -= lr * g[j] / (std::sqrt(r[j]) + config_.epsilon);
    }
  }
  ++steps_;
}

void RmsProp::restore(RmsPropConfig config, std::uint64_t steps,
                      std::vector<Tensor> accumulators) {
  if (accumulators.size() != accum_.size()) {
    throw ShapeError("RmsProp: restored state has " +
                     std::to_string(accumulators.size()) + " entries, expected " +
                     std::to_string(accum_.size()));
  }
  for (std::size_t i = 0; i < accum_.size(); ++i) {
    if (accumulators[i].shape() != accum_[i].shape()) {
      throw ShapeError("RmsProp: accumulator " + std::to_string(i) + " has shape " +
                       accumulators[i].shape_string() + ", expected " +
                       accum_[i].shape_string());
    }
  }
  config_ = config;
  steps_ = steps;
  accum_ = std::move(accumulators);
}

}  // namespace artgan::optim
