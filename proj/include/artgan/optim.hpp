#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "artgan/param_store.hpp"

namespace artgan::optim {

struct RmsPropConfig {
  double decay = 0.9;
  double epsilon = 1e-8;
};

// Plain RMSProp (no momentum):
//   r     <- decay * r + (1 - decay) * g^2
//   theta <- theta - lr * g / (sqrt(r) + epsilon)
// One accumulator per store entry; buffers are never touched.
class RmsProp {
 public:
  RmsProp() = default;
  RmsProp(const nn::ParamStore& store, RmsPropConfig config = {});

  // Applies one update from the store's gradient buffers. Throws
  // NumericError naming the first non-finite gradient before changing
  // anything.
  void step(nn::ParamStore& store, double lr);

  const RmsPropConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return steps_; }
  const std::vector<Tensor>& accumulators() const noexcept { return accum_; }

  // Restore from serialized state; shapes must match the store.
  void restore(RmsPropConfig config, std::uint64_t steps,
               std::vector<Tensor> accumulators);

 private:
  RmsPropConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<Tensor> accum_;
};

struct LrSchedule {
  double base_lr = 1e-3;
  std::size_t drop_epoch = 80;
  double drop_factor = 10.0;

  double at(std::size_t epoch) const noexcept {
    return epoch < drop_epoch ? base_lr : base_lr / drop_factor;
  }
};

// base_lr before `drop_epoch`, base_lr / drop_factor from it on.
inline double lr_at_epoch(std::size_t epoch, double base_lr,
                          std::size_t drop_epoch = 80, double drop_factor = 10.0) {
  return LrSchedule{base_lr, drop_epoch, drop_factor}.at(epoch);
}

}  // namespace artgan::optim
