#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "artgan/config.hpp"
#include "artgan/data.hpp"
#include "artgan/model.hpp"
#include "artgan/optim.hpp"
#include "artgan/rng.hpp"

namespace artgan::train {

// Everything a run needs to continue bit-exactly.
struct TrainState {
  model::ArtGan model;
  optim::RmsProp opt_d;
  optim::RmsProp opt_g;
  Rng rng;
  std::uint64_t epoch = 0;  // completed epochs
  std::uint64_t step = 0;   // completed steps

  // Builds the networks from Rng(seed); the same stream then drives
  // shuffling, noise and label assignment.
  static TrainState initialize(const model::ModelConfig& config,
                               const optim::RmsPropConfig& rms,
                               std::uint64_t seed);
};

struct StepOptions {
  double lr_d = 1e-3;
  double lr_g = 1e-3;
  double lambda_rec = 1.0;
  // Scales the adversarial gradient reaching G. 1 in normal training; 0
  // isolates the reconstruction path.
  double adversarial_weight = 1.0;
};

struct StepMetrics {
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  double loss_d = 0.0;
  double loss_adv = 0.0;
  double loss_l2 = 0.0;
  double loss_g = 0.0;
  double real_accuracy = 0.0;   // argmax over K+1 outputs equals true class
  double fake_detection = 0.0;  // p(FAKE) > 0.5 on generated samples
  double wall_time = 0.0;       // seconds, 0 unless recorded

  friend bool operator==(const StepMetrics&, const StepMetrics&) = default;
};

// One iteration of the training algorithm on a real minibatch:
//  1. sample noise Z ~ N(0,1)^{n x d} and labels k_hat uniform on 1..K
//  2. D(X_r), X_hat = G(Z, y_hat), D(X_hat)
//  3. gradient of L_adv through D (parameters untouched) into G
//  4. RMSProp step on theta_D from L_D, with X_hat held constant
//  5. Dec(Enc(X_r)) with the updated Enc; L_L2 gradient into Dec only
//  6. RMSProp step on theta_G from L_adv + lambda_rec * L_L2
// A non-finite loss or gradient restores the model and optimizer state and
// throws NumericError; the random stream stays advanced.
StepMetrics train_step(TrainState& state, const Tensor& real_images,
                       std::span<const std::size_t> real_classes,
                       const StepOptions& options);

struct TrainResult {
  TrainState state;
  std::vector<StepMetrics> metrics;  // steps run by this call
  std::size_t aborted_steps = 0;
  std::filesystem::path final_checkpoint;
  std::filesystem::path metrics_log;
};

// Runs (config.epochs - state.epoch) epochs over `train_set` with seeded
// per-epoch shuffling, dropping the last partial batch. Writes
// <output_dir>/metrics.tsv, checkpoints/epoch_NNNN.ckpt and final.ckpt.
// With `resume`, continues from that checkpoint and appends to the log.
TrainResult train(const TrainConfig& config, const data::LabeledImageSet& train_set,
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

// Builds the dataset a config names (synth sets use config.seed).
data::LabeledImageSet load_dataset(const TrainConfig& config);
// Train / test partition of that dataset: CIFAR-10 uses its own test batch,
// other sources a stratified split by config.test_fraction and config.seed.
data::Split load_split(const TrainConfig& config);

// Metrics log: UTF-8, tab-separated StepMetrics fields, '#' header line.
std::string metrics_header();
std::string format_metrics(const StepMetrics& m);
StepMetrics parse_metrics(std::string_view line);
std::vector<StepMetrics> read_metrics_log(const std::filesystem::path& path);

// Checkpoint container (all integers u64 little-endian, floats IEEE-754
// binary64 little-endian):
//   "ARTGAN01"
//   noise_dim, num_classes, width_num, width_den, image_size
//   for theta_D then theta_G: count, then per entry
//       name_len, name bytes, rank, extents..., values...
//   for opt_D then opt_G: decay (f64), epsilon (f64), steps, count, then
//       per accumulator: rank, extents..., values...
//   rng_len, rng state bytes
//   epoch, step
//   "ARTGANEN"
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
// Restores using the stored model configuration.
TrainState load_checkpoint(const std::filesystem::path& path);
// Restores into a model built from `expected`; any tensor whose name or
// shape differs is reported by name.
TrainState load_checkpoint(const std::filesystem::path& path,
                           const model::ModelConfig& expected);

}  // namespace artgan::train
