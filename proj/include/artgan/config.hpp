#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "artgan/model.hpp"

namespace artgan::train {

enum class DatasetKind { synth, cifar10, image_dir };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::synth;
  std::string path;                 // cifar10 / image_dir source
  std::size_t synth_classes = 3;
  std::size_t synth_per_class = 500;
};

// Every knob of a training run. Serialized as line-oriented `key = value`
// text with `#` comments; unknown keys are rejected.
struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  model::ModelConfig model;  // num_classes is taken from the dataset
  double base_lr = 1e-3;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  double lambda_rec = 1.0;
  std::size_t lr_drop_epoch = 80;
  double lr_drop_factor = 10.0;
  DatasetSpec dataset;
  double test_fraction = 0.3;
  std::filesystem::path output_dir = "artgan_run";
  std::size_t log_every = 1;         // metrics line every N steps
  std::size_t checkpoint_every = 1;  // epochs between checkpoints
  bool record_wall_time = false;     // off keeps metrics logs reproducible

  void validate() const;
  void set(std::string_view key, std::string_view value);
  std::string to_text() const;

  static TrainConfig parse(std::string_view text);
  static TrainConfig load(const std::filesystem::path& path);
};

std::string_view dataset_kind_name(DatasetKind kind);

}  // namespace artgan::train
