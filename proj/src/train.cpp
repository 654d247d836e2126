#include "artgan/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "artgan/error.hpp"
#include "artgan/loss.hpp"

namespace artgan::train {

using nn::Mode;

TrainState TrainState::initialize(const model::ModelConfig& config,
                                  const optim::RmsPropConfig& rms,
                                  std::uint64_t seed) {
  Rng rng(seed);
  model::ArtGan net = model::build(config, rng);
  optim::RmsProp opt_d(net.discriminator.params(), rms);
  optim::RmsProp opt_g(net.generator.params(), rms);
  return TrainState{std::move(net), std::move(opt_d), std::move(opt_g),
                    std::move(rng), 0, 0};
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string(what) + " is not finite");
  }
}

double real_accuracy(const Tensor& logits, std::span<const std::size_t> classes) {
  const std::size_t width = logits.dim(1);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < classes.size(); ++r) {
    const double* row = logits.raw() + r * width;
    const auto best = static_cast<std::size_t>(
        std::max_element(row, row + width) - row);
    if (best + 1 == classes[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(classes.size());
}

double fake_detection(const Tensor& logits) {
  const std::size_t width = logits.dim(1);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < logits.dim(0); ++r) {
    if (logits[r * width + width - 1] > 0.0) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(logits.dim(0));
}

StepMetrics run_step(TrainState& s, const Tensor& real_images,
                     std::span<const std::size_t> real_classes,
                     const StepOptions& o) {
  auto& G = s.model.generator;
  auto& D = s.model.discriminator;
  const auto& cfg = s.model.config;
  const std::size_t n = real_images.dim(0);
  if (real_classes.size() != n) {
    throw ShapeError("train_step: " + std::to_string(real_classes.size()) +
                     " labels for " + std::to_string(n) + " images");
  }

  // Noise and randomly assigned labels.
  const Tensor noise = sample_normal(s.rng, {n, cfg.noise_dim});
  std::vector<std::size_t> assigned(n);
  for (auto& k : assigned) k = 1 + s.rng.uniform_index(cfg.num_classes);
  const auto y_hat = loss::LabelBatch::assigned(assigned, cfg.num_classes);

  // Y = D(X_r), X_hat = G(Z, Y_hat), Y_hat = D(X_hat)
  nn::StackCache real_cache, gen_cache, fake_cache;
  const auto real_out = D.discriminate(real_images, Mode::train, &real_cache);
  const Tensor fake_images = G.generate(noise, y_hat, Mode::train, &gen_cache);
  const auto fake_out = D.discriminate(fake_images, Mode::train, &fake_cache);

  const auto ld = loss::loss_d(real_out.logits, real_classes, fake_out.logits);
  const auto ladv = loss::loss_adv(fake_out.logits, assigned);
  require_finite(ld.total, "L_D");
  require_finite(ladv.value, "L_adv");

  // L_adv flows through D into G; D's own gradient buffers are not touched.
  G.params().zero_grads();
  Tensor adv_grad = ladv.grad;
  adv_grad *= o.adversarial_weight;
  const Tensor grad_fake_images =
      D.backward(adv_grad, fake_cache, {.param_grads = false, .input_grad = true});
  G.backward(grad_fake_images, gen_cache, {.param_grads = true, .input_grad = false});

  // D update on L_D; generated images are constants here.
  D.params().zero_grads();
  D.backward(ld.grad_real, real_cache, {.param_grads = true, .input_grad = false});
  D.backward(ld.grad_fake, fake_cache, {.param_grads = true, .input_grad = false});
  s.opt_d.step(D.params(), o.lr_d);

  // Reconstruction through the updated Enc; only Dec receives gradient.
  nn::StackCache dec_cache;
  const Tensor recon = model::reconstruct(G, D, real_images, Mode::train, &dec_cache);
  auto l2 = loss::loss_l2(recon, real_images);
  require_finite(l2.value, "L_L2");
  l2.grad *= o.lambda_rec;
  G.backward_decode(l2.grad, dec_cache, {.param_grads = true, .input_grad = false});
  s.opt_g.step(G.params(), o.lr_g);

  StepMetrics m;
  m.epoch = s.epoch;
  m.step = s.step;
  m.loss_d = ld.total;
  m.loss_adv = ladv.value;
  m.loss_l2 = l2.value;
  m.loss_g = loss::loss_g(ladv.value, l2.value, o.lambda_rec);
  m.real_accuracy = real_accuracy(real_out.logits, real_classes);
  m.fake_detection = fake_detection(fake_out.logits);
  ++s.step;
  return m;
}

}  // namespace

StepMetrics train_step(TrainState& state, const Tensor& real_images,
                       std::span<const std::size_t> real_classes,
                       const StepOptions& options) {
  auto model_backup = state.model;
  auto opt_d_backup = state.opt_d;
  auto opt_g_backup = state.opt_g;
  const auto step_backup = state.step;
  try {
    return run_step(state, real_images, real_classes, options);
  } catch (const NumericError&) {
    state.model = std::move(model_backup);
    state.opt_d = std::move(opt_d_backup);
    state.opt_g = std::move(opt_g_backup);
    state.step = step_backup;
    throw;
  }
}

data::LabeledImageSet load_dataset(const TrainConfig& config) {
  switch (config.dataset.kind) {
    case DatasetKind::synth:
      return data::synth_shapes(config.dataset.synth_classes,
                                config.dataset.synth_per_class,
                                config.model.image_size, config.seed);
    case DatasetKind::cifar10:
      return data::load_cifar10(config.dataset.path, data::CifarSplit::train);
    case DatasetKind::image_dir:
      return data::load_image_dir(config.dataset.path, config.model.image_size);
  }
  throw ConfigError("unknown dataset kind");
}

data::Split load_split(const TrainConfig& config) {
  if (config.dataset.kind == DatasetKind::cifar10) {
    return {data::load_cifar10(config.dataset.path, data::CifarSplit::train),
            data::load_cifar10(config.dataset.path, data::CifarSplit::test),
            {}, {}};
  }
  return data::split_train_test(load_dataset(config), config.test_fraction,
                                config.seed);
}

namespace {

void ensure_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "checkpoints", ec);
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (ec || !out) {
      throw IoError("output directory " + dir.string() + " is not writable");
    }
  }
  std::filesystem::remove(probe, ec);
}

std::string epoch_name(std::uint64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04llu.ckpt",
                static_cast<unsigned long long>(epoch));
  return buf;
}

}  // namespace

TrainResult train(const TrainConfig& config, const data::LabeledImageSet& train_set,
                  const std::optional<std::filesystem::path>& resume) {
  config.validate();
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  model::ModelConfig mcfg = config.model;
  mcfg.num_classes = train_set.num_classes();
  mcfg.image_size = train_set.image_size();
  mcfg.validate();
  const std::size_t steps_per_epoch = train_set.size() / config.batch_size;
  if (steps_per_epoch == 0) {
    throw ConfigError("training set of " + std::to_string(train_set.size()) +
                      " images is smaller than one batch of " +
                      std::to_string(config.batch_size));
  }
  ensure_writable(config.output_dir);

  const optim::RmsPropConfig rms{config.rms_decay, config.rms_epsilon};
  TrainResult result{resume ? load_checkpoint(*resume, mcfg)
                            : TrainState::initialize(mcfg, rms, config.seed),
                     {}, 0, {}, config.output_dir / "metrics.tsv"};
  TrainState& state = result.state;

  {
    std::ofstream cfg_out(config.output_dir / "config.txt", std::ios::trunc);
    cfg_out << config.to_text();
  }
  std::ofstream log(result.metrics_log,
                    resume ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot open " + result.metrics_log.string());
  if (!resume) log << metrics_header() << '\n';

  const optim::LrSchedule schedule{config.base_lr, config.lr_drop_epoch,
                                   config.lr_drop_factor};
  std::vector<std::size_t> order(train_set.size());
  std::vector<std::size_t> batch_idx(config.batch_size);
  std::vector<std::size_t> batch_labels(config.batch_size);

  for (std::uint64_t epoch = state.epoch; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, state.rng);
    const double lr = schedule.at(epoch);
    const StepOptions opts{lr, lr, config.lambda_rec, 1.0};
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        batch_idx[i] = order[b * config.batch_size + i];
        batch_labels[i] = train_set.label(batch_idx[i]);
      }
      const Tensor images = train_set.batch(batch_idx);
      const auto t0 = std::chrono::steady_clock::now();
      StepMetrics m;
      try {
        m = train_step(state, images, batch_labels, opts);
      } catch (const NumericError& e) {
        ++result.aborted_steps;
        std::cerr << "warning: epoch " << epoch << " batch " << b
                  << ": step aborted and rolled back (" << e.what() << ")\n";
        continue;
      }
      if (config.record_wall_time) {
        m.wall_time = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      }
      result.metrics.push_back(m);
      if (m.step % config.log_every == 0) log << format_metrics(m) << '\n';
    }
    log.flush();
    state.epoch = epoch + 1;
    if (state.epoch % config.checkpoint_every == 0) {
      save_checkpoint(state, config.output_dir / "checkpoints" / epoch_name(state.epoch));
    }
  }
  result.final_checkpoint = config.output_dir / "final.ckpt";
  save_checkpoint(state, result.final_checkpoint);
  return result;
}

std::string metrics_header() {
  return "#epoch\tstep\tL_D\tL_adv\tL_L2\tL_G\treal_acc\tfake_detect\twall_time";
}

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

template <typename T>
T parse_field(std::string_view field, std::size_t column) {
  T v{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw IoError("metrics log: bad value '" + std::string(field) +
                  "' in column " + std::to_string(column + 1));
  }
  return v;
}

}  // namespace

std::string format_metrics(const StepMetrics& m) {
  std::string out = std::to_string(m.epoch) + '\t' + std::to_string(m.step);
  for (double v : {m.loss_d, m.loss_adv, m.loss_l2, m.loss_g, m.real_accuracy,
                   m.fake_detection, m.wall_time}) {
    out.push_back('\t');
    append_double(out, v);
  }
  return out;
}

StepMetrics parse_metrics(std::string_view line) {
  std::vector<std::string_view> fields;
  while (true) {
    const auto tab = line.find('\t');
    fields.push_back(line.substr(0, tab));
    if (tab == std::string_view::npos) break;
    line = line.substr(tab + 1);
  }
  if (fields.size() != 9) {
    throw IoError("metrics log: expected 9 fields, got " +
                  std::to_string(fields.size()));
  }
  StepMetrics m;
  m.epoch = parse_field<std::uint64_t>(fields[0], 0);
  m.step = parse_field<std::uint64_t>(fields[1], 1);
  double* dst[] = {&m.loss_d, &m.loss_adv, &m.loss_l2, &m.loss_g,
                   &m.real_accuracy, &m.fake_detection, &m.wall_time};
  for (std::size_t i = 0; i < 7; ++i) *dst[i] = parse_field<double>(fields[i + 2], i + 2);
  return m;
}

std::vector<StepMetrics> read_metrics_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<StepMetrics> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    out.push_back(parse_metrics(line));
  }
  return out;
}

}  // namespace artgan::train
