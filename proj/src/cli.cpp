#include "artgan/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "artgan/data.hpp"
#include "artgan/error.hpp"
#include "artgan/eval.hpp"
#include "artgan/grad_suite.hpp"
#include "artgan/image_io.hpp"
#include "artgan/train.hpp"

namespace artgan::cli {
namespace {

namespace fs = std::filesystem;
using train::TrainConfig;
using train::TrainState;

struct Options {
  fs::path config;
  fs::path checkpoint;
  fs::path output;
  fs::path resume;
  std::vector<std::string> overrides;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> width_mult, output_dir, dataset, dataset_path;

  std::size_t klass = 0;
  bool all_classes = false;
  std::size_t count = 16;
  std::uint64_t seed = 1;
  std::size_t cols = 8;
  std::vector<fs::path> inputs;
  std::size_t samples = 10000;
  std::size_t validation = 200;
  std::size_t test_points = 0;
  std::size_t samples_per_class = 200;
  std::size_t coords = 200;
  double tolerance = 1e-4;
};

// Looks next to the checkpoint (and one level up, for checkpoints/) for the
// config.txt written by train.
TrainConfig resolve_config(const Options& o) {
  if (!o.config.empty()) return TrainConfig::load(o.config);
  for (const fs::path& dir : {o.checkpoint.parent_path(),
                             o.checkpoint.parent_path().parent_path()}) {
    const fs::path candidate = dir / "config.txt";
    if (fs::exists(candidate)) return TrainConfig::load(candidate);
  }
  throw ConfigError("no config.txt found near " + o.checkpoint.string() +
                    "; pass --config");
}

void check_classes(const model::ModelConfig& m, const data::LabeledImageSet& set) {
  if (set.num_classes() != m.num_classes) {
    throw ConfigError("checkpoint has " + std::to_string(m.num_classes) +
                      " classes but the dataset has " +
                      std::to_string(set.num_classes()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

// Interleaves a[i], b[i] so a 2k-column grid shows k pairs per row.
Tensor interleave(const Tensor& a, const Tensor& b) {
  std::vector<Tensor> parts;
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    parts.push_back(a.slice_batch(i, i + 1));
    parts.push_back(b.slice_batch(i, i + 1));
  }
  return concat_batch(parts);
}

int cmd_train(const Options& o, std::ostream& out) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : TrainConfig::load(o.config);
  if (o.epochs) cfg.set("epochs", std::to_string(*o.epochs));
  if (o.batch_size) cfg.set("batch_size", std::to_string(*o.batch_size));
  if (o.seed_override) cfg.set("seed", std::to_string(*o.seed_override));
  if (o.width_mult) cfg.set("width_mult", *o.width_mult);
  if (o.output_dir) cfg.set("output_dir", *o.output_dir);
  if (o.dataset) cfg.set("dataset", *o.dataset);
  if (o.dataset_path) cfg.set("dataset_path", *o.dataset_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  const data::Split split = train::load_split(cfg);
  out << "dataset " << split.train.provenance() << ": " << split.train.size()
      << " train / " << split.test.size() << " test images, "
      << split.train.num_classes() << " classes\n";
  const auto result = train::train(
      cfg, split.train, o.resume.empty() ? std::nullopt : std::optional(o.resume));
  out << "trained to epoch " << result.state.epoch << " (step "
      << result.state.step << ")";
  if (!result.metrics.empty()) {
    out << ", final L_D " << result.metrics.back().loss_d << ", L_G "
        << result.metrics.back().loss_g;
  }
  out << "\naborted steps: " << result.aborted_steps << "\ncheckpoint: "
      << result.final_checkpoint.string() << "\nmetrics: "
      << result.metrics_log.string() << '\n';
  return kSuccess;
}

int cmd_generate(const Options& o, std::ostream& out) {
  TrainState state = train::load_checkpoint(o.checkpoint);
  const std::size_t K = state.model.config.num_classes;
  std::vector<std::size_t> classes;
  if (!o.all_classes) {
    if (o.klass < 1 || o.klass > K) {
      throw ConfigError("--class must lie in 1.." + std::to_string(K));
    }
    classes.push_back(o.klass);
  }
  Rng rng(o.seed);
  const Tensor images =
      eval::generate_samples(state.model.generator, o.count, rng, classes);
  eval::write_grid(images, o.all_classes ? K : o.cols, o.output);
  out << "wrote " << o.count << " samples to " << o.output.string() << '\n';
  return kSuccess;
}

int cmd_reconstruct(const Options& o, std::ostream& out) {
  TrainState state = train::load_checkpoint(o.checkpoint);
  const std::size_t s = state.model.config.image_size;
  Tensor images({o.inputs.size(), 3, s, s});
  for (std::size_t i = 0; i < o.inputs.size(); ++i) {
    const auto bytes = data::crop_resize(data::read_ppm(o.inputs[i]), s);
    std::transform(bytes.begin(), bytes.end(), images.raw() + i * bytes.size(),
                   [](std::uint8_t b) { return b / 255.0; });
  }
  const Tensor recon = model::reconstruct(state.model.generator,
                                          state.model.discriminator, images,
                                          nn::Mode::eval, nullptr);
  eval::write_grid(interleave(images, recon), 2, o.output);
  const auto l2 = loss::loss_l2(recon, images);
  out << "mean squared reconstruction error per image: " << l2.value << '\n'
      << "wrote " << o.output.string() << '\n';
  return kSuccess;
}

void emit_report(const Options& o, const std::vector<eval::ReportRow>& rows,
                 std::ostream& out) {
  const std::string text = eval::format_report(rows);
  out << text;
  if (!o.output.empty()) write_text(o.output, text);
}

int cmd_eval_parzen(const Options& o, std::ostream& out) {
  TrainState state = train::load_checkpoint(o.checkpoint);
  const TrainConfig cfg = resolve_config(o);
  const data::Split split = train::load_split(cfg);
  check_classes(state.model.config, split.train);

  Rng rng(o.seed);
  const Tensor samples = eval::generate_samples(state.model.generator, o.samples, rng);
  std::vector<std::size_t> val_idx(split.train.size());
  std::iota(val_idx.begin(), val_idx.end(), std::size_t{0});
  shuffle(val_idx, rng);
  val_idx.resize(std::min(o.validation, val_idx.size()));
  const Tensor validation = split.train.batch(val_idx);
  const auto grid = eval::default_sigma_grid();
  const double sigma = eval::select_sigma(samples, validation, grid);

  std::vector<std::size_t> test_idx(split.test.size());
  std::iota(test_idx.begin(), test_idx.end(), std::size_t{0});
  if (o.test_points > 0 && o.test_points < test_idx.size()) {
    shuffle(test_idx, rng);
    test_idx.resize(o.test_points);
  }
  const auto result = eval::parzen_ll({samples, sigma}, split.test.batch(test_idx));
  emit_report(o,
              {{"parzen_log_likelihood", result.mean, result.std_error},
               {"parzen_sigma", sigma, 0.0},
               {"parzen_kernel_samples", static_cast<double>(o.samples), 0.0},
               {"parzen_test_points", static_cast<double>(test_idx.size()), 0.0}},
              out);
  return kSuccess;
}

int cmd_nearest(const Options& o, std::ostream& out) {
  TrainState state = train::load_checkpoint(o.checkpoint);
  const TrainConfig cfg = resolve_config(o);
  const data::Split split = train::load_split(cfg);
  check_classes(state.model.config, split.train);
  Rng rng(o.seed);
  const Tensor queries = eval::generate_samples(state.model.generator, o.count, rng);
  const Tensor corpus = split.train.all();
  const auto matches = eval::nearest_neighbour(queries, corpus);
  std::vector<std::size_t> idx;
  for (std::size_t q = 0; q < matches.size(); ++q) {
    idx.push_back(matches[q].index);
    out << "query " << q << "\tindex " << matches[q].index << "\tclass "
        << split.train.label(matches[q].index) << "\tdistance "
        << matches[q].distance << '\n';
  }
  eval::write_grid(interleave(queries, split.train.batch(idx)), 2, o.output);
  out << "wrote " << o.output.string() << '\n';
  return kSuccess;
}

int cmd_fidelity(const Options& o, std::ostream& out) {
  TrainState state = train::load_checkpoint(o.checkpoint);
  const TrainConfig cfg = resolve_config(o);
  const data::Split split = train::load_split(cfg);
  check_classes(state.model.config, split.train);
  eval::LinearProbe probe;
  probe.fit(split.train);
  Rng rng(o.seed);
  const auto report =
      eval::class_fidelity(state.model.generator, probe, o.samples_per_class, rng);
  std::vector<eval::ReportRow> rows{{"class_fidelity", report.fidelity, 0.0}};
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    rows.push_back({"class_fidelity_" + std::to_string(k + 1), report.per_class[k], 0.0});
  }
  rows.push_back({"probe_test_accuracy", probe.accuracy(split.test), 0.0});
  emit_report(o, rows, out);
  return kSuccess;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  verify::GradSuiteOptions opts;
  opts.seed = o.seed;
  opts.check.max_coords = o.coords;
  opts.check.tolerance = o.tolerance;
  const auto suite = verify::run_grad_suite(opts);
  char line[256];
  for (const auto& c : suite.cases) {
    std::snprintf(line, sizeof line,
                  "%-32s max_rel_error %.3e over %zu coordinates (%zu at kinks) %s\n",
                  c.name.c_str(), c.report.max_rel_error, c.report.coordinates,
                  c.report.skipped, c.report.passed ? "ok" : "FAILED");
    out << line;
    if (!c.report.passed) {
      out << "  worst " << c.report.worst_target << '[' << c.report.worst_index
          << "]: analytic " << c.report.worst_analytic << ", numeric "
          << c.report.worst_numeric << '\n';
    }
  }
  return suite.passed ? kSuccess : kVerification;
}

int cmd_info(const Options& o, std::ostream& out) {
  const TrainState state = train::load_checkpoint(o.checkpoint);
  const auto& m = state.model.config;
  out << "noise_dim\t" << m.noise_dim << "\nnum_classes\t" << m.num_classes
      << "\nwidth_mult\t" << m.width.to_string() << "\nimage_size\t"
      << m.image_size << "\nepoch\t" << state.epoch << "\nstep\t" << state.step
      << "\ngenerator_parameters\t" << state.model.generator.params().parameter_count()
      << "\ndiscriminator_parameters\t"
      << state.model.discriminator.params().parameter_count()
      << "\noptimizer_steps_d\t" << state.opt_d.steps()
      << "\noptimizer_steps_g\t" << state.opt_g.steps() << '\n';
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label-conditioned GAN: training, sampling and evaluation"};
  app.name("artgan");
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train from a config file");
  train->add_option("--config", o.config, "key = value config file")
      ->check(CLI::ExistingFile);
  train->add_option("--set", o.overrides, "Override a config key (key=value), repeatable");
  train->add_option("--epochs", o.epochs, "Override epochs");
  train->add_option("--batch-size", o.batch_size, "Override batch_size");
  train->add_option("--seed", o.seed_override, "Override seed");
  train->add_option("--width-mult", o.width_mult, "Override width_mult (n or n/m)");
  train->add_option("--output-dir", o.output_dir, "Override output_dir");
  train->add_option("--dataset", o.dataset, "Override dataset (synth, cifar10, image_dir)");
  train->add_option("--dataset-path", o.dataset_path, "Override dataset_path");
  train->add_option("--resume", o.resume, "Continue from this checkpoint")
      ->check(CLI::ExistingFile);

  auto add_checkpoint = [&](CLI::App* sub) {
    sub->add_option("--checkpoint", o.checkpoint, "Checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
  };
  auto add_eval_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config,
                    "Training config (default: config.txt beside the checkpoint)")
        ->check(CLI::ExistingFile);
  };

  auto* generate = app.add_subcommand("generate", "Sample images for assigned classes");
  add_checkpoint(generate);
  auto* klass = generate->add_option("--class", o.klass, "Assigned class in 1..K")
                    ->check(CLI::PositiveNumber);
  auto* all = generate->add_flag("--all-classes", o.all_classes,
                                 "Cycle through all classes, one grid column each");
  klass->excludes(all);
  generate->add_option("--count", o.count, "Number of images")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  generate->add_option("--seed", o.seed, "Noise seed")->capture_default_str();
  generate->add_option("--cols", o.cols, "Grid columns")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  generate->add_option("--output", o.output, "Output PPM grid")->required();

  auto* reconstruct =
      app.add_subcommand("reconstruct", "Run Dec(Enc(x)) on PPM images");
  add_checkpoint(reconstruct);
  reconstruct->add_option("--input", o.inputs, "Input PPM images")
      ->required()
      ->check(CLI::ExistingFile);
  reconstruct->add_option("--output", o.output,
                          "Output PPM grid (input | reconstruction per row)")
      ->required();

  auto* parzen = app.add_subcommand("eval-parzen",
                                    "Parzen-window log-likelihood of test images");
  add_checkpoint(parzen);
  add_eval_config(parzen);
  parzen->add_option("--samples", o.samples, "Generated kernel centers")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  parzen->add_option("--validation", o.validation,
                     "Training images used to select sigma")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  parzen->add_option("--test-points", o.test_points,
                     "Evaluate on this many test images (0 = all)")
      ->capture_default_str();
  parzen->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
  parzen->add_option("--output", o.output, "Also write the report here");

  auto* nearest = app.add_subcommand(
      "nearest", "Pair generated images with their nearest training images");
  add_checkpoint(nearest);
  add_eval_config(nearest);
  nearest->add_option("--count", o.count, "Generated queries")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  nearest->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
  nearest->add_option("--output", o.output, "Output PPM grid (query | match per row)")
      ->required();

  auto* fidelity = app.add_subcommand(
      "fidelity", "Agreement of a pixel-space probe with the assigned classes");
  add_checkpoint(fidelity);
  add_eval_config(fidelity);
  fidelity->add_option("--samples-per-class", o.samples_per_class, "Images per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fidelity->add_option("--seed", o.seed, "Sampling seed")->capture_default_str();
  fidelity->add_option("--output", o.output, "Also write the report here");

  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference check of all training gradients (width 1/32)");
  gradcheck->add_option("--seed", o.seed, "Model and data seed")->capture_default_str();
  gradcheck->add_option("--coords", o.coords, "Coordinates per tensor")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gradcheck->add_option("--tolerance", o.tolerance, "Max relative error")
      ->capture_default_str();

  auto* info = app.add_subcommand("info", "Print checkpoint metadata");
  add_checkpoint(info);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help(e.get_name() == "--help" ? "" : "", CLI::AppFormatMode::Normal);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help()
                                            : app.get_subcommands().front()->help());
      return kSuccess;
    }
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*train) return cmd_train(o, out);
    if (*generate) {
      if (!o.all_classes && klass->count() == 0) {
        throw ConfigError("generate needs --class or --all-classes");
      }
      return cmd_generate(o, out);
    }
    if (*reconstruct) return cmd_reconstruct(o, out);
    if (*parzen) return cmd_eval_parzen(o, out);
    if (*nearest) return cmd_nearest(o, out);
    if (*fidelity) return cmd_fidelity(o, out);
    if (*gradcheck) return cmd_gradcheck(o, out);
    if (*info) return cmd_info(o, out);
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace artgan::cli
