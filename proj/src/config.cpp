#include "artgan/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "artgan/error.hpp"

namespace artgan::train {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("invalid value '" + std::string(value) + "' for key '" +
                      std::string(key) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("invalid boolean '" + std::string(value) + "' for key '" +
                    std::string(key) + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::synth:
      return "synth";
    case DatasetKind::cifar10:
      return "cifar10";
    case DatasetKind::image_dir:
      return "image_dir";
  }
  return "synth";
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size < 2) {
    throw ConfigError("batch_size must be at least 2 (batchnorm needs it)");
  }
  if (!(base_lr >= 0.0)) throw ConfigError("base_lr must be non-negative");
  if (!(rms_decay >= 0.0 && rms_decay < 1.0)) {
    throw ConfigError("rms_decay must lie in [0, 1)");
  }
  if (!(rms_epsilon > 0.0)) throw ConfigError("rms_epsilon must be positive");
  if (!(lambda_rec >= 0.0)) throw ConfigError("lambda_rec must be non-negative");
  if (!(lr_drop_factor > 0.0)) throw ConfigError("lr_drop_factor must be positive");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie strictly between 0 and 1");
  }
  if (log_every == 0 || checkpoint_every == 0) {
    throw ConfigError("log_every and checkpoint_every must be positive");
  }
  if (dataset.kind != DatasetKind::synth && dataset.path.empty()) {
    throw ConfigError("dataset_path is required for dataset " +
                      std::string(dataset_kind_name(dataset.kind)));
  }
  if (model.noise_dim == 0) throw ConfigError("noise_dim must be positive");
  if (model.width.num == 0 || model.width.den == 0) {
    throw ConfigError("width_mult must be positive");
  }
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "epochs") {
    epochs = parse_number<std::size_t>(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "noise_dim") {
    model.noise_dim = parse_number<std::size_t>(key, value);
  } else if (key == "width_mult") {
    model.width = model::WidthMultiplier::parse(value);
  } else if (key == "base_lr") {
    base_lr = parse_number<double>(key, value);
  } else if (key == "rms_decay") {
    rms_decay = parse_number<double>(key, value);
  } else if (key == "rms_epsilon") {
    rms_epsilon = parse_number<double>(key, value);
  } else if (key == "lambda_rec") {
    lambda_rec = parse_number<double>(key, value);
  } else if (key == "lr_drop_epoch") {
    lr_drop_epoch = parse_number<std::size_t>(key, value);
  } else if (key == "lr_drop_factor") {
    lr_drop_factor = parse_number<double>(key, value);
  } else if (key == "dataset") {
    if (value == "synth") {
      dataset.kind = DatasetKind::synth;
    } else if (value == "cifar10") {
      dataset.kind = DatasetKind::cifar10;
    } else if (value == "image_dir") {
      dataset.kind = DatasetKind::image_dir;
    } else {
      throw ConfigError("unknown dataset '" + std::string(value) +
                        "' (expected synth, cifar10 or image_dir)");
    }
  } else if (key == "dataset_path") {
    dataset.path = std::string(value);
  } else if (key == "synth_classes") {
    dataset.synth_classes = parse_number<std::size_t>(key, value);
  } else if (key == "synth_per_class") {
    dataset.synth_per_class = parse_number<std::size_t>(key, value);
  } else if (key == "test_fraction") {
    test_fraction = parse_number<double>(key, value);
  } else if (key == "output_dir") {
    output_dir = std::string(value);
  } else if (key == "log_every") {
    log_every = parse_number<std::size_t>(key, value);
  } else if (key == "checkpoint_every") {
    checkpoint_every = parse_number<std::size_t>(key, value);
  } else if (key == "record_wall_time") {
    record_wall_time = parse_bool(key, value);
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "epochs = " << epochs << '\n'
     << "batch_size = " << batch_size << '\n'
     << "seed = " << seed << '\n'
     << "noise_dim = " << model.noise_dim << '\n'
     << "width_mult = " << model.width.to_string() << '\n'
     << "base_lr = " << format_double(base_lr) << '\n'
     << "rms_decay = " << format_double(rms_decay) << '\n'
     << "rms_epsilon = " << format_double(rms_epsilon) << '\n'
     << "lambda_rec = " << format_double(lambda_rec) << '\n'
     << "lr_drop_epoch = " << lr_drop_epoch << '\n'
     << "lr_drop_factor = " << format_double(lr_drop_factor) << '\n'
     << "dataset = " << dataset_kind_name(dataset.kind) << '\n';
  if (!dataset.path.empty()) os << "dataset_path = " << dataset.path << '\n';
  os << "synth_classes = " << dataset.synth_classes << '\n'
     << "synth_per_class = " << dataset.synth_per_class << '\n'
     << "test_fraction = " << format_double(test_fraction) << '\n'
     << "output_dir = " << output_dir.string() << '\n'
     << "log_every = " << log_every << '\n'
     << "checkpoint_every = " << checkpoint_every << '\n'
     << "record_wall_time = " << (record_wall_time ? "true" : "false") << '\n';
  return os.str();
}

TrainConfig TrainConfig::parse(std::string_view text) {
  TrainConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace artgan::train
