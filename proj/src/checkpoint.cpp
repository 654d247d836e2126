#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "artgan/error.hpp"
#include "artgan/train.hpp"

namespace artgan::train {
namespace {

constexpr std::string_view kMagic = "ARTGAN01";
constexpr std::string_view kFooter = "ARTGANEN";

class Writer {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void string(std::string_view s) {
    u64(s.size());
    bytes(s);
  }
  void tensor(const Tensor& t) {
    u64(t.rank());
    for (auto e : t.shape()) u64(e);
    for (double v : t.data()) f64(v);
  }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string origin)
      : data_(std::move(data)), origin_(std::move(origin)) {}

  std::string_view bytes(std::size_t n) {
    if (data_.size() - pos_ < n) {
      throw IoError(origin_ + ": checkpoint is truncated");
    }
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t u64() {
    const auto b = bytes(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[i]);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string string() {
    const auto n = u64();
    if (n > data_.size()) throw IoError(origin_ + ": checkpoint is truncated");
    return std::string(bytes(n));
  }
  Tensor tensor() {
    const auto rank = u64();
    if (rank > 8) throw IoError(origin_ + ": implausible tensor rank " + std::to_string(rank));
    if (rank == 0) return Tensor();
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& e : shape) {
      e = u64();
      if (e == 0 || e > data_.size()) {
        throw IoError(origin_ + ": corrupt tensor extent");
      }
      count *= e;
    }
    if (count > (data_.size() - pos_) / 8) {
      throw IoError(origin_ + ": checkpoint is truncated");
    }
    std::vector<double> values(count);
    for (auto& v : values) v = f64();
    return Tensor(std::move(shape), std::move(values));
  }
  bool at_end() const { return pos_ == data_.size(); }
  const std::string& origin() const { return origin_; }

 private:
  std::string data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

void write_store(Writer& w, const nn::ParamStore& store) {
  w.u64(store.size());
  for (const auto& e : store.entries()) {
    w.string(e.name);
    w.tensor(e.value);
  }
}

void write_optimizer(Writer& w, const optim::RmsProp& opt) {
  w.f64(opt.config().decay);
  w.f64(opt.config().epsilon);
  w.u64(opt.steps());
  w.u64(opt.accumulators().size());
  for (const auto& t : opt.accumulators()) w.tensor(t);
}

void read_store(Reader& r, nn::ParamStore& store, const char* which) {
  const auto count = r.u64();
  if (count != store.size()) {
    throw ShapeError(r.origin() + ": " + which + " has " + std::to_string(count) +
                     " tensors, the model expects " + std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    const std::string name = r.string();
    Tensor value = r.tensor();
    if (name != e.name) {
      throw ShapeError(r.origin() + ": tensor " + std::to_string(i) + " of " + which +
                       " is '" + name + "', the model expects '" + e.name + "'");
    }
    if (value.shape() != e.value.shape()) {
      throw ShapeError(r.origin() + ": tensor '" + name + "' has shape " +
                       value.shape_string() + " in the checkpoint, the model expects " +
                       e.value.shape_string());
    }
    e.value = std::move(value);
  }
  store.zero_grads();
}

void read_optimizer(Reader& r, optim::RmsProp& opt) {
  optim::RmsPropConfig cfg;
  cfg.decay = r.f64();
  cfg.epsilon = r.f64();
  const auto steps = r.u64();
  const auto count = r.u64();
  if (count != opt.accumulators().size()) {
    throw ShapeError(r.origin() + ": optimizer state has " + std::to_string(count) +
                     " accumulators, expected " +
                     std::to_string(opt.accumulators().size()));
  }
  std::vector<Tensor> acc;
  acc.reserve(count);
  for (std::size_t i = 0; i < count; ++i) acc.push_back(r.tensor());
  opt.restore(cfg, steps, std::move(acc));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

model::ModelConfig read_model_config(Reader& r) {
  if (r.bytes(kMagic.size()) != kMagic) {
    throw IoError(r.origin() + ": not an artgan checkpoint (bad magic or version)");
  }
  model::ModelConfig cfg;
  cfg.noise_dim = r.u64();
  cfg.num_classes = r.u64();
  cfg.width.num = r.u64();
  cfg.width.den = r.u64();
  cfg.image_size = r.u64();
  return cfg;
}

TrainState load_into(Reader& r, const model::ModelConfig& build_config) {
  // A throwaway seed: every tensor below is overwritten from the file.
  TrainState state = TrainState::initialize(build_config, {}, 0);
  read_store(r, state.model.discriminator.params(), "theta_D");
  read_store(r, state.model.generator.params(), "theta_G");
  read_optimizer(r, state.opt_d);
  read_optimizer(r, state.opt_g);
  state.rng = Rng::deserialize(r.string());
  state.epoch = r.u64();
  state.step = r.u64();
  if (r.bytes(kFooter.size()) != kFooter || !r.at_end()) {
    throw IoError(r.origin() + ": checkpoint has a corrupt trailer");
  }
  return state;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic);
  const auto& cfg = state.model.config;
  w.u64(cfg.noise_dim);
  w.u64(cfg.num_classes);
  w.u64(cfg.width.num);
  w.u64(cfg.width.den);
  w.u64(cfg.image_size);
  write_store(w, state.model.discriminator.params());
  write_store(w, state.model.generator.params());
  write_optimizer(w, state.opt_d);
  write_optimizer(w, state.opt_g);
  w.string(state.rng.serialize());
  w.u64(state.epoch);
  w.u64(state.step);
  w.bytes(kFooter);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string());
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  Reader r(read_file(path), path.string());
  const model::ModelConfig cfg = read_model_config(r);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": stored model configuration is invalid: " + e.what());
  }
  return load_into(r, cfg);
}

TrainState load_checkpoint(const std::filesystem::path& path,
                           const model::ModelConfig& expected) {
  Reader r(read_file(path), path.string());
  read_model_config(r);
  return load_into(r, expected);
}

}  // namespace artgan::train
