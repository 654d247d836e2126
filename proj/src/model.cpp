#include "artgan/model.hpp"

#include <charconv>

#include "artgan/error.hpp"

namespace artgan::model {
namespace {

std::uint64_t parse_positive(std::string_view text, std::string_view whole) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v == 0) {
    throw ConfigError("invalid width multiplier '" + std::string(whole) +
                      "' (expected n or n/m with positive integers)");
  }
  return v;
}

nn::LayerSpec make_spec(const TableRow& row, std::size_t in_channels,
                        std::size_t filters) {
  nn::LayerSpec s;
  s.name = std::string(row.name);
  s.kind = row.kind;
  s.in_channels = in_channels;
  s.filters = filters;
  s.kernel = row.kernel;
  s.stride = row.stride;
  s.pad = row.pad;
  s.batchnorm = row.batchnorm;
  s.activation = {row.activation, kLeakySlope};
  return s;
}

}  // namespace

std::size_t WidthMultiplier::scale(std::size_t channels) const {
  if (num == 0 || den == 0) {
    throw ConfigError("width multiplier " + to_string() + " must be positive");
  }
  return static_cast<std::size_t>((channels * num + den - 1) / den);
}

std::string WidthMultiplier::to_string() const {
  return den == 1 ? std::to_string(num)
                  : std::to_string(num) + "/" + std::to_string(den);
}

WidthMultiplier WidthMultiplier::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return {parse_positive(text, text), 1};
  return {parse_positive(text.substr(0, slash), text),
          parse_positive(text.substr(slash + 1), text)};
}

void ModelConfig::validate() const {
  if (num_classes < 2) {
    throw ConfigError("number of classes K must be at least 2, got " +
                      std::to_string(num_classes));
  }
  if (noise_dim == 0) throw ConfigError("noise dimension must be positive");
  if (image_size != 64) {
    throw ConfigError("image size is fixed at 64 by the architecture, got " +
                      std::to_string(image_size));
  }
  if (width.num == 0 || width.den == 0) {
    throw ConfigError("width multiplier " + width.to_string() +
                      " produces zero channels");
  }
}

Generator::Generator(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  std::size_t in = config_.noise_dim + config_.num_classes;
  for (std::size_t i = 0; i < kGeneratorTable.size(); ++i) {
    const auto& row = kGeneratorTable[i];
    const bool rgb = i + 1 == kGeneratorTable.size();
    const std::size_t filters = rgb ? row.filters : config_.width.scale(row.filters);
    layers_.emplace_back(make_spec(row, in, filters), params_,
                         i < kZNetLayers ? "zNet" : "Dec", rng);
    in = filters;
  }
}

Tensor Generator::generate(const Tensor& noise, const loss::LabelBatch& labels,
                           Mode mode, nn::StackCache* cache) {
  if (noise.rank() != 2 || noise.dim(1) != config_.noise_dim) {
    throw ShapeError("generate: noise must be [N, " +
                     std::to_string(config_.noise_dim) + "], got " +
                     noise.shape_string());
  }
  const std::size_t n = noise.dim(0), d = config_.noise_dim,
                    K = config_.num_classes;
  if (labels.size() != n || labels.num_classes() != K ||
      labels.targets().shape() != Shape{n, K}) {
    throw ShapeError("generate: labels must be " + std::to_string(n) + " x " +
                     std::to_string(K) + " one-hot rows");
  }
  Tensor input({n, d + K, 1, 1});
  for (std::size_t r = 0; r < n; ++r) {
    double* row = input.raw() + r * (d + K);
    std::copy_n(noise.raw() + r * d, d, row);
    std::copy_n(labels.targets().raw() + r * K, K, row + d);
  }
  return nn::forward_stack(layers_, params_, input, mode, cache);
}

Tensor Generator::generate(const Tensor& noise, const Tensor& one_hot, Mode mode,
                           nn::StackCache* cache) {
  return generate(noise, loss::LabelBatch::from_assigned_targets(one_hot), mode,
                  cache);
}

Tensor Generator::decode(const Tensor& latent, Mode mode, nn::StackCache* cache) {
  return nn::forward_stack(dec(), params_, latent, mode, cache);
}

Tensor Generator::backward(const Tensor& grad_images, const nn::StackCache& cache,
                           nn::BackwardOptions options) {
  return nn::backward_stack(layers_, params_, grad_images, cache, options);
}

Tensor Generator::backward_decode(const Tensor& grad_images,
                                  const nn::StackCache& cache,
                                  nn::BackwardOptions options) {
  return nn::backward_stack(dec(), params_, grad_images, cache, options);
}

Discriminator::Discriminator(const ModelConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  std::size_t in = 3;
  std::size_t spatial = config_.image_size;
  for (std::size_t i = 0; i < kDiscriminatorTable.size(); ++i) {
    const auto& row = kDiscriminatorTable[i];
    const std::string group = i < kEncLayers ? "Enc" : "clsNet";
    if (row.kind == nn::LayerKind::fc) {
      layers_.emplace_back(make_spec(row, in * spatial * spatial,
                                     config_.num_classes + 1),
                           params_, group, rng);
      break;
    }
    const std::size_t filters = config_.width.scale(row.filters);
    layers_.emplace_back(make_spec(row, in, filters), params_, group, rng);
    spatial = kernels::conv_output_extent(spatial, row.kernel,
                                          {row.stride, row.pad});
    in = filters;
  }
}

void Discriminator::check_images(const Tensor& images) const {
  const std::size_t s = config_.image_size;
  if (images.rank() != 4 || images.dim(1) != 3 || images.dim(2) != s ||
      images.dim(3) != s) {
    throw ShapeError("discriminator expects [N, 3, " + std::to_string(s) +
                     ", " + std::to_string(s) + "] images, got " +
                     images.shape_string());
  }
}

Discrimination Discriminator::discriminate(const Tensor& images, Mode mode,
                                           nn::StackCache* cache) {
  check_images(images);
  Discrimination out;
  out.logits = nn::forward_stack(layers_, params_, images, mode, cache);
  out.probs = kernels::activate(out.logits, {nn::ActivationKind::sigmoid});
  return out;
}

Tensor Discriminator::encode(const Tensor& images, Mode mode,
                             nn::StackCache* cache) {
  check_images(images);
  return nn::forward_stack(enc(), params_, images, mode, cache);
}

Tensor Discriminator::backward(const Tensor& grad_logits,
                               const nn::StackCache& cache,
                               nn::BackwardOptions options) {
  return nn::backward_stack(layers_, params_, grad_logits, cache, options);
}

ArtGan build(const ModelConfig& config, Rng& rng) {
  Generator g(config, rng);
  Discriminator d(config, rng);
  return ArtGan{config, std::move(g), std::move(d)};
}

Tensor reconstruct(Generator& generator, Discriminator& discriminator,
                   const Tensor& images, Mode mode, nn::StackCache* dec_cache) {
  const Tensor latent = discriminator.encode(images, mode, nullptr);
  return generator.decode(latent, mode, dec_cache);
}

}  // namespace artgan::model
