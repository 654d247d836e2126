#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "artgan/loss.hpp"
#include "artgan/nn.hpp"
#include "artgan/param_store.hpp"
#include "artgan/rng.hpp"

namespace artgan::model {

using nn::Mode;

// Rational channel multiplier; scaled counts are rounded up.
struct WidthMultiplier {
  std::uint64_t num = 1;
  std::uint64_t den = 1;

  std::size_t scale(std::size_t channels) const;
  std::string to_string() const;
  // Parses "n" or "n/m" with positive integers.
  static WidthMultiplier parse(std::string_view text);

  friend bool operator==(const WidthMultiplier&, const WidthMultiplier&) = default;
};

struct ModelConfig {
  std::size_t noise_dim = 100;   // d
  std::size_t num_classes = 10;  // K real classes; D emits K+1 outputs
  WidthMultiplier width;
  std::size_t image_size = 64;   // fixed by the layer tables

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One row of the layer tables at width 1.
struct TableRow {
  std::string_view name;
  nn::LayerKind kind;
  std::size_t filters;  // 0 for fc6: K+1 outputs
  std::size_t kernel, stride, pad;
  bool batchnorm;
  nn::ActivationKind activation;
};

inline constexpr double kLeakySlope = 0.2;

// Deconv1..Deconv6; the last layer emits RGB and is never width-scaled.
inline constexpr std::array<TableRow, 6> kGeneratorTable{{
    {"deconv1", nn::LayerKind::deconv, 1024, 4, 1, 0, true, nn::ActivationKind::relu},
    {"deconv2", nn::LayerKind::deconv, 512, 4, 2, 1, true, nn::ActivationKind::relu},
    {"deconv3", nn::LayerKind::deconv, 256, 4, 2, 1, true, nn::ActivationKind::relu},
    {"deconv4", nn::LayerKind::deconv, 128, 4, 2, 1, true, nn::ActivationKind::relu},
    {"deconv5", nn::LayerKind::deconv, 128, 3, 1, 1, true, nn::ActivationKind::relu},
    {"deconv6", nn::LayerKind::deconv, 3, 4, 2, 1, false, nn::ActivationKind::sigmoid},
}};

// Conv1..Conv5 and fc6. fc6 produces K+1 logits; sigmoid is applied by
// Discriminator::discriminate so the losses can work in logit space.
inline constexpr std::array<TableRow, 6> kDiscriminatorTable{{
    {"conv1", nn::LayerKind::conv, 128, 4, 2, 1, false, nn::ActivationKind::leaky_relu},
    {"conv2", nn::LayerKind::conv, 128, 3, 1, 1, true, nn::ActivationKind::leaky_relu},
    {"conv3", nn::LayerKind::conv, 256, 4, 2, 1, true, nn::ActivationKind::leaky_relu},
    {"conv4", nn::LayerKind::conv, 512, 4, 2, 1, true, nn::ActivationKind::leaky_relu},
    {"conv5", nn::LayerKind::conv, 1024, 4, 2, 1, true, nn::ActivationKind::leaky_relu},
    {"fc6", nn::LayerKind::fc, 0, 1, 1, 0, false, nn::ActivationKind::identity},
}};

inline constexpr std::size_t kZNetLayers = 2;  // deconv1-2
inline constexpr std::size_t kEncLayers = 4;   // conv1-4

class Generator {
 public:
  Generator(const ModelConfig& config, Rng& rng);

  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }
  std::span<const nn::Layer> layers() const noexcept { return layers_; }
  std::span<const nn::Layer> znet() const noexcept {
    return std::span(layers_).first(kZNetLayers);
  }
  std::span<const nn::Layer> dec() const noexcept {
    return std::span(layers_).subspan(kZNetLayers);
  }
  const ModelConfig& config() const noexcept { return config_; }

  // noise [N, d] and N x K one-hot labels -> images [N, 3, 64, 64] in (0, 1).
  Tensor generate(const Tensor& noise, const loss::LabelBatch& labels, Mode mode,
                  nn::StackCache* cache);
  // Same, validating a raw N x K label matrix.
  Tensor generate(const Tensor& noise, const Tensor& one_hot, Mode mode,
                  nn::StackCache* cache);
  // Runs Dec (deconv3-6) on a latent [N, 512w, 8, 8].
  Tensor decode(const Tensor& latent, Mode mode, nn::StackCache* cache);

  // Backward through zNet + Dec from d(loss)/d(image). Returns the gradient
  // w.r.t. the concatenated [N, d+K, 1, 1] input.
  Tensor backward(const Tensor& grad_images, const nn::StackCache& cache,
                  nn::BackwardOptions options = {});
  Tensor backward_decode(const Tensor& grad_images, const nn::StackCache& cache,
                         nn::BackwardOptions options = {});

 private:
  ModelConfig config_;
  nn::ParamStore params_;
  std::vector<nn::Layer> layers_;
};

struct Discrimination {
  Tensor probs;   // [N, K+1], independent sigmoids
  Tensor logits;  // [N, K+1]
};

class Discriminator {
 public:
  Discriminator(const ModelConfig& config, Rng& rng);

  nn::ParamStore& params() noexcept { return params_; }
  const nn::ParamStore& params() const noexcept { return params_; }
  std::span<const nn::Layer> layers() const noexcept { return layers_; }
  std::span<const nn::Layer> enc() const noexcept {
    return std::span(layers_).first(kEncLayers);
  }
  std::span<const nn::Layer> cls_net() const noexcept {
    return std::span(layers_).subspan(kEncLayers);
  }
  const ModelConfig& config() const noexcept { return config_; }

  Discrimination discriminate(const Tensor& images, Mode mode,
                              nn::StackCache* cache);
  // Conv1-4 only: [N, 3, 64, 64] -> [N, 512w, 8, 8].
  Tensor encode(const Tensor& images, Mode mode, nn::StackCache* cache);

  // Backward from d(loss)/d(logits); returns d(loss)/d(images).
  Tensor backward(const Tensor& grad_logits, const nn::StackCache& cache,
                  nn::BackwardOptions options = {});

 private:
  void check_images(const Tensor& images) const;

  ModelConfig config_;
  nn::ParamStore params_;
  std::vector<nn::Layer> layers_;
};

struct ArtGan {
  ModelConfig config;
  Generator generator;
  Discriminator discriminator;
};

// Builds G then D, drawing initial weights from `rng` in that order.
ArtGan build(const ModelConfig& config, Rng& rng);

// Dec(Enc(images)). Only the Dec part is cached: the reconstruction loss
// never sends gradient into Enc.
Tensor reconstruct(Generator& generator, Discriminator& discriminator,
                   const Tensor& images, Mode mode, nn::StackCache* dec_cache);

}  // namespace artgan::model
