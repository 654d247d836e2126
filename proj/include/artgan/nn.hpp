#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "artgan/kernels.hpp"
#include "artgan/param_store.hpp"
#include "artgan/rng.hpp"
#include "artgan/tensor.hpp"

namespace artgan::nn {

using kernels::Activation;
using kernels::ActivationKind;
using kernels::Mode;

enum class LayerKind { conv, deconv, fc };

// One row of an architecture table: linear op, optional batchnorm,
// activation. For fc layers `in_channels` is the flattened input size.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::conv;
  std::size_t in_channels = 0;
  std::size_t filters = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;
  bool batchnorm = false;
  Activation activation;
};

struct LayerCache {
  Tensor input;
  kernels::BatchNormCache bn;
  Tensor pre_activation;
  Tensor output;
};

struct BackwardOptions {
  bool param_grads = true;  // accumulate into the store's gradient buffers
  bool input_grad = true;   // compute and return dL/dinput
};

class Layer {
 public:
  // Registers parameters as "<name>.weight", "<name>.bias" (only without
  // batchnorm), "<name>.gamma", "<name>.beta" and the running-statistics
  // buffers. Weights ~ N(0, init_std^2), gamma ~ N(1, init_std^2), biases
  // and beta start at zero.
  Layer(LayerSpec spec, ParamStore& store, const std::string& group, Rng& rng,
        double init_std = 0.02);

  const LayerSpec& spec() const noexcept { return spec_; }
  const std::string& name() const noexcept { return spec_.name; }
  std::size_t weight_index() const noexcept { return weight_; }
  std::optional<std::size_t> bias_index() const noexcept { return bias_; }

  // Indices of every store entry owned by this layer.
  std::vector<std::size_t> entry_indices() const;

  Tensor forward(ParamStore& store, const Tensor& input, Mode mode,
                 LayerCache* cache) const;
  // Returns dL/dinput (empty when options.input_grad is false). Parameter
  // gradients are added to the existing buffers, never overwritten.
  Tensor backward(ParamStore& store, const Tensor& grad_out,
                  const LayerCache& cache, BackwardOptions options = {}) const;

  // Output shape for a given input shape, without running the layer.
  Shape output_shape(const Shape& input) const;

 private:
  void check_input(const Shape& input) const;
  kernels::RunningStats running_stats(ParamStore& store) const;

  LayerSpec spec_;
  std::size_t weight_ = 0;
  std::optional<std::size_t> bias_;
  std::optional<std::size_t> gamma_, beta_, running_mean_, running_var_,
      bn_updates_;
};

using StackCache = std::vector<LayerCache>;

Tensor forward_stack(std::span<const Layer> layers, ParamStore& store,
                     const Tensor& input, Mode mode, StackCache* cache);
Tensor backward_stack(std::span<const Layer> layers, ParamStore& store,
                      const Tensor& grad_out, const StackCache& cache,
                      BackwardOptions options = {});

}  // namespace artgan::nn
