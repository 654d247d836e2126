#include "artgan/nn.hpp"

#include "artgan/error.hpp"

namespace artgan::nn {
namespace {

Tensor normal_tensor(Rng& rng, Shape shape, double mean, double std) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = mean + std * rng.normal();
  return t;
}

kernels::ConvGeometry geometry(const LayerSpec& s) { return {s.stride, s.pad}; }

}  // namespace

Layer::Layer(LayerSpec spec, ParamStore& store, const std::string& group,
             Rng& rng, double init_std)
    : spec_(std::move(spec)) {
  if (spec_.in_channels == 0 || spec_.filters == 0 || spec_.kernel == 0) {
    throw ConfigError("layer " + spec_.name + " has a zero-sized dimension");
  }
  Shape weight_shape;
  switch (spec_.kind) {
    case LayerKind::conv:
      weight_shape = {spec_.filters, spec_.in_channels, spec_.kernel, spec_.kernel};
      break;
    case LayerKind::deconv:
      weight_shape = {spec_.in_channels, spec_.filters, spec_.kernel, spec_.kernel};
      break;
    case LayerKind::fc:
      weight_shape = {spec_.filters, spec_.in_channels};
      break;
  }
  const std::string& n = spec_.name;
  weight_ = store.add(n + ".weight", group, EntryKind::parameter,
                      normal_tensor(rng, weight_shape, 0.0, init_std));
  if (spec_.batchnorm) {
    gamma_ = store.add(n + ".gamma", group, EntryKind::parameter,
                       normal_tensor(rng, {spec_.filters}, 1.0, init_std));
    beta_ = store.add(n + ".beta", group, EntryKind::parameter,
                      Tensor({spec_.filters}));
    running_mean_ = store.add(n + ".running_mean", group, EntryKind::buffer,
                              Tensor({spec_.filters}, 0.0));
    running_var_ = store.add(n + ".running_var", group, EntryKind::buffer,
                             Tensor({spec_.filters}, 1.0));
    bn_updates_ = store.add(n + ".bn_updates", group, EntryKind::buffer,
                            Tensor({1}, 0.0));
  } else {
    bias_ = store.add(n + ".bias", group, EntryKind::parameter,
                      Tensor({spec_.filters}));
  }
}

std::vector<std::size_t> Layer::entry_indices() const {
  std::vector<std::size_t> out{weight_};
  for (const auto& i : {bias_, gamma_, beta_, running_mean_, running_var_,
                        bn_updates_}) {
    if (i) out.push_back(*i);
  }
  return out;
}

void Layer::check_input(const Shape& input) const {
  if (spec_.kind == LayerKind::fc) {
    if (input.size() < 2 || shape_size(input) / input[0] != spec_.in_channels) {
      throw ShapeError("layer " + spec_.name + ": expected " +
                       std::to_string(spec_.in_channels) +
                       " features per sample, got input " +
                       shape_to_string(input));
    }
    return;
  }
  if (input.size() != 4 || input[1] != spec_.in_channels) {
    throw ShapeError("layer " + spec_.name + ": expected [N, " +
                     std::to_string(spec_.in_channels) +
                     ", H, W] input, got " + shape_to_string(input));
  }
}

Shape Layer::output_shape(const Shape& input) const {
  check_input(input);
  switch (spec_.kind) {
    case LayerKind::conv:
      return {input[0], spec_.filters,
              kernels::conv_output_extent(input[2], spec_.kernel, geometry(spec_)),
              kernels::conv_output_extent(input[3], spec_.kernel, geometry(spec_))};
    case LayerKind::deconv:
      return {input[0], spec_.filters,
              kernels::deconv_output_extent(input[2], spec_.kernel, geometry(spec_)),
              kernels::deconv_output_extent(input[3], spec_.kernel, geometry(spec_))};
    case LayerKind::fc:
      break;
  }
  return {input[0], spec_.filters};
}

kernels::RunningStats Layer::running_stats(ParamStore& store) const {
  return {store.value(*running_mean_).data(), store.value(*running_var_).data(),
          store.value(*bn_updates_).data()};
}

Tensor Layer::forward(ParamStore& store, const Tensor& input, Mode mode,
                      LayerCache* cache) const {
  check_input(input.shape());
  const Tensor no_bias;
  const Tensor& bias = bias_ ? store.value(*bias_) : no_bias;
  const Tensor& weight = store.value(weight_);
  Tensor y;
  try {
    switch (spec_.kind) {
      case LayerKind::conv:
        y = kernels::conv2d(input, weight, bias, geometry(spec_));
        break;
      case LayerKind::deconv:
        y = kernels::deconv2d(input, weight, bias, geometry(spec_));
        break;
      case LayerKind::fc:
        y = kernels::linear(input, weight, bias);
        break;
    }
    if (spec_.batchnorm) {
      y = kernels::batchnorm(y, store.value(*gamma_), store.value(*beta_), mode,
                             running_stats(store), cache ? &cache->bn : nullptr);
    }
  } catch (const ShapeError& e) {
    throw ShapeError("layer " + spec_.name + ": " + e.what());
  } catch (const StateError& e) {
    throw StateError("layer " + spec_.name + ": " + e.what());
  }
  Tensor out = kernels::activate(y, spec_.activation);
  if (cache) {
    cache->input = input;
    cache->pre_activation = std::move(y);
    cache->output = out;
  }
  return out;
}

Tensor Layer::backward(ParamStore& store, const Tensor& grad_out,
                       const LayerCache& cache, BackwardOptions options) const {
  if (grad_out.shape() != cache.output.shape()) {
    throw ShapeError("layer " + spec_.name + ": gradient " +
                     grad_out.shape_string() + " does not match cached output " +
                     cache.output.shape_string());
  }
  Tensor g = kernels::activation_backward(grad_out, cache.pre_activation,
                                          cache.output, spec_.activation);
  if (spec_.batchnorm) {
    auto bg = kernels::batchnorm_backward(g, store.value(*gamma_), cache.bn);
    if (options.param_grads) {
      store.grad(*gamma_) += bg.gamma;
      store.grad(*beta_) += bg.beta;
    }
    g = std::move(bg.input);
  }
  const Tensor& weight = store.value(weight_);
  const kernels::ConvGeometry geo = geometry(spec_);
  if (options.param_grads) {
    switch (spec_.kind) {
      case LayerKind::conv:
        store.grad(weight_) +=
            kernels::conv2d_backward_weight(cache.input, g, spec_.kernel, geo);
        break;
      case LayerKind::deconv:
        store.grad(weight_) +=
            kernels::deconv2d_backward_weight(cache.input, g, spec_.kernel, geo);
        break;
      case LayerKind::fc:
        store.grad(weight_) += kernels::linear_backward_weight(cache.input, g);
        break;
    }
    if (bias_) store.grad(*bias_) += kernels::channel_sum(g);
  }
  if (!options.input_grad) return Tensor();
  switch (spec_.kind) {
    case LayerKind::conv:
      return kernels::conv2d_backward_input(g, weight, cache.input.dim(2),
                                            cache.input.dim(3), geo);
    case LayerKind::deconv:
      return kernels::deconv2d_backward_input(g, weight, geo);
    case LayerKind::fc:
      break;
  }
  return kernels::linear_backward_input(g, weight, cache.input.shape());
}

Tensor forward_stack(std::span<const Layer> layers, ParamStore& store,
                     const Tensor& input, Mode mode, StackCache* cache) {
  if (cache) cache->assign(layers.size(), LayerCache{});
  Tensor x = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i].forward(store, x, mode, cache ? &(*cache)[i] : nullptr);
  }
  return x;
}

Tensor backward_stack(std::span<const Layer> layers, ParamStore& store,
                      const Tensor& grad_out, const StackCache& cache,
                      BackwardOptions options) {
  if (cache.size() != layers.size()) {
    throw ShapeError("backward_stack: cache holds " +
                     std::to_string(cache.size()) + " layers, stack has " +
                     std::to_string(layers.size()));
  }
  Tensor g = grad_out;
  for (std::size_t i = layers.size(); i-- > 0;) {
    BackwardOptions o = options;
    if (i > 0) o.input_grad = true;
    g = layers[i].backward(store, g, cache[i], o);
  }
  return g;
}

}  // namespace artgan::nn
