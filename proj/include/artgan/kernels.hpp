#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "artgan/tensor.hpp"

// Forward and backward numerical kernels over NCHW tensors.
//
// Convolution uses the cross-correlation convention (no kernel flip):
//
//   y[n,f,i,j] = b[f] + sum_{c,u,v} w[f,c,u,v] * x[n,c, i*s - p + u, j*s - p + v]
//
// with zero padding. Transposed convolution (deconv2d) is defined as the
// exact adjoint of conv2d with respect to its input, so its weight has
// layout [C_in, C_out, k, k], the same tensor a conv2d mapping
// C_out -> C_in would use.
namespace artgan::kernels {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               ConvGeometry g);
std::size_t deconv_output_extent(std::size_t in, std::size_t kernel,
                                 ConvGeometry g);

// bias may be empty (no bias term).
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              ConvGeometry g);
// Gradient of conv2d w.r.t. its input; out_h/out_w are the input extents.
Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                             std::size_t in_h, std::size_t in_w,
                             ConvGeometry g);
// Gradient of conv2d w.r.t. its weight, shape [F, C, k, k].
Tensor conv2d_backward_weight(const Tensor& input, const Tensor& grad_out,
                              std::size_t kernel, ConvGeometry g);

Tensor deconv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                ConvGeometry g);
Tensor deconv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                               ConvGeometry g);
// Gradient of deconv2d w.r.t. its weight, shape [C_in, C_out, k, k].
Tensor deconv2d_backward_weight(const Tensor& input, const Tensor& grad_out,
                                std::size_t kernel, ConvGeometry g);

// Sum of grad_out over (N, H, W) per channel; the bias gradient.
Tensor channel_sum(const Tensor& grad_out);

// Direct-loop implementations. Slow; used as oracles for the GEMM path.
namespace reference {
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              ConvGeometry g);
Tensor deconv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                ConvGeometry g);
Tensor conv2d_backward_weight(const Tensor& input, const Tensor& grad_out,
                              std::size_t kernel, ConvGeometry g);
}  // namespace reference

// Fully connected: input [N, in] (any trailing shape is flattened),
// weight [out, in], bias [out] or empty. Output [N, out].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor linear_backward_input(const Tensor& grad_out, const Tensor& weight,
                             const Shape& input_shape);
Tensor linear_backward_weight(const Tensor& input, const Tensor& grad_out);

// Batch normalization over (N, H, W) per channel. Inputs of rank 2 are
// treated as [N, C] with H = W = 1.
enum class Mode { train, eval };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

// Views into per-channel running statistics. `updates` has one element
// counting train-mode calls; zero means the statistics are uninitialized.
struct RunningStats {
  std::span<double> mean;
  std::span<double> var;
  std::span<double> updates;
};

struct BatchNormCache {
  Tensor normalized;             // x_hat
  std::vector<double> inv_std;   // 1 / sqrt(var + eps), per channel
  Mode mode = Mode::train;
};

// Train mode normalizes with the biased batch variance and folds the batch
// statistics into the running ones with an exponential moving average:
// running = momentum * running + (1 - momentum) * batch.
Tensor batchnorm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                 Mode mode, RunningStats stats, BatchNormCache* cache,
                 double eps = kBatchNormEpsilon,
                 double momentum = kBatchNormMomentum);

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

// Full derivative through the batch statistics in train mode; the affine
// derivative in eval mode.
BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& gamma,
                                  const BatchNormCache& cache);

enum class ActivationKind { identity, relu, leaky_relu, sigmoid };

struct Activation {
  ActivationKind kind = ActivationKind::identity;
  double alpha = 0.2;  // leaky-ReLU slope for negative inputs
};

// While alive, records on the current thread whether each ReLU / leaky-ReLU
// input was positive, in evaluation order. Two forward passes with equal
// patterns lie on the same linear piece of every kink.
class KinkMonitor {
 public:
  KinkMonitor();
  ~KinkMonitor();
  KinkMonitor(const KinkMonitor&) = delete;
  KinkMonitor& operator=(const KinkMonitor&) = delete;

  const std::vector<bool>& pattern() const noexcept { return pattern_; }
  static void record(std::span<const double> inputs);

 private:
  std::vector<bool> pattern_;
  KinkMonitor* previous_;
};

double sigmoid(double x) noexcept;
Tensor activate(const Tensor& input, Activation act);
// Uses the pre-activation input for the piecewise-linear kinds and the
// activated output for sigmoid.
Tensor activation_backward(const Tensor& grad_out, const Tensor& input,
                           const Tensor& output, Activation act);

}  // namespace artgan::kernels
