#include "artgan/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "artgan/error.hpp"

namespace artgan::kernels {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

// Upper bound on the im2col buffer, in elements; the batch is processed in
// chunks below it. The chunking is a pure function of the shapes, so results
// do not depend on anything but the inputs.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

struct Dims4 {
  std::size_t n, c, h, w;
};

Dims4 dims4(const Tensor& t, const char* what) {
  if (t.rank() != 4) {
    throw ShapeError(std::string(what) + ": expected a rank-4 NCHW tensor, got " +
                     t.shape_string());
  }
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

struct Patch {
  std::size_t channels, kernel, in_h, in_w, out_h, out_w;
  ConvGeometry g;
  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t out_area() const { return out_h * out_w; }
};

std::size_t chunk_for(const Patch& p, std::size_t batch) {
  const std::size_t per_sample = std::max<std::size_t>(1, p.rows() * p.out_area());
  return std::clamp<std::size_t>(kColumnBudget / per_sample, 1, batch);
}

// cols[(c*k + u)*k + v, (n - n0)*out_area + i*out_w + j] =
//   x[n, c, i*s - p + u, j*s - p + v]   (zero outside the image)
void im2col(const double* x, const Patch& p, std::size_t n0, std::size_t n1,
            double* cols) {
  const std::size_t width = (n1 - n0) * p.out_area();
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(p.g.pad);
  for (std::size_t c = 0; c < p.channels; ++c) {
    for (std::size_t u = 0; u < p.kernel; ++u) {
      for (std::size_t v = 0; v < p.kernel; ++v) {
        double* row = cols + ((c * p.kernel + u) * p.kernel + v) * width;
        for (std::size_t n = n0; n < n1; ++n) {
          const double* plane = x + (n * p.channels + c) * p.in_h * p.in_w;
          double* dst = row + (n - n0) * p.out_area();
          for (std::size_t i = 0; i < p.out_h; ++i) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * p.g.stride + u) - pad;
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(p.in_h)) {
              std::fill(dst + i * p.out_w, dst + (i + 1) * p.out_w, 0.0);
              continue;
            }
            const double* src = plane + static_cast<std::size_t>(y) * p.in_w;
            for (std::size_t j = 0; j < p.out_w; ++j) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * p.g.stride + v) - pad;
              dst[i * p.out_w + j] =
                  (xx < 0 || xx >= static_cast<std::ptrdiff_t>(p.in_w))
                      ? 0.0
                      : src[static_cast<std::size_t>(xx)];
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into x.
void col2im(const double* cols, const Patch& p, std::size_t n0, std::size_t n1,
            double* x) {
  const std::size_t width = (n1 - n0) * p.out_area();
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(p.g.pad);
  for (std::size_t c = 0; c < p.channels; ++c) {
    for (std::size_t u = 0; u < p.kernel; ++u) {
      for (std::size_t v = 0; v < p.kernel; ++v) {
        const double* row = cols + ((c * p.kernel + u) * p.kernel + v) * width;
        for (std::size_t n = n0; n < n1; ++n) {
          double* plane = x + (n * p.channels + c) * p.in_h * p.in_w;
          const double* src = row + (n - n0) * p.out_area();
          for (std::size_t i = 0; i < p.out_h; ++i) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * p.g.stride + u) - pad;
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(p.in_h)) continue;
            double* dst = plane + static_cast<std::size_t>(y) * p.in_w;
            for (std::size_t j = 0; j < p.out_w; ++j) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * p.g.stride + v) - pad;
              if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(p.in_w)) continue;
              dst[static_cast<std::size_t>(xx)] += src[i * p.out_w + j];
            }
          }
        }
      }
    }
  }
}

// [N, C, area] slice -> [C, (n1 - n0) * area]
void to_channel_major(const double* t, std::size_t channels, std::size_t area,
                      std::size_t n0, std::size_t n1, double* out) {
  const std::size_t width = (n1 - n0) * area;
  for (std::size_t n = n0; n < n1; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(t + (n * channels + c) * area, area,
                  out + c * width + (n - n0) * area);
    }
  }
}

void from_channel_major(const double* cm, std::size_t channels,
                        std::size_t area, std::size_t n0, std::size_t n1,
                        double* t) {
  const std::size_t width = (n1 - n0) * area;
  for (std::size_t n = n0; n < n1; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(cm + c * width + (n - n0) * area, area,
                  t + (n * channels + c) * area);
    }
  }
}

void check_bias(const Tensor& bias, std::size_t channels, const char* what) {
  if (!bias.empty() && bias.size() != channels) {
    throw ShapeError(std::string(what) + ": bias has " +
                     std::to_string(bias.size()) + " elements, expected " +
                     std::to_string(channels));
  }
}

void add_bias(Tensor& out, const Tensor& bias) {
  if (bias.empty()) return;
  const std::size_t n = out.dim(0), c = out.dim(1);
  const std::size_t area = out.size() / (n * c);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double* p = out.raw() + (b * c + ch) * area;
      for (std::size_t i = 0; i < area; ++i) p[i] += bias[ch];
    }
  }
}

struct ConvWeight {
  std::size_t out_channels, in_channels, kernel;
};

ConvWeight conv_weight(const Tensor& weight, const char* what) {
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError(std::string(what) +
                     ": weight must be [F, C, k, k], got " +
                     weight.shape_string());
  }
  return {weight.dim(0), weight.dim(1), weight.dim(2)};
}

void check_geometry(std::size_t in, std::size_t kernel, ConvGeometry g) {
  if (g.stride == 0) throw ShapeError("convolution stride must be >= 1");
  if (kernel > in + 2 * g.pad) {
    throw ShapeError("kernel " + std::to_string(kernel) +
                     " larger than padded input " +
                     std::to_string(in + 2 * g.pad));
  }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               ConvGeometry g) {
  check_geometry(in, kernel, g);
  return (in + 2 * g.pad - kernel) / g.stride + 1;
}

std::size_t deconv_output_extent(std::size_t in, std::size_t kernel,
                                 ConvGeometry g) {
  if (g.stride == 0) throw ShapeError("convolution stride must be >= 1");
  if (in == 0 || (in - 1) * g.stride + kernel <= 2 * g.pad) {
    throw ShapeError("transposed convolution output would be empty");
  }
  return (in - 1) * g.stride + kernel - 2 * g.pad;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              ConvGeometry g) {
  const Dims4 x = dims4(input, "conv2d input");
  const ConvWeight w = conv_weight(weight, "conv2d");
  if (w.in_channels != x.c) {
    throw ShapeError("conv2d: input has " + std::to_string(x.c) +
                     " channels but weight " + weight.shape_string() +
                     " expects " + std::to_string(w.in_channels));
  }
  check_bias(bias, w.out_channels, "conv2d");
  const Patch p{x.c, w.kernel, x.h, x.w,
                conv_output_extent(x.h, w.kernel, g),
                conv_output_extent(x.w, w.kernel, g), g};
  Tensor out({x.n, w.out_channels, p.out_h, p.out_w});
  const ConstMatrixMap wm(weight.raw(), w.out_channels, p.rows());
  const std::size_t chunk = chunk_for(p, x.n);
  RowMatrix cols, result;
  for (std::size_t n0 = 0; n0 < x.n; n0 += chunk) {
    const std::size_t n1 = std::min(x.n, n0 + chunk);
    cols.resize(p.rows(), (n1 - n0) * p.out_area());
    im2col(input.raw(), p, n0, n1, cols.data());
    result.noalias() = wm * cols;
    from_channel_major(result.data(), w.out_channels, p.out_area(), n0, n1,
                       out.raw());
  }
  add_bias(out, bias);
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                             std::size_t in_h, std::size_t in_w,
                             ConvGeometry g) {
  const Dims4 gy = dims4(grad_out, "conv2d_backward_input grad");
  const ConvWeight w = conv_weight(weight, "conv2d_backward_input");
  if (w.out_channels != gy.c) {
    throw ShapeError("conv2d_backward_input: gradient has " +
                     std::to_string(gy.c) + " channels but weight " +
                     weight.shape_string() + " produces " +
                     std::to_string(w.out_channels));
  }
  const Patch p{w.in_channels, w.kernel, in_h, in_w, gy.h, gy.w, g};
  if (conv_output_extent(in_h, w.kernel, g) != gy.h ||
      conv_output_extent(in_w, w.kernel, g) != gy.w) {
    throw ShapeError("conv2d_backward_input: gradient spatial size does not "
                     "match the requested input size");
  }
  Tensor grad_in({gy.n, w.in_channels, in_h, in_w});
  const ConstMatrixMap wm(weight.raw(), w.out_channels, p.rows());
  const std::size_t chunk = chunk_for(p, gy.n);
  RowMatrix g_cm, cols;
  for (std::size_t n0 = 0; n0 < gy.n; n0 += chunk) {
    const std::size_t n1 = std::min(gy.n, n0 + chunk);
    g_cm.resize(gy.c, (n1 - n0) * p.out_area());
    to_channel_major(grad_out.raw(), gy.c, p.out_area(), n0, n1, g_cm.data());
    cols.noalias() = wm.transpose() * g_cm;
    col2im(cols.data(), p, n0, n1, grad_in.raw());
  }
  return grad_in;
}

Tensor conv2d_backward_weight(const Tensor& input, const Tensor& grad_out,
                              std::size_t kernel, ConvGeometry g) {
  const Dims4 x = dims4(input, "conv2d_backward_weight input");
  const Dims4 gy = dims4(grad_out, "conv2d_backward_weight grad");
  if (x.n != gy.n) {
    throw ShapeError("conv2d_backward_weight: batch mismatch " +
                     input.shape_string() + " vs " + grad_out.shape_string());
  }
  const Patch p{x.c, kernel, x.h, x.w, gy.h, gy.w, g};
  if (conv_output_extent(x.h, kernel, g) != gy.h ||
      conv_output_extent(x.w, kernel, g) != gy.w) {
    throw ShapeError("conv2d_backward_weight: gradient spatial size does not "
                     "match the input");
  }
  Tensor grad_w({gy.c, x.c, kernel, kernel});
  MatrixMap gw(grad_w.raw(), gy.c, p.rows());
  const std::size_t chunk = chunk_for(p, x.n);
  RowMatrix g_cm, cols;
  for (std::size_t n0 = 0; n0 < x.n; n0 += chunk) {
    const std::size_t n1 = std::min(x.n, n0 + chunk);
    cols.resize(p.rows(), (n1 - n0) * p.out_area());
    im2col(input.raw(), p, n0, n1, cols.data());
    g_cm.resize(gy.c, (n1 - n0) * p.out_area());
    to_channel_major(grad_out.raw(), gy.c, p.out_area(), n0, n1, g_cm.data());
    gw.noalias() += g_cm * cols.transpose();
  }
  return grad_w;
}

Tensor deconv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                ConvGeometry g) {
  const Dims4 x = dims4(input, "deconv2d input");
  const ConvWeight w = conv_weight(weight, "deconv2d");
  if (w.out_channels != x.c) {
    throw ShapeError("deconv2d: input has " + std::to_string(x.c) +
                     " channels but weight " + weight.shape_string() +
                     " expects " + std::to_string(w.out_channels));
  }
  check_bias(bias, w.in_channels, "deconv2d");
  Tensor out = conv2d_backward_input(input, weight,
                                     deconv_output_extent(x.h, w.kernel, g),
                                     deconv_output_extent(x.w, w.kernel, g), g);
  add_bias(out, bias);
  return out;
}

Tensor deconv2d_backward_input(const Tensor& grad_out, const Tensor& weight,
                               ConvGeometry g) {
  return conv2d(grad_out, weight, Tensor(), g);
}

Tensor deconv2d_backward_weight(const Tensor& input, const Tensor& grad_out,
                                std::size_t kernel, ConvGeometry g) {
  return conv2d_backward_weight(grad_out, input, kernel, g);
}

Tensor channel_sum(const Tensor& grad_out) {
  if (grad_out.rank() < 2) {
    throw ShapeError("channel_sum needs rank >= 2, got " +
                     grad_out.shape_string());
  }
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1);
  const std::size_t area = grad_out.size() / (n * c);
  Tensor out({c});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* p = grad_out.raw() + (b * c + ch) * area;
      double acc = 0.0;
      for (std::size_t i = 0; i < area; ++i) acc += p[i];
      out[ch] += acc;
    }
  }
  return out;
}

namespace reference {

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              ConvGeometry g) {
  const Dims4 x = dims4(input, "conv2d input");
  const ConvWeight w = conv_weight(weight, "conv2d");
  if (w.in_channels != x.c) throw ShapeError("conv2d: channel mismatch");
  check_bias(bias, w.out_channels, "conv2d");
  const std::size_t oh = conv_output_extent(x.h, w.kernel, g);
  const std::size_t ow = conv_output_extent(x.w, w.kernel, g);
  Tensor out({x.n, w.out_channels, oh, ow});
  for (std::size_t n = 0; n < x.n; ++n)
    for (std::size_t f = 0; f < w.out_channels; ++f)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = bias.empty() ? 0.0 : bias[f];
          for (std::size_t c = 0; c < x.c; ++c)
            for (std::size_t u = 0; u < w.kernel; ++u)
              for (std::size_t v = 0; v < w.kernel; ++v) {
                const auto y = static_cast<std::ptrdiff_t>(i * g.stride + u) -
                               static_cast<std::ptrdiff_t>(g.pad);
                const auto xx = static_cast<std::ptrdiff_t>(j * g.stride + v) -
                                static_cast<std::ptrdiff_t>(g.pad);
                if (y < 0 || xx < 0 || y >= static_cast<std::ptrdiff_t>(x.h) ||
                    xx >= static_cast<std::ptrdiff_t>(x.w))
                  continue;
                acc += weight.at(f, c, u, v) *
                       input.at(n, c, static_cast<std::size_t>(y),
                                static_cast<std::size_t>(xx));
              }
          out.at(n, f, i, j) = acc;
        }
  return out;
}

Tensor deconv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                ConvGeometry g) {
  const Dims4 x = dims4(input, "deconv2d input");
  const ConvWeight w = conv_weight(weight, "deconv2d");
  if (w.out_channels != x.c) throw ShapeError("deconv2d: channel mismatch");
  check_bias(bias, w.in_channels, "deconv2d");
  const std::size_t oh = deconv_output_extent(x.h, w.kernel, g);
  const std::size_t ow = deconv_output_extent(x.w, w.kernel, g);
  Tensor out({x.n, w.in_channels, oh, ow});
  for (std::size_t n = 0; n < x.n; ++n)
    for (std::size_t c = 0; c < x.c; ++c)
      for (std::size_t i = 0; i < x.h; ++i)
        for (std::size_t j = 0; j < x.w; ++j) {
          const double v_in = input.at(n, c, i, j);
          for (std::size_t o = 0; o < w.in_channels; ++o)
            for (std::size_t u = 0; u < w.kernel; ++u)
              for (std::size_t v = 0; v < w.kernel; ++v) {
                const auto y = static_cast<std::ptrdiff_t>(i * g.stride + u) -
                               static_cast<std::ptrdiff_t>(g.pad);
                const auto xx = static_cast<std::ptrdiff_t>(j * g.stride + v) -
                                static_cast<std::ptrdiff_t>(g.pad);
                if (y < 0 || xx < 0 || y >= static_cast<std::ptrdiff_t>(oh) ||
                    xx >= static_cast<std::ptrdiff_t>(ow))
                  continue;
                out.at(n, o, static_cast<std::size_t>(y),
                       static_cast<std::size_t>(xx)) +=
                    v_in * weight.at(c, o, u, v);
              }
        }
  add_bias(out, bias);
  return out;
}

Tensor conv2d_backward_weight(const Tensor& input, const Tensor& grad_out,
                              std::size_t kernel, ConvGeometry g) {
  const Dims4 x = dims4(input, "conv2d_backward_weight input");
  const Dims4 gy = dims4(grad_out, "conv2d_backward_weight grad");
  Tensor grad_w({gy.c, x.c, kernel, kernel});
  for (std::size_t n = 0; n < x.n; ++n)
    for (std::size_t f = 0; f < gy.c; ++f)
      for (std::size_t i = 0; i < gy.h; ++i)
        for (std::size_t j = 0; j < gy.w; ++j)
          for (std::size_t c = 0; c < x.c; ++c)
            for (std::size_t u = 0; u < kernel; ++u)
              for (std::size_t v = 0; v < kernel; ++v) {
                const auto y = static_cast<std::ptrdiff_t>(i * g.stride + u) -
                               static_cast<std::ptrdiff_t>(g.pad);
                const auto xx = static_cast<std::ptrdiff_t>(j * g.stride + v) -
                                static_cast<std::ptrdiff_t>(g.pad);
                if (y < 0 || xx < 0 || y >= static_cast<std::ptrdiff_t>(x.h) ||
                    xx >= static_cast<std::ptrdiff_t>(x.w))
                  continue;
                grad_w.at(f, c, u, v) +=
                    grad_out.at(n, f, i, j) *
                    input.at(n, c, static_cast<std::size_t>(y),
                             static_cast<std::size_t>(xx));
              }
  return grad_w;
}

}  // namespace reference

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() < 2 || weight.rank() != 2) {
    throw ShapeError("linear: bad ranks " + input.shape_string() + " x " +
                     weight.shape_string());
  }
  const std::size_t n = input.dim(0);
  const std::size_t in = input.size() / n;
  if (weight.dim(1) != in) {
    throw ShapeError("linear: input " + input.shape_string() + " has " +
                     std::to_string(in) + " features but weight " +
                     weight.shape_string() + " expects " +
                     std::to_string(weight.dim(1)));
  }
  const std::size_t out_features = weight.dim(0);
  check_bias(bias, out_features, "linear");
  Tensor out({n, out_features});
  const ConstMatrixMap x(input.raw(), n, in);
  const ConstMatrixMap w(weight.raw(), out_features, in);
  MatrixMap y(out.raw(), n, out_features);
  y.noalias() = x * w.transpose();
  if (!bias.empty()) {
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t o = 0; o < out_features; ++o) y(b, o) += bias[o];
  }
  return out;
}

Tensor linear_backward_input(const Tensor& grad_out, const Tensor& weight,
                             const Shape& input_shape) {
  if (grad_out.rank() != 2 || grad_out.dim(1) != weight.dim(0)) {
    throw ShapeError("linear_backward_input: gradient " +
                     grad_out.shape_string() + " incompatible with weight " +
                     weight.shape_string());
  }
  Tensor grad_in(input_shape);
  const ConstMatrixMap gy(grad_out.raw(), grad_out.dim(0), grad_out.dim(1));
  const ConstMatrixMap w(weight.raw(), weight.dim(0), weight.dim(1));
  MatrixMap gx(grad_in.raw(), grad_out.dim(0), weight.dim(1));
  gx.noalias() = gy * w;
  return grad_in;
}

Tensor linear_backward_weight(const Tensor& input, const Tensor& grad_out) {
  const std::size_t n = input.dim(0);
  const std::size_t in = input.size() / n;
  if (grad_out.rank() != 2 || grad_out.dim(0) != n) {
    throw ShapeError("linear_backward_weight: gradient " +
                     grad_out.shape_string() + " incompatible with input " +
                     input.shape_string());
  }
  Tensor grad_w({grad_out.dim(1), in});
  const ConstMatrixMap x(input.raw(), n, in);
  const ConstMatrixMap gy(grad_out.raw(), n, grad_out.dim(1));
  MatrixMap gw(grad_w.raw(), grad_out.dim(1), in);
  gw.noalias() = gy.transpose() * x;
  return grad_w;
}

namespace {

struct ChannelLayout {
  std::size_t n, c, area;
};

ChannelLayout channel_layout(const Tensor& t) {
  if (t.rank() != 2 && t.rank() != 4) {
    throw ShapeError("batchnorm expects [N, C] or [N, C, H, W], got " +
                     t.shape_string());
  }
  return {t.dim(0), t.dim(1), t.size() / (t.dim(0) * t.dim(1))};
}

}  // namespace

Tensor batchnorm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                 Mode mode, RunningStats stats, BatchNormCache* cache,
                 double eps, double momentum) {
  const ChannelLayout l = channel_layout(input);
  if (gamma.size() != l.c || beta.size() != l.c || stats.mean.size() != l.c ||
      stats.var.size() != l.c || stats.updates.size() != 1) {
    throw ShapeError("batchnorm: parameter sizes do not match " +
                     std::to_string(l.c) + " channels");
  }
  const std::size_t m = l.n * l.area;
  std::vector<double> mean(l.c), inv_std(l.c);
  if (mode == Mode::train) {
    if (m < 2) {
      throw ShapeError("train-mode batchnorm needs at least 2 values per "
                       "channel, got " + std::to_string(m));
    }
    for (std::size_t ch = 0; ch < l.c; ++ch) {
      double s = 0.0;
      for (std::size_t b = 0; b < l.n; ++b) {
        const double* p = input.raw() + (b * l.c + ch) * l.area;
        for (std::size_t i = 0; i < l.area; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t b = 0; b < l.n; ++b) {
        const double* p = input.raw() + (b * l.c + ch) * l.area;
        for (std::size_t i = 0; i < l.area; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const double var = ss / static_cast<double>(m);
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + eps);
      stats.mean[ch] = momentum * stats.mean[ch] + (1.0 - momentum) * mu;
      stats.var[ch] = momentum * stats.var[ch] + (1.0 - momentum) * var;
    }
    stats.updates[0] += 1.0;
  } else {
    if (stats.updates[0] <= 0.0) {
      throw StateError("eval-mode batchnorm has no running statistics; load a "
                       "trained checkpoint or run a train-mode pass first");
    }
    for (std::size_t ch = 0; ch < l.c; ++ch) {
      mean[ch] = stats.mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(stats.var[ch] + eps);
    }
  }

  Tensor out(input.shape());
  Tensor normalized(input.shape());
  for (std::size_t b = 0; b < l.n; ++b) {
    for (std::size_t ch = 0; ch < l.c; ++ch) {
      const std::size_t off = (b * l.c + ch) * l.area;
      for (std::size_t i = 0; i < l.area; ++i) {
        const double xh = (input[off + i] - mean[ch]) * inv_std[ch];
        normalized[off + i] = xh;
        out[off + i] = gamma[ch] * xh + beta[ch];
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return out;
}

BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& gamma,
                                  const BatchNormCache& cache) {
  if (grad_out.shape() != cache.normalized.shape()) {
    throw ShapeError("batchnorm_backward: gradient " + grad_out.shape_string() +
                     " does not match cached " +
                     cache.normalized.shape_string());
  }
  const ChannelLayout l = channel_layout(grad_out);
  const double m = static_cast<double>(l.n * l.area);
  BatchNormGrads g{Tensor(grad_out.shape()), Tensor({l.c}), Tensor({l.c})};
  for (std::size_t ch = 0; ch < l.c; ++ch) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t b = 0; b < l.n; ++b) {
      const std::size_t off = (b * l.c + ch) * l.area;
      for (std::size_t i = 0; i < l.area; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xh += grad_out[off + i] * cache.normalized[off + i];
      }
    }
    g.beta[ch] = sum_dy;
    g.gamma[ch] = sum_dy_xh;
    const double scale = gamma[ch] * cache.inv_std[ch];
    for (std::size_t b = 0; b < l.n; ++b) {
      const std::size_t off = (b * l.c + ch) * l.area;
      for (std::size_t i = 0; i < l.area; ++i) {
        if (cache.mode == Mode::train) {
          g.input[off + i] =
              scale * (grad_out[off + i] - sum_dy / m -
                       cache.normalized[off + i] * sum_dy_xh / m);
        } else {
          g.input[off + i] = scale * grad_out[off + i];
        }
      }
    }
  }
  return g;
}

double sigmoid(double x) noexcept {
  // Saturated values are clamped into the open interval (0, 1).
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - 0x1.0p-53;
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  return std::clamp(y, lo, hi);
}

namespace {
thread_local KinkMonitor* active_monitor = nullptr;
}  // namespace

KinkMonitor::KinkMonitor() : previous_(active_monitor) { active_monitor = this; }
KinkMonitor::~KinkMonitor() { active_monitor = previous_; }

void KinkMonitor::record(std::span<const double> inputs) {
  if (!active_monitor) return;
  auto& p = active_monitor->pattern_;
  for (double v : inputs) p.push_back(v > 0.0);
}

Tensor activate(const Tensor& input, Activation act) {
  Tensor out(input.shape());
  const auto in = input.data();
  auto o = out.data();
  switch (act.kind) {
    case ActivationKind::identity:
      std::copy(in.begin(), in.end(), o.begin());
      break;
    case ActivationKind::relu:
      KinkMonitor::record(in);
      for (std::size_t i = 0; i < in.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case ActivationKind::leaky_relu:
      KinkMonitor::record(in);
      for (std::size_t i = 0; i < in.size(); ++i)
        o[i] = in[i] > 0.0 ? in[i] : act.alpha * in[i];
      break;
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < in.size(); ++i) o[i] = sigmoid(in[i]);
      break;
  }
  return out;
}

Tensor activation_backward(const Tensor& grad_out, const Tensor& input,
                           const Tensor& output, Activation act) {
  if (grad_out.shape() != input.shape() || grad_out.shape() != output.shape()) {
    throw ShapeError("activation_backward: gradient " +
                     grad_out.shape_string() + " does not match cache " +
                     input.shape_string());
  }
  Tensor g(grad_out.shape());
  const auto dy = grad_out.data();
  auto dx = g.data();
  switch (act.kind) {
    case ActivationKind::identity:
      std::copy(dy.begin(), dy.end(), dx.begin());
      break;
    case ActivationKind::relu:
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = input[i] > 0.0 ? dy[i] : 0.0;
      break;
    case ActivationKind::leaky_relu:
      for (std::size_t i = 0; i < dy.size(); ++i)
        dx[i] = input[i] > 0.0 ? dy[i] : act.alpha * dy[i];
      break;
    case ActivationKind::sigmoid:
      for (std::size_t i = 0; i < dy.size(); ++i)
        dx[i] = dy[i] * output[i] * (1.0 - output[i]);
      break;
  }
  return g;
}

}  // namespace artgan::kernels
