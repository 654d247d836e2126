#include "artgan/eval.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <charconv>

#include "artgan/error.hpp"
#include "artgan/image_io.hpp"
#include "artgan/loss.hpp"

namespace artgan::eval {
namespace {

std::size_t row_width(const Tensor& t, const char* what) {
  if (t.rank() < 1 || t.size() == 0) {
    throw ShapeError(std::string(what) + " is empty");
  }
  return t.size() / t.dim(0);
}

}  // namespace

ParzenResult parzen_ll(const ParzenModel& model, const Tensor& points) {
  if (!(model.sigma > 0.0)) throw std::invalid_argument("Parzen sigma must be positive");
  const std::size_t dims = row_width(model.samples, "Parzen sample set");
  if (row_width(points, "Parzen evaluation set") != dims) {
    throw ShapeError("Parzen: points have dimension " +
                     std::to_string(points.size() / points.dim(0)) +
                     ", samples have " + std::to_string(dims));
  }
  const std::size_t m = model.samples.dim(0), t = points.dim(0);
  const double inv_two_var = 1.0 / (2.0 * model.sigma * model.sigma);
  const double log_norm =
      std::log(static_cast<double>(m)) +
      0.5 * static_cast<double>(dims) *
          std::log(2.0 * std::numbers::pi * model.sigma * model.sigma);

  ParzenResult out;
  out.log_likelihoods.resize(t);
  std::vector<double> exponents(m);
  for (std::size_t p = 0; p < t; ++p) {
    const double* x = points.raw() + p * dims;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      const double* s = model.samples.raw() + i * dims;
      double d2 = 0.0;
      for (std::size_t j = 0; j < dims; ++j) {
        const double d = x[j] - s[j];
        d2 += d * d;
      }
      exponents[i] = -d2 * inv_two_var;
      top = std::max(top, exponents[i]);
    }
    double acc = 0.0;
    for (double e : exponents) acc += std::exp(e - top);
    out.log_likelihoods[p] = top + std::log(acc) - log_norm;
  }
  double total = 0.0;
  for (double v : out.log_likelihoods) total += v;
  out.mean = total / static_cast<double>(t);
  if (t > 1) {
    double ss = 0.0;
    for (double v : out.log_likelihoods) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(t - 1)) /
                    std::sqrt(static_cast<double>(t));
  }
  return out;
}

double select_sigma(const Tensor& samples, const Tensor& validation,
                    std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("select_sigma: empty sigma grid");
  if (validation.size() == 0) {
    throw std::invalid_argument("select_sigma: empty validation set");
  }
  double best_sigma = 0.0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double sigma : grid) {
    if (!(sigma > 0.0)) throw std::invalid_argument("select_sigma: sigma must be positive");
    const double ll = parzen_ll({samples, sigma}, validation).mean;
    if (ll > best_ll || (ll == best_ll && sigma < best_sigma) || best_sigma == 0.0) {
      best_ll = ll;
      best_sigma = sigma;
    }
  }
  return best_sigma;
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (count == 0 || !(lo > 0.0) || !(hi >= lo)) {
    throw std::invalid_argument("log_grid needs 0 < lo <= hi and count >= 1");
  }
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) /
                              static_cast<double>(count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> default_sigma_grid() { return log_grid(0.01, 1.0, 20); }

std::vector<Match> nearest_neighbour(const Tensor& queries, const Tensor& corpus) {
  if (corpus.rank() == 0 || corpus.size() == 0) {
    throw std::invalid_argument("nearest_neighbour: empty corpus");
  }
  const std::size_t dims = row_width(corpus, "corpus");
  if (queries.rank() != corpus.rank() ||
      !std::equal(queries.shape().begin() + 1, queries.shape().end(),
                  corpus.shape().begin() + 1)) {
    throw ShapeError("nearest_neighbour: query shape " + queries.shape_string() +
                     " does not match corpus " + corpus.shape_string());
  }
  std::vector<Match> out(queries.dim(0));
  for (std::size_t q = 0; q < queries.dim(0); ++q) {
    const double* x = queries.raw() + q * dims;
    Match best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < corpus.dim(0); ++i) {
      const double* c = corpus.raw() + i * dims;
      double d2 = 0.0;
      std::size_t j = 0;
      // Partial sums only grow, so a candidate already worse than the best
      // can be abandoned without changing the result.
      for (; j < dims; ++j) {
        const double d = x[j] - c[j];
        d2 += d * d;
        if (d2 > best.distance) break;
      }
      if (j == dims && d2 < best.distance) best = {i, d2};
    }
    out[q] = best;
  }
  return out;
}

void LinearProbe::fit(const data::LabeledImageSet& set, const Options& options) {
  if (set.size() == 0) throw std::invalid_argument("LinearProbe: empty training set");
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Tensor images = set.all();
  const std::size_t n = set.size();
  const std::size_t f = images.size() / n;
  const std::size_t k = set.num_classes();
  const Eigen::Map<const Matrix> x(images.raw(), n, f);

  // Step size scaled by a bound on the loss curvature, 0.5 * mean ||x||^2.
  const double curvature = 0.5 * x.rowwise().squaredNorm().mean() + options.l2;
  const double step = options.learning_rate / curvature;

  Matrix w = Matrix::Zero(k, f);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(k);
  Matrix target = Matrix::Zero(n, k);
  for (std::size_t i = 0; i < n; ++i) target(i, set.label(i) - 1) = 1.0;

  Matrix logits(n, k), grad(n, k);
  for (std::size_t it = 0; it < options.iterations; ++it) {
    logits.noalias() = x * w.transpose();
    logits.rowwise() += b;
    for (std::size_t i = 0; i < n; ++i) {
      const double top = logits.row(i).maxCoeff();
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += std::exp(logits(i, c) - top);
      for (std::size_t c = 0; c < k; ++c) {
        grad(i, c) = (std::exp(logits(i, c) - top) / z - target(i, c)) /
                     static_cast<double>(n);
      }
    }
    Matrix gw = grad.transpose() * x;
    gw += options.l2 * w;
    w -= step * gw;
    b -= step * grad.colwise().sum();
  }
  classes_ = k;
  features_ = f;
  weights_.assign(w.data(), w.data() + w.size());
  bias_.assign(b.data(), b.data() + b.size());
}

std::vector<std::size_t> LinearProbe::predict(const Tensor& images) const {
  if (!trained()) throw StateError("linear probe has not been trained");
  const std::size_t n = images.dim(0);
  if (images.size() / n != features_) {
    throw ShapeError("linear probe expects " + std::to_string(features_) +
                     " features per image, got " + images.shape_string());
  }
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = images.raw() + i * features_;
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes_; ++c) {
      const double* w = weights_.data() + c * features_;
      double s = bias_[c];
      for (std::size_t j = 0; j < features_; ++j) s += w[j] * x[j];
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    out[i] = best + 1;
  }
  return out;
}

double LinearProbe::accuracy(const data::LabeledImageSet& set) const {
  const auto pred = predict(set.all());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == set.label(i);
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

Tensor generate_samples(model::Generator& generator, std::size_t count, Rng& rng,
                        std::span<const std::size_t> classes,
                        std::size_t batch_size) {
  if (count == 0) throw std::invalid_argument("generate_samples: count must be positive");
  const auto& cfg = generator.config();
  std::vector<std::size_t> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    labels[i] = classes.empty() ? 1 + i % cfg.num_classes : classes[i % classes.size()];
  }
  std::vector<Tensor> parts;
  for (std::size_t begin = 0; begin < count; begin += batch_size) {
    const std::size_t end = std::min(count, begin + batch_size);
    const Tensor noise = sample_normal(rng, {end - begin, cfg.noise_dim});
    const auto y = loss::LabelBatch::assigned(
        std::span(labels).subspan(begin, end - begin), cfg.num_classes);
    parts.push_back(generator.generate(noise, y, nn::Mode::eval, nullptr));
  }
  return concat_batch(parts);
}

FidelityReport class_fidelity(model::Generator& generator, const LinearProbe& probe,
                              std::size_t samples_per_class, Rng& rng,
                              std::size_t batch_size) {
  if (!probe.trained()) throw StateError("class fidelity needs a trained probe");
  const std::size_t K = generator.config().num_classes;
  if (probe.num_classes() != K) {
    throw ShapeError("probe has " + std::to_string(probe.num_classes()) +
                     " classes, generator has " + std::to_string(K));
  }
  if (samples_per_class == 0) {
    throw std::invalid_argument("class fidelity needs samples_per_class >= 1");
  }
  FidelityReport report;
  report.per_class.resize(K);
  std::size_t total_hits = 0;
  for (std::size_t k = 1; k <= K; ++k) {
    const std::size_t label[] = {k};
    const Tensor images =
        generate_samples(generator, samples_per_class, rng, label, batch_size);
    std::size_t hits = 0;
    for (std::size_t p : probe.predict(images)) hits += p == k;
    report.per_class[k - 1] =
        static_cast<double>(hits) / static_cast<double>(samples_per_class);
    total_hits += hits;
  }
  report.samples = K * samples_per_class;
  report.fidelity = static_cast<double>(total_hits) / static_cast<double>(report.samples);
  return report;
}

void write_grid(const Tensor& images, std::size_t cols,
                const std::filesystem::path& path) {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw ShapeError("write_grid expects [N, 3, H, W] images, got " +
                     images.shape_string());
  }
  if (cols == 0) throw std::invalid_argument("write_grid: cols must be positive");
  constexpr std::size_t gutter = 2;
  const std::size_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
  const std::size_t c = std::min(cols, n);
  const std::size_t rows = (n + c - 1) / c;
  data::RgbImage grid;
  grid.width = c * w + (c - 1) * gutter;
  grid.height = rows * h + (rows - 1) * gutter;
  grid.pixels.assign(3 * grid.width * grid.height, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t x0 = (i % c) * (w + gutter);
    const std::size_t y0 = (i / c) * (h + gutter);
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          grid.at(x0 + x, y0 + y, ch) = data::quantize(images.at(i, ch, y, x));
  }
  data::write_ppm(path, grid);
}

std::string format_report(std::span<const ReportRow> rows) {
  std::string out;
  char buf[64];
  for (const auto& r : rows) {
    out += r.metric;
    for (double v : {r.value, r.std_error}) {
      out.push_back('\t');
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.append(buf, ptr);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace artgan::eval
