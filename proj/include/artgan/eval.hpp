#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "artgan/data.hpp"
#include "artgan/model.hpp"
#include "artgan/rng.hpp"
#include "artgan/tensor.hpp"

namespace artgan::eval {

// Isotropic Gaussian kernel density estimate centered on M samples of
// dimension D (rows of `samples`, any trailing shape is flattened).
struct ParzenModel {
  Tensor samples;
  double sigma = 1.0;
};

struct ParzenResult {
  std::vector<double> log_likelihoods;  // one per evaluated point
  double mean = 0.0;
  double std_error = 0.0;  // sample std (T - 1 denominator) / sqrt(T)
};

// ll(x) = logsumexp_i(-||x - s_i||^2 / (2 sigma^2)) - log M
//         - (D / 2) log(2 pi sigma^2)
ParzenResult parzen_ll(const ParzenModel& model, const Tensor& points);

// Argmax over `grid` of the mean validation log-likelihood; ties go to the
// smallest sigma.
double select_sigma(const Tensor& samples, const Tensor& validation,
                    std::span<const double> grid);

// `count` log-spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t count);
// 20 values in [0.01, 1], for [0, 1]-scaled pixels.
std::vector<double> default_sigma_grid();

struct Match {
  std::size_t index = 0;
  double distance = 0.0;  // squared L2

  friend bool operator==(const Match&, const Match&) = default;
};

// Exhaustive squared-L2 search; ties resolve to the smallest corpus index.
std::vector<Match> nearest_neighbour(const Tensor& queries, const Tensor& corpus);

// Multinomial logistic regression on raw pixels, trained with full-batch
// gradient descent from zero weights (so training is deterministic).
class LinearProbe {
 public:
  struct Options {
    std::size_t iterations = 200;
    double learning_rate = 0.5;
    double l2 = 1e-4;
  };

  void fit(const data::LabeledImageSet& set, const Options& options);
  void fit(const data::LabeledImageSet& set) { fit(set, Options{}); }
  bool trained() const noexcept { return !weights_.empty(); }
  std::size_t num_classes() const noexcept { return classes_; }

  // Predicted 1-based class per image.
  std::vector<std::size_t> predict(const Tensor& images) const;
  double accuracy(const data::LabeledImageSet& set) const;

 private:
  std::size_t classes_ = 0;
  std::size_t features_ = 0;
  std::vector<double> weights_;  // classes x features
  std::vector<double> bias_;
};

struct FidelityReport {
  double fidelity = 0.0;
  std::vector<double> per_class;
  std::size_t samples = 0;
};

// Generates `samples_per_class` images per class (eval-mode batchnorm) and
// reports how often the probe's class equals the assigned class.
FidelityReport class_fidelity(model::Generator& generator, const LinearProbe& probe,
                              std::size_t samples_per_class, Rng& rng,
                              std::size_t batch_size = 64);

// Generates `count` images with assigned classes cycling 1..K.
Tensor generate_samples(model::Generator& generator, std::size_t count, Rng& rng,
                        std::span<const std::size_t> classes = {},
                        std::size_t batch_size = 64);

// Row-major tiling with 2-pixel black gutters; 8-bit round-to-nearest.
void write_grid(const Tensor& images, std::size_t cols,
                const std::filesystem::path& path);

struct ReportRow {
  std::string metric;
  double value = 0.0;
  double std_error = 0.0;
};

// UTF-8, one "metric\tvalue\tstderr" line per row.
std::string format_report(std::span<const ReportRow> rows);

}  // namespace artgan::eval
