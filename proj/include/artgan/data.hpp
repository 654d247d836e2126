#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "artgan/image_io.hpp"
#include "artgan/tensor.hpp"

namespace artgan::data {

// Labeled RGB images of a fixed square size. Pixels are held as bytes and
// exposed as [0, 1] doubles (byte / 255) through batch(); every supported
// source is 8-bit, so nothing is lost.
class LabeledImageSet {
 public:
  LabeledImageSet() = default;
  LabeledImageSet(std::size_t image_size, std::vector<std::string> class_names,
                  std::string provenance);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t image_size() const noexcept { return image_size_; }
  std::size_t num_classes() const noexcept { return class_names_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::string& provenance() const noexcept { return provenance_; }
  std::span<const std::size_t> labels() const noexcept { return labels_; }
  std::size_t label(std::size_t i) const { return labels_.at(i); }
  std::size_t skipped_files() const noexcept { return skipped_; }
  void set_skipped_files(std::size_t n) noexcept { skipped_ = n; }

  // Appends one image given as planar CHW bytes (3 * s * s).
  void add(std::span<const std::uint8_t> chw, std::size_t label);
  // Appends an image given as [0, 1] doubles in CHW order, quantized.
  void add(std::span<const double> chw, std::size_t label);

  std::span<const std::uint8_t> image_bytes(std::size_t i) const;
  // [n, 3, s, s] in [0, 1] for the given indices.
  Tensor batch(std::span<const std::size_t> indices) const;
  Tensor all() const;

  LabeledImageSet subset(std::span<const std::size_t> indices) const;

 private:
  std::size_t image_size_ = 0;
  std::vector<std::string> class_names_;
  std::string provenance_;
  std::vector<std::uint8_t> pixels_;
  std::vector<std::size_t> labels_;
  std::size_t skipped_ = 0;
};

enum class CifarSplit { train, test };

// CIFAR-10 binary batches (data_batch_1..5.bin or test_batch.bin). `source`
// may be a directory or a single batch file. Images are upsampled 32 -> 64
// by 2x2 pixel replication; labels 0..9 become 1..10.
LabeledImageSet load_cifar10(const std::filesystem::path& source,
                             CifarSplit split = CifarSplit::train);

// One subdirectory per class (class index = 1-based rank of the name in
// lexicographic order) holding PPM (P6) images. Images are center-cropped
// to their short side and nearest-neighbour resized to `image_size`.
// Unreadable files are skipped with a warning and counted.
LabeledImageSet load_image_dir(const std::filesystem::path& root,
                               std::size_t image_size = 64);

// Center crop of the short side, then nearest-neighbour resize.
// Returns planar CHW bytes.
std::vector<std::uint8_t> crop_resize(const RgbImage& image,
                                      std::size_t size);

// Desk-scale dataset: class c draws a fixed shape (circle, square,
// triangle, cross, ring, bar) in a fixed hue on a dark background with
// seeded jitter in position, scale and brightness. K <= 6.
LabeledImageSet synth_shapes(std::size_t K, std::size_t per_class,
                             std::size_t size = 64, std::uint64_t seed = 0);

struct Split {
  LabeledImageSet train;
  LabeledImageSet test;
  std::vector<std::size_t> train_indices;  // ascending
  std::vector<std::size_t> test_indices;   // ascending
};

// Stratified split: within each class a seeded permutation picks
// round(test_fraction * count) test samples (at least one per side).
Split split_train_test(const LabeledImageSet& set, double test_fraction = 0.3,
                       std::uint64_t seed = 0);

}  // namespace artgan::data
