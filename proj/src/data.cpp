#include "artgan/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>

#include "artgan/error.hpp"
#include "artgan/rng.hpp"

namespace artgan::data {

LabeledImageSet::LabeledImageSet(std::size_t image_size,
                                 std::vector<std::string> class_names,
                                 std::string provenance)
    : image_size_(image_size),
      class_names_(std::move(class_names)),
      provenance_(std::move(provenance)) {}

void LabeledImageSet::add(std::span<const std::uint8_t> chw, std::size_t label) {
  if (chw.size() != 3 * image_size_ * image_size_) {
    throw ShapeError("image has " + std::to_string(chw.size()) +
                     " bytes, expected " +
                     std::to_string(3 * image_size_ * image_size_));
  }
  if (label < 1 || label > class_names_.size()) {
    throw std::out_of_range("label " + std::to_string(label) + " outside 1.." +
                            std::to_string(class_names_.size()));
  }
  pixels_.insert(pixels_.end(), chw.begin(), chw.end());
  labels_.push_back(label);
}

void LabeledImageSet::add(std::span<const double> chw, std::size_t label) {
  std::vector<std::uint8_t> bytes(chw.size());
  std::transform(chw.begin(), chw.end(), bytes.begin(), quantize);
  add(std::span<const std::uint8_t>(bytes), label);
}

std::span<const std::uint8_t> LabeledImageSet::image_bytes(std::size_t i) const {
  const std::size_t per = 3 * image_size_ * image_size_;
  if (i >= size()) throw std::out_of_range("image index out of range");
  return std::span(pixels_).subspan(i * per, per);
}

Tensor LabeledImageSet::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ShapeError("empty batch");
  const std::size_t per = 3 * image_size_ * image_size_;
  Tensor out({indices.size(), 3, image_size_, image_size_});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto bytes = image_bytes(indices[b]);
    double* dst = out.raw() + b * per;
    for (std::size_t i = 0; i < per; ++i) dst[i] = bytes[i] / 255.0;
  }
  return out;
}

Tensor LabeledImageSet::all() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch(idx);
}

LabeledImageSet LabeledImageSet::subset(std::span<const std::size_t> indices) const {
  LabeledImageSet out(image_size_, class_names_, provenance_);
  for (std::size_t i : indices) out.add(image_bytes(i), labels_.at(i));
  return out;
}

namespace {

constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarSide * kCifarSide;  // 3073

const std::vector<std::string> kCifarClasses{
    "airplane", "automobile", "bird", "cat", "deer",
    "dog", "frog", "horse", "ship", "truck"};

void load_cifar_file(const std::filesystem::path& file, LabeledImageSet& set) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() % kCifarRecord != 0) {
    throw IoError(file.string() + ": length " + std::to_string(bytes.size()) +
                  " is not a multiple of " + std::to_string(kCifarRecord));
  }
  constexpr std::size_t out_side = 2 * kCifarSide;
  std::vector<std::uint8_t> chw(3 * out_side * out_side);
  for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord) {
    const std::uint8_t label = bytes[off];
    if (label > 9) {
      throw IoError(file.string() + ": label byte " + std::to_string(label) +
                    " at record " + std::to_string(off / kCifarRecord) +
                    " exceeds 9");
    }
    const std::uint8_t* src = bytes.data() + off + 1;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < out_side; ++y)
        for (std::size_t x = 0; x < out_side; ++x)
          chw[(c * out_side + y) * out_side + x] =
              src[(c * kCifarSide + y / 2) * kCifarSide + x / 2];
    set.add(std::span<const std::uint8_t>(chw), std::size_t{label} + 1);
  }
}

}  // namespace

LabeledImageSet load_cifar10(const std::filesystem::path& source,
                             CifarSplit split) {
  LabeledImageSet set(2 * kCifarSide, kCifarClasses, "cifar10:" + source.string());
  if (std::filesystem::is_regular_file(source)) {
    load_cifar_file(source, set);
    return set;
  }
  if (!std::filesystem::is_directory(source)) {
    throw IoError("CIFAR-10 source " + source.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  if (split == CifarSplit::train) {
    for (int i = 1; i <= 5; ++i) {
      files.push_back(source / ("data_batch_" + std::to_string(i) + ".bin"));
    }
  } else {
    files.push_back(source / "test_batch.bin");
  }
  for (const auto& f : files) load_cifar_file(f, set);
  return set;
}

std::vector<std::uint8_t> crop_resize(const RgbImage& image, std::size_t size) {
  const std::size_t side = std::min(image.width, image.height);
  const std::size_t x0 = (image.width - side) / 2;
  const std::size_t y0 = (image.height - side) / 2;
  std::vector<std::uint8_t> chw(3 * size * size);
  for (std::size_t y = 0; y < size; ++y) {
    const std::size_t sy = y0 + (2 * y + 1) * side / (2 * size);
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t sx = x0 + (2 * x + 1) * side / (2 * size);
      for (std::size_t c = 0; c < 3; ++c) {
        chw[(c * size + y) * size + x] = image.at(sx, sy, c);
      }
    }
  }
  return chw;
}

LabeledImageSet load_image_dir(const std::filesystem::path& root,
                               std::size_t image_size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw IoError("image directory " + root.string() + " does not exist");
  }
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && e.path().filename().string().front() != '.') {
      class_dirs.push_back(e.path());
    }
  }
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });
  if (class_dirs.empty()) {
    throw IoError(root.string() + " contains no class subdirectories");
  }
  std::vector<std::string> names;
  for (const auto& d : class_dirs) names.push_back(d.filename().string());
  LabeledImageSet set(image_size, names, "image_dir:" + root.string());

  std::size_t skipped = 0;
  std::vector<std::string> empty;
  for (std::size_t k = 0; k < class_dirs.size(); ++k) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[k])) {
      if (e.is_regular_file() && e.path().filename().string().front() != '.') {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    std::size_t loaded = 0;
    for (const auto& f : files) {
      try {
        const RgbImage img = read_ppm(f);
        set.add(std::span<const std::uint8_t>(crop_resize(img, image_size)), k + 1);
        ++loaded;
      } catch (const IoError& e) {
        std::cerr << "warning: skipping " << f.string() << ": " << e.what() << '\n';
        ++skipped;
      }
    }
    if (loaded == 0) empty.push_back(class_dirs[k].string());
  }
  if (!empty.empty()) {
    std::string msg = "class directories without readable images:";
    for (const auto& e : empty) msg += " " + e;
    throw IoError(msg);
  }
  set.set_skipped_files(skipped);
  return set;
}

namespace {

enum class ShapeKind { circle, square, triangle, cross, ring, bar };

constexpr std::array<ShapeKind, 6> kShapes{ShapeKind::circle, ShapeKind::square,
                                           ShapeKind::triangle, ShapeKind::cross,
                                           ShapeKind::ring, ShapeKind::bar};
constexpr std::array<std::array<double, 3>, 6> kHues{{{0.95, 0.15, 0.15},
                                                      {0.15, 0.90, 0.20},
                                                      {0.20, 0.35, 0.95},
                                                      {0.95, 0.90, 0.15},
                                                      {0.90, 0.20, 0.90},
                                                      {0.15, 0.90, 0.90}}};
constexpr std::array<const char*, 6> kShapeNames{"circle", "square", "triangle",
                                                 "cross", "ring", "bar"};

// Point (u, v) relative to the shape center, in units of the shape radius.
bool inside(ShapeKind kind, double u, double v) {
  switch (kind) {
    case ShapeKind::circle:
      return u * u + v * v <= 1.0;
    case ShapeKind::square:
      return std::abs(u) <= 0.8 && std::abs(v) <= 0.8;
    case ShapeKind::triangle:
      // apex up, base at v = 0.8
      return v <= 0.8 && v >= -1.0 && std::abs(u) <= (v + 1.0) * 0.5;
    case ShapeKind::cross:
      return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) ||
             (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    case ShapeKind::ring: {
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.45;
    }
    case ShapeKind::bar:
      return std::abs(u) <= 1.0 && std::abs(v) <= 0.3;
  }
  return false;
}

}  // namespace

LabeledImageSet synth_shapes(std::size_t K, std::size_t per_class,
                             std::size_t size, std::uint64_t seed) {
  if (K < 1 || K > kShapes.size()) {
    throw ConfigError("synth_shapes supports 1..6 classes, got " +
                      std::to_string(K));
  }
  std::vector<std::string> names(kShapeNames.begin(), kShapeNames.begin() + K);
  LabeledImageSet set(size, names,
                      "synth_shapes:K=" + std::to_string(K) + ",per_class=" +
                          std::to_string(per_class) + ",seed=" + std::to_string(seed));
  Rng rng(seed);
  const double s = static_cast<double>(size);
  std::vector<double> chw(3 * size * size);
  for (std::size_t c = 0; c < K; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const double cx = s * (0.35 + 0.3 * rng.uniform());
      const double cy = s * (0.35 + 0.3 * rng.uniform());
      const double radius = s * (0.18 + 0.10 * rng.uniform());
      const double brightness = 0.8 + 0.2 * rng.uniform();
      const double background = 0.04 + 0.08 * rng.uniform();
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const double u = (static_cast<double>(x) + 0.5 - cx) / radius;
          const double v = (static_cast<double>(y) + 0.5 - cy) / radius;
          const bool fg = inside(kShapes[c], u, v);
          for (std::size_t ch = 0; ch < 3; ++ch) {
            chw[(ch * size + y) * size + x] =
                fg ? brightness * kHues[c][ch] : background;
          }
        }
      }
      set.add(std::span<const double>(chw), c + 1);
    }
  }
  return set;
}

Split split_train_test(const LabeledImageSet& set, double test_fraction,
                       std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test fraction must lie strictly between 0 and 1");
  }
  const std::size_t K = set.num_classes();
  std::vector<std::vector<std::size_t>> by_class(K);
  for (std::size_t i = 0; i < set.size(); ++i) by_class[set.label(i) - 1].push_back(i);
  Rng rng(seed);
  Split out;
  for (std::size_t k = 0; k < K; ++k) {
    auto& members = by_class[k];
    if (members.size() < 2) {
      throw ConfigError("class '" + set.class_names()[k] + "' has " +
                        std::to_string(members.size()) +
                        " samples; a stratified split needs at least 2");
    }
    shuffle(members, rng);
    const auto count = static_cast<double>(members.size());
    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(test_fraction * count)), 1,
        members.size() - 1);
    out.test_indices.insert(out.test_indices.end(), members.begin(),
                            members.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train_indices.insert(out.train_indices.end(),
                             members.begin() + static_cast<std::ptrdiff_t>(n_test),
                             members.end());
  }
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.test_indices.begin(), out.test_indices.end());
  out.train = set.subset(out.train_indices);
  out.test = set.subset(out.test_indices);
  return out;
}

}  // namespace artgan::data
