#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "artgan/tensor.hpp"

namespace artgan {

// Deterministic random stream.
//
// Engine: std::mt19937_64 (its output sequence is fixed by the C++ standard).
// Uniform doubles take the top 53 bits of one engine word. Normal draws use
// the Box-Muller transform on two uniforms and yield the cosine branch
// first, then the cached sine branch. Integers in [0, n) use rejection
// sampling on the raw 64-bit word. None of the std distributions are used,
// since their algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1).
  double uniform();
  // Standard normal N(0, 1).
  double normal();
  // Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Full state as an opaque byte string, and its inverse.
  std::string serialize() const;
  static Rng deserialize(const std::string& bytes);

  friend bool operator==(const Rng& a, const Rng& b);

 private:
  std::uint64_t seed_ = 0;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Tensor of i.i.d. N(0, 1) draws in row-major order.
Tensor sample_normal(Rng& rng, const Shape& shape);

// In-place Fisher-Yates shuffle driven by Rng::uniform_index.
template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace artgan
