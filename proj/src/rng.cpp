#include "artgan/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "artgan/error.hpp"

namespace artgan {

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  // Largest multiple of n representable, minus one: accept below it.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n + 1) % n;
  std::uint64_t x = engine_();
  while (x > limit) x = engine_();
  return x % n;
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << seed_ << ' ' << (has_spare_ ? 1 : 0) << ' '
     << std::bit_cast<std::uint64_t>(spare_) << ' ' << engine_;
  return os.str();
}

Rng Rng::deserialize(const std::string& bytes) {
  std::istringstream is(bytes);
  Rng rng;
  int spare_flag = 0;
  std::uint64_t spare_bits = 0;
  is >> rng.seed_ >> spare_flag >> spare_bits >> rng.engine_;
  if (!is || (spare_flag != 0 && spare_flag != 1)) {
    throw IoError("corrupt random-generator state");
  }
  rng.has_spare_ = spare_flag == 1;
  rng.spare_ = std::bit_cast<double>(spare_bits);
  return rng;
}

bool operator==(const Rng& a, const Rng& b) {
  return a.seed_ == b.seed_ && a.engine_ == b.engine_ &&
         a.has_spare_ == b.has_spare_ &&
         std::bit_cast<std::uint64_t>(a.spare_) ==
             std::bit_cast<std::uint64_t>(b.spare_);
}

Tensor sample_normal(Rng& rng, const Shape& shape) {
  Tensor out(shape);
  for (auto& v : out.data()) v = rng.normal();
  return out;
}

}  // namespace artgan
