#pragma once

#include <cstdint>
#include <random>

#include "mtrl/linalg.hpp"

namespace mtrl {

/// Golden-ratio increment used to derive independent per-stream seeds.
inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// Sub-seed for stream `index`: seed XOR (index + 1) * golden-ratio constant.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return seed ^ ((index + 1) * kGoldenGamma);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next() { return engine_(); }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Vector normal_vector(Eigen::Index n);

  /// Random r x d matrix with orthonormal rows (Haar via QR of a Gaussian).
  Matrix orthonormal_rows(Eigen::Index r, Eigen::Index d);

  /// Index drawn from a discrete distribution given by (unnormalised) weights.
  Eigen::Index categorical(const Eigen::Ref<const Vector>& weights);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace mtrl
