#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace prb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Seed = std::uint64_t;
using Rng = std::mt19937_64;

/// Raised when data or hyperparameters make the GP ill-posed (non-PD Gram
/// matrix, constant observations, zero conditioned variance).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateData : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// splitmix64 finalizer; child seeds are a pure function of (root, stream).
inline Seed mix_seed(Seed z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Seed split_seed(Seed root, std::uint64_t stream) {
  return mix_seed(mix_seed(root) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(Seed seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline bool in_unit_cube(const Vec& x, double tol = 0.0) {
  return (x.array() >= -tol).all() && (x.array() <= 1.0 + tol).all();
}

inline Vec clamp_to_cube(Vec x) { return x.cwiseMax(0.0).cwiseMin(1.0); }

inline Vec standard_normal_vector(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> gauss;
  Vec out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = gauss(rng);
  return out;
}

inline Vec uniform_point(Rng& rng, Eigen::Index dim) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec out(dim);
  for (Eigen::Index i = 0; i < dim; ++i) out[i] = unif(rng);
  return out;
}

}  // namespace prb
