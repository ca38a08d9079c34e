#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace joinsketch {

using Index = Eigen::Index;

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using RowVectorXd = RowVector<double>;
using MatrixXcd = Matrix<std::complex<double>>;

/// Seed of a random sketch or sampler. Same seed and parameters give the
/// same operator bit for bit.
struct Seed {
  std::uint64_t value = 0;

  constexpr Seed() = default;
  constexpr explicit Seed(std::uint64_t v) : value(v) {}

  /// Independent child seed for a named sub-stream.
  [[nodiscard]] constexpr Seed derive(std::uint64_t stream) const;

  friend constexpr bool operator==(Seed, Seed) = default;
};

// Error categories. The CLI maps each one to its own exit code.

/// Shapes of operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input data (CSV rows, key values, schemas).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration or parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An algorithm could not produce a valid result (cyclic query, empty join,
/// diverging iteration, oracle cap exceeded).
class AlgorithmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

constexpr Seed Seed::derive(std::uint64_t stream) const {
  return Seed{detail::splitmix64(value ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL))};
}

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace joinsketch
