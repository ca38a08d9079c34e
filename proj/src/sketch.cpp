#include "joinsketch/sketch.hpp"

namespace joinsketch {

MatrixXd TensorSketch::block(const MatrixXd& a, const MatrixXd& b, std::span<const Index> ids_a,
                             std::span<const Index> ids_b) const {
  require_dims(factors_ == 2, "TensorSketch::block: operator must have two factors");
  require_dims(a.cols() == b.cols(), "TensorSketch::block: column count mismatch");
  const Index d = a.cols();
  // (A (x) 1)_c sketches to conv(CS_0 A_c, CS_1 1) and (1 (x) B)_c to
  // conv(CS_0 1, CS_1 B_c).
  MatrixXd lhs(k_, d + 1), rhs(k_, d + 1);
  lhs.leftCols(d) = factor_sketch(0, a, ids_a);
  lhs.col(d) = factor_sketch(0, VectorXd::Ones(a.rows()), ids_a);
  rhs.leftCols(d) = factor_sketch(1, b, ids_b);
  rhs.col(d) = factor_sketch(1, VectorXd::Ones(b.rows()), ids_b);
  const MatrixXcd fl = fft::forward(lhs);
  const MatrixXcd fr = fft::forward(rhs);
  MatrixXcd prod(k_, d);
  for (Index c = 0; c < d; ++c)
    prod.col(c) = fl.col(c).cwiseProduct(fr.col(d)) + fl.col(d).cwiseProduct(fr.col(c));
  return fft::inverse(prod);
}

GaussianSketch::GaussianSketch(Index input_dim, Index cols, Seed seed) : g_(input_dim, cols) {
  if (cols <= 0) throw ConfigError("GaussianSketch: column count must be positive");
  Rng rng(seed);
  const double sd = 1.0 / std::sqrt(static_cast<double>(cols));
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < input_dim; ++r) g_(r, c) = sd * rng.normal();
}

VectorXd gaussian_vector(Index d, Seed seed) {
  Rng rng(seed);
  VectorXd g(d);
  for (Index i = 0; i < d; ++i) g(i) = rng.normal();
  return g;
}

}  // namespace joinsketch
