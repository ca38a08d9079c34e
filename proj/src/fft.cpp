#include "joinsketch/fft.hpp"

#include <unsupported/Eigen/FFT>

namespace joinsketch::fft {
namespace {

// Eigen::FFT caches plans per length; one engine per thread keeps the
// transforms callable from concurrent sketches.
Eigen::FFT<double>& engine() {
  thread_local Eigen::FFT<double> e;
  return e;
}

}  // namespace

MatrixXcd forward(const MatrixXd& columns) {
  const Index n = columns.rows();
  MatrixXcd out(n, columns.cols());
  if (n == 0) return out;
  // Eigen's kissfft backend does not handle length 1, where the transform is the identity.
  if (n == 1) return columns.cast<std::complex<double>>();
  Eigen::VectorXcd in(n), res(n);
  for (Index c = 0; c < columns.cols(); ++c) {
    in = columns.col(c).cast<std::complex<double>>();
    engine().fwd(res, in);
    out.col(c) = res;
  }
  return out;
}

MatrixXd inverse(const MatrixXcd& spectra) {
  const Index n = spectra.rows();
  MatrixXd out(n, spectra.cols());
  if (n == 0) return out;
  if (n == 1) return spectra.real();
  Eigen::VectorXcd in(n), res(n);
  for (Index c = 0; c < spectra.cols(); ++c) {
    in = spectra.col(c);
    engine().inv(res, in);
    out.col(c) = res.real();
  }
  return out;
}

VectorXd circular_convolve(const VectorXd& a, const VectorXd& b) {
  require_dims(a.size() == b.size(), "circular_convolve: length mismatch");
  MatrixXcd fa = forward(a);
  const MatrixXcd fb = forward(b);
  fa.array() *= fb.array();
  return inverse(fa).col(0);
}

}  // namespace joinsketch::fft
