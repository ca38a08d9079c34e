#pragma once

#include "joinsketch/types.hpp"

namespace joinsketch::fft {

/// Column-wise discrete Fourier transform of a real matrix (length = rows).
MatrixXcd forward(const MatrixXd& columns);

/// Inverse of forward(); returns the real part, scaled by 1/rows.
MatrixXd inverse(const MatrixXcd& spectra);

/// Cyclic convolution of two equal-length sequences.
VectorXd circular_convolve(const VectorXd& a, const VectorXd& b);

}  // namespace joinsketch::fft
