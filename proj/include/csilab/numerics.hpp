#pragma once

#include "csilab/types.hpp"

namespace csilab::numerics {

/// Unitary DFT matrix: F(j,k) = exp(-i 2 pi j k / n) / sqrt(n).
CMat dft_matrix(Index n);

/// First `cols` columns of dft_matrix(n) without forming the full matrix.
CMat dft_columns(Index n, Index cols);

/// Off-diagonal regularization: divides every off-diagonal entry by (1 + delta),
/// leaves the diagonal untouched.
CMat odir(const CMat& a, double delta);

/// Regularized left pseudoinverse (odir(Q^H Q, delta))^{-1} Q^H.
/// With delta = 0 and full-column-rank Q this is the Moore-Penrose pseudoinverse.
/// Throws SingularityError when the regularized Gram matrix has a condition
/// estimate above 1e14.
CMat regularized_pinv(const CMat& q, double delta);

/// Spectral condition estimate of a Hermitian matrix (infinity when the
/// smallest eigenvalue is not strictly positive).
double condition_estimate(const CMat& hermitian);

} // namespace csilab::numerics
