#include "csilab/numerics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace csilab::numerics {

CMat dft_matrix(Index n) {
  if (n < 1) throw DimensionError("dft_matrix: n must be >= 1");
  return dft_columns(n, n);
}

CMat dft_columns(Index n, Index cols) {
  if (n < 1) throw DimensionError("dft_columns: n must be >= 1");
  if (cols < 0 || cols > n) throw DimensionError("dft_columns: cols must be in [0, n]");
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  CMat f(n, cols);
  for (Index j = 0; j < n; ++j) {
    for (Index k = 0; k < cols; ++k) {
      // reduce j*k mod n before converting to an angle to keep the phase accurate
      const long long r = (static_cast<long long>(j) * static_cast<long long>(k)) % n;
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n);
      f(j, k) = std::polar(scale, phase);
    }
  }
  return f;
}

CMat odir(const CMat& a, double delta) {
  if (a.rows() != a.cols()) throw DimensionError("odir: matrix must be square");
  if (delta < 0.0) throw ParameterError("odir: delta must be non-negative");
  CMat out = a / (1.0 + delta);
  out.diagonal() = a.diagonal();
  return out;
}

double condition_estimate(const CMat& hermitian) {
  if (hermitian.rows() != hermitian.cols())
    throw DimensionError("condition_estimate: matrix must be square");
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0) || !std::isfinite(hi)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

CMat regularized_pinv(const CMat& q, double delta) {
  if (q.rows() < 1 || q.cols() < 1) throw DimensionError("regularized_pinv: empty matrix");
  if (delta < 0.0) throw ParameterError("regularized_pinv: delta must be non-negative");
  const CMat gram = q.adjoint() * q;
  const CMat reg = odir(gram, delta);
  const double cond = condition_estimate(reg);
  if (!(cond < 1e14)) {
    throw SingularityError(
        "regularized_pinv: regularized Gram matrix is numerically singular "
        "(condition estimate above 1e14); increase delta to regularize");
  }
  Eigen::LLT<CMat> llt(reg);
  if (llt.info() != Eigen::Success) {
    throw SingularityError(
        "regularized_pinv: Cholesky factorization of the regularized Gram matrix "
        "failed; increase delta to regularize");
  }
  CMat out = llt.solve(q.adjoint());
  require_finite(out, "regularized_pinv");
  return out;
}

} // namespace csilab::numerics
