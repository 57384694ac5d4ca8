#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "csilab/types.hpp"

namespace csilab::metrics {

// NMSE is the mean over samples of per-sample normalized squared error,
// reported in dB. Exact matches are clamped to the -300 dB sentinel.
inline constexpr double kNmseFloorDb = -300.0;

template <typename MatLike>
double nmse_db(const std::vector<MatLike>& truth, const std::vector<MatLike>& est) {
  if (truth.empty()) throw DegenerateInputError("nmse_db: empty sample list");
  if (truth.size() != est.size())
    throw DimensionError("nmse_db: truth and estimate lists differ in length");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].rows() != est[i].rows() || truth[i].cols() != est[i].cols())
      throw DimensionError("nmse_db: shape mismatch at sample " + std::to_string(i));
    const double energy = truth[i].squaredNorm();
    if (energy <= 0.0)
      throw DegenerateInputError("nmse_db: zero-energy truth at sample " + std::to_string(i));
    acc += (truth[i] - est[i]).squaredNorm() / energy;
  }
  const double ratio = acc / static_cast<double>(truth.size());
  if (ratio < 1e-30) return kNmseFloorDb;
  return 10.0 * std::log10(ratio);
}

/// Per-sample norm/shape separation: returns (x / ||x||, ||x||).
std::pair<RVec, double> spherical_normalize(const RVec& x);
RVec spherical_denormalize(const RVec& unit, double norm);

} // namespace csilab::metrics
