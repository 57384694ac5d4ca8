#include "csilab/metrics.hpp"

namespace csilab::metrics {

std::pair<RVec, double> spherical_normalize(const RVec& x) {
  const double norm = x.norm();
  if (!(norm > 0.0)) throw DegenerateInputError("spherical_normalize: zero vector");
  return {x / norm, norm};
}

RVec spherical_denormalize(const RVec& unit, double norm) {
  return unit * norm;
}

} // namespace csilab::metrics
