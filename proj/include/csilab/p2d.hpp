#pragma once

#include <string>
#include <vector>

#include "csilab/pilots.hpp"
#include "csilab/types.hpp"

namespace csilab::p2d {

/// Pilots-to-delay estimator: one precomputed regularized pseudoinverse
/// Q_{j,N_t}^+ per comb, mapping M_f pilot observations of one antenna to its
/// first N_t delay taps.
struct P2dEstimator {
  pilots::PilotPattern pattern;
  Index n_t = 0;
  double delta = 0.0;
  std::vector<CMat> operators;        // pattern.d matrices, each n_t x m_f
  std::vector<std::string> warnings;  // e.g. underdetermined m_f < n_t
};

P2dEstimator build_estimator(const pilots::PilotPattern& pattern, Index n_t, double delta);

/// Applies the per-antenna operators to a downsampled N_b x M_f observation
/// and converts the spatial axis to angular via a unitary DFT. Returns the
/// N_b x N_t angular-delay estimate.
CMat estimate(const CMat& h_bar, const P2dEstimator& e);

} // namespace csilab::p2d
