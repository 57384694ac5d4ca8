#pragma once

#include <vector>

#include "csilab/types.hpp"

namespace csilab::pilots {

/// Uniform comb pilot allocation with a diagonal antenna-to-comb assignment.
/// The d combs share the stride n_f / m_f and are offset by floor(stride / d)
/// from one another; antenna i uses comb ((i - 1) mod d) + 1.
struct PilotPattern {
  Index n_f = 0;
  Index m_f = 0;
  int d = 1;
  Index stride = 0;
  std::vector<Index> offsets; // one per comb, each in [0, stride)

  double dr_f() const { return static_cast<double>(m_f) / static_cast<double>(n_f); }
};

PilotPattern build_pattern(Index n_f, Index m_f, int d);

/// Subcarrier indices selected by comb j (1-based), ascending.
std::vector<Index> pilot_columns(const PilotPattern& p, int j);

/// Explicit M_f x N_f selection matrix for comb j: one 1 per row.
CMat pilot_matrix(const PilotPattern& p, int j);

/// 1-based comb index used by 1-based antenna i.
int antenna_pattern_index(int i, int d);

/// Downsample an N_b x N_f CSI matrix to N_b x M_f, row i through the comb
/// assigned to antenna i. Pure selection; any observation noise belongs to
/// the channel model upstream.
CMat sample_pilots(const CMat& h, const PilotPattern& p);

/// Subframes needed to sound all n_b antennas when each subframe carries
/// d * ports_per_subframe antenna ports.
long subframes_required(long n_b, int d, int ports_per_subframe = 2);

} // namespace csilab::pilots
