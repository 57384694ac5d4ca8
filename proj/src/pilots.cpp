#include "csilab/pilots.hpp"

#include <string>

namespace csilab::pilots {

PilotPattern build_pattern(Index n_f, Index m_f, int d) {
  if (n_f < 1 || m_f < 1) throw ConfigError("build_pattern: n_f and m_f must be >= 1");
  if (n_f % m_f != 0)
    throw ConfigError("build_pattern: m_f = " + std::to_string(m_f) +
                      " does not divide n_f = " + std::to_string(n_f));
  const Index stride = n_f / m_f;
  if (d < 1) throw ConfigError("build_pattern: d must be >= 1");
  if (d > stride)
    throw ConfigError("build_pattern: d = " + std::to_string(d) +
                      " exceeds the comb stride " + std::to_string(stride));
  PilotPattern p;
  p.n_f = n_f;
  p.m_f = m_f;
  p.d = d;
  p.stride = stride;
  const Index spacing = stride / d;
  p.offsets.reserve(d);
  for (int j = 0; j < d; ++j) p.offsets.push_back(j * spacing);
  return p;
}

std::vector<Index> pilot_columns(const PilotPattern& p, int j) {
  if (j < 1 || j > p.d) throw IndexError("pilot_columns: j must be in [1, d]");
  std::vector<Index> cols(p.m_f);
  const Index off = p.offsets[j - 1];
  for (Index r = 0; r < p.m_f; ++r) cols[r] = off + r * p.stride;
  return cols;
}

CMat pilot_matrix(const PilotPattern& p, int j) {
  const auto cols = pilot_columns(p, j);
  CMat mat = CMat::Zero(p.m_f, p.n_f);
  for (Index r = 0; r < p.m_f; ++r) mat(r, cols[r]) = 1.0;
  return mat;
}

int antenna_pattern_index(int i, int d) {
  if (i < 1) throw IndexError("antenna_pattern_index: antenna index must be >= 1");
  if (d < 1) throw ParameterError("antenna_pattern_index: d must be >= 1");
  return ((i - 1) % d) + 1;
}

CMat sample_pilots(const CMat& h, const PilotPattern& p) {
  if (h.cols() != p.n_f)
    throw DimensionError("sample_pilots: matrix has " + std::to_string(h.cols()) +
                         " columns, pattern expects " + std::to_string(p.n_f));
  CMat out(h.rows(), p.m_f);
  for (Index i = 0; i < h.rows(); ++i) {
    const int j = antenna_pattern_index(static_cast<int>(i) + 1, p.d);
    const Index off = p.offsets[j - 1];
    for (Index r = 0; r < p.m_f; ++r) out(i, r) = h(i, off + r * p.stride);
  }
  return out;
}

long subframes_required(long n_b, int d, int ports_per_subframe) {
  if (n_b < 1 || d < 1 || ports_per_subframe < 1)
    throw ConfigError("subframes_required: all arguments must be >= 1");
  const long ports = static_cast<long>(d) * ports_per_subframe;
  if (n_b % ports != 0)
    throw ConfigError("subframes_required: d * ports_per_subframe = " + std::to_string(ports) +
                      " does not divide n_b = " + std::to_string(n_b));
  return n_b / ports;
}

} // namespace csilab::pilots
