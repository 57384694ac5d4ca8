#include "csilab/p2d.hpp"

#include <iostream>

#include "csilab/numerics.hpp"

namespace csilab::p2d {

P2dEstimator build_estimator(const pilots::PilotPattern& pattern, Index n_t, double delta) {
  if (n_t < 1 || n_t > pattern.n_f)
    throw DimensionError("build_estimator: n_t must be in [1, n_f]");
  if (delta < 0.0) throw ParameterError("build_estimator: delta must be non-negative");

  P2dEstimator e;
  e.pattern = pattern;
  e.n_t = n_t;
  e.delta = delta;
  if (pattern.m_f < n_t) {
    const std::string w = "build_estimator: underdetermined system (m_f = " +
                          std::to_string(pattern.m_f) + " < n_t = " + std::to_string(n_t) + ")";
    e.warnings.push_back(w);
    std::cerr << "warning: " << w << "\n";
  }

  // Q_j = P_j * F_{N_f} truncated to the first n_t columns: with one-hot
  // selection rows this is just a row gather of the DFT matrix.
  const CMat fcols = numerics::dft_columns(pattern.n_f, n_t);
  e.operators.reserve(pattern.d);
  for (int j = 1; j <= pattern.d; ++j) {
    const auto cols = pilots::pilot_columns(pattern, j);
    CMat q(pattern.m_f, n_t);
    for (Index r = 0; r < pattern.m_f; ++r) q.row(r) = fcols.row(cols[r]);
    try {
      e.operators.push_back(numerics::regularized_pinv(q, delta));
    } catch (const SingularityError& err) {
      throw SingularityError("build_estimator: comb " + std::to_string(j) + ": " + err.what());
    }
  }
  return e;
}

CMat estimate(const CMat& h_bar, const P2dEstimator& e) {
  const auto& p = e.pattern;
  if (h_bar.cols() != p.m_f)
    throw DimensionError("estimate: observation has " + std::to_string(h_bar.cols()) +
                         " columns, estimator expects " + std::to_string(p.m_f));

  CMat spatial_delay(h_bar.rows(), e.n_t);
  // Antennas sharing a comb are solved in one product per comb.
  for (int j = 1; j <= p.d; ++j) {
    std::vector<Index> rows;
    for (Index i = 0; i < h_bar.rows(); ++i)
      if (pilots::antenna_pattern_index(static_cast<int>(i) + 1, p.d) == j) rows.push_back(i);
    if (rows.empty()) continue;
    CMat group(rows.size(), p.m_f);
    for (std::size_t k = 0; k < rows.size(); ++k) group.row(k) = h_bar.row(rows[k]);
    const CMat solved = (e.operators[j - 1] * group.transpose()).transpose();
    for (std::size_t k = 0; k < rows.size(); ++k) spatial_delay.row(rows[k]) = solved.row(k);
  }
  const CMat fb = numerics::dft_matrix(h_bar.rows());
  return fb * spatial_delay;
}

} // namespace csilab::p2d
