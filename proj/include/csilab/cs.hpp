#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csilab/types.hpp"

namespace csilab::cs {

/// Elementwise sign(x) * max(|x| - theta, 0).
RVec soft_threshold(const RVec& x, double theta);
RMat soft_threshold(const RMat& x, double theta);

/// Gaussian measurement matrix of shape round(n_total * cr) x n_total with
/// rows orthonormalized, so phi * phi^T = I.
RMat init_measurement(Index n_total, double cr, std::uint64_t seed);

/// Least-squares initializer: the minimizer of ||X - Q Y||_F, i.e.
/// X Y^T (Y Y^T)^{-1}. A rank-deficient Y Y^T gets a ridge of
/// 1e-10 * trace / m with a warning; if that still fails, throws
/// SingularityError.
RMat fit_qinit(const RMat& x, const RMat& y, std::vector<std::string>* warnings = nullptr);

/// One unrolled block: gradient step scaled by rho, then a residual
/// correction project(inv_transform(soft(transform(lift(r)), theta))).
/// The threshold is stored as a softplus pre-image so it can never go
/// negative during training.
struct IstaBlock {
  double rho = 0.5;
  double theta_raw = 0.0;
  RMat lift;           // hidden x n_total
  RMat transform;      // hidden x hidden
  RMat transform_inv;  // hidden x hidden, trained toward transform^{-1}
  RMat project;        // n_total x hidden

  double theta() const;
};

struct IstaConfig {
  Index n_total = 0;
  double cr = 0.25;
  int k = 9;             // number of unrolled blocks
  Index hidden = 0;      // 0 -> min(n_total, 256)
  double rho_init = 0.5;
  double theta_init = 0.01;
  double init_noise = 0.01;
  // projection starts at project_scale * lift^T: a small negative value makes
  // every block begin as a mild shrinkage toward the thresholded residual
  double project_scale = -0.1;
  std::uint64_t seed = 0;

  Index resolved_hidden() const { return hidden > 0 ? hidden : std::min<Index>(n_total, 256); }
};

struct IstaModel {
  IstaConfig cfg;
  RMat phi;     // m x n_total, fixed after construction
  RMat q_init;  // n_total x m, fixed after fit_initializer
  std::vector<IstaBlock> blocks;

  static IstaModel create(const IstaConfig& cfg);

  Index m() const { return phi.rows(); }
  Index n_total() const { return cfg.n_total; }

  /// Fits q_init by least squares on the given data columns (measurements
  /// are phi * x).
  void fit_initializer(const RMat& x_train, std::vector<std::string>* warnings = nullptr);

  RMat encode(const RMat& x) const { return phi * x; }
};

/// Forward-pass record: x0 plus per-block r, lifted = lift(r) and the block
/// output x. Training and the symmetry loss replay these intermediates.
struct IstaTrace {
  RMat x0;
  std::vector<RMat> r;
  std::vector<RMat> lifted;
  std::vector<RMat> x;

  const RMat& xk() const { return x.empty() ? x0 : x.back(); }
};

/// Runs the K blocks on a batch of measurements (columns). Throws
/// DivergenceError naming the block index if an intermediate goes
/// non-finite.
IstaTrace ista_forward(const IstaModel& m, const RMat& y_batch);
RVec ista_reconstruct(const IstaModel& m, const RVec& y);

} // namespace csilab::cs
