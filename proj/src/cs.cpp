#include "csilab/cs.hpp"

#include <cmath>
#include <iostream>
#include <random>

namespace csilab::cs {

namespace {

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inv(double y) {
  if (!(y > 0.0)) throw ParameterError("softplus_inv: value must be positive");
  return std::log(std::expm1(y));
}

RMat gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  RMat m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = gauss(rng) * scale;
  return m;
}

// Rows orthonormalized via QR of the transpose.
RMat row_orthonormal(Index rows, Index cols, std::mt19937_64& rng) {
  RMat g = gaussian_matrix(cols, rows, rng, 1.0); // cols >= rows here
  Eigen::HouseholderQR<RMat> qr(g);
  RMat thin_q = qr.householderQ() * RMat::Identity(cols, rows);
  return thin_q.transpose();
}

} // namespace

RVec soft_threshold(const RVec& x, double theta) {
  if (theta < 0.0) throw ParameterError("soft_threshold: theta must be non-negative");
  return x.array().sign() * (x.array().abs() - theta).max(0.0);
}

RMat soft_threshold(const RMat& x, double theta) {
  if (theta < 0.0) throw ParameterError("soft_threshold: theta must be non-negative");
  return x.array().sign() * (x.array().abs() - theta).max(0.0);
}

RMat init_measurement(Index n_total, double cr, std::uint64_t seed) {
  if (n_total < 1) throw ConfigError("init_measurement: n_total must be >= 1");
  if (!(cr > 0.0 && cr <= 1.0)) throw ConfigError("init_measurement: cr must be in (0, 1]");
  const Index m = static_cast<Index>(std::llround(cr * static_cast<double>(n_total)));
  if (m < 1) throw ConfigError("init_measurement: round(n_total * cr) must be >= 1");
  std::mt19937_64 rng(seed);
  return row_orthonormal(m, n_total, rng);
}

RMat fit_qinit(const RMat& x, const RMat& y, std::vector<std::string>* warnings) {
  if (x.cols() != y.cols())
    throw DimensionError("fit_qinit: X and Y must have the same number of columns");
  if (x.cols() < 1) throw DegenerateInputError("fit_qinit: empty data");
  const Index m = y.rows();
  RMat gram = y * y.transpose();
  const RMat xyt = x * y.transpose();

  Eigen::SelfAdjointEigenSolver<RMat> es(gram, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e14) {
    const double ridge = 1e-10 * gram.trace() / static_cast<double>(m);
    const std::string w = "fit_qinit: rank-deficient Y Y^T, adding ridge " + std::to_string(ridge);
    if (warnings) warnings->push_back(w);
    std::cerr << "warning: " << w << "\n";
    gram.diagonal().array() += ridge;
    Eigen::SelfAdjointEigenSolver<RMat> es2(gram, Eigen::EigenvaluesOnly);
    const double lo2 = es2.eigenvalues().minCoeff();
    if (!(lo2 > 0.0))
      throw SingularityError("fit_qinit: Y Y^T singular even after ridge regularization");
  }
  Eigen::LLT<RMat> llt(gram);
  if (llt.info() != Eigen::Success)
    throw SingularityError("fit_qinit: Cholesky factorization of Y Y^T failed");
  RMat q = llt.solve(xyt.transpose()).transpose();
  require_finite(q, "fit_qinit");
  return q;
}

double IstaBlock::theta() const { return softplus(theta_raw); }

IstaModel IstaModel::create(const IstaConfig& cfg) {
  if (cfg.n_total < 1) throw ConfigError("IstaModel: n_total must be >= 1");
  if (cfg.k < 1) throw ConfigError("IstaModel: k must be >= 1");
  if (cfg.theta_init <= 0.0) throw ConfigError("IstaModel: theta_init must be positive");

  IstaModel model;
  model.cfg = cfg;
  model.phi = init_measurement(cfg.n_total, cfg.cr, derive_seed(cfg.seed, 0));
  model.q_init = RMat::Zero(cfg.n_total, model.phi.rows());

  const Index n = cfg.n_total;
  const Index h = cfg.resolved_hidden();
  model.blocks.resize(cfg.k);
  for (int k = 0; k < cfg.k; ++k) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 1 + k));
    IstaBlock& b = model.blocks[k];
    b.rho = cfg.rho_init;
    b.theta_raw = softplus_inv(cfg.theta_init);
    b.transform = RMat::Identity(h, h);
    b.transform_inv = RMat::Identity(h, h);
    if (h >= 2 * n) {
      // Two copies of the residual at different scales share the one block
      // threshold, so the block starts as a soft-thresholding step:
      //   r - soft(r, theta/c) + soft(r, theta) ~ soft(r, theta).
      const double c = 16.0;
      b.lift = RMat::Zero(h, n);
      b.lift.topRows(n) = c * RMat::Identity(n, n);
      b.lift.middleRows(n, n) = RMat::Identity(n, n);
      b.project = RMat::Zero(n, h);
      b.project.leftCols(n) = -(1.0 / c) * RMat::Identity(n, n);
      b.project.middleCols(n, n) = RMat::Identity(n, n);
    } else {
      // near-isometric lift so the thresholding basis starts well-scaled
      if (h == n) {
        b.lift = RMat::Identity(h, n);
      } else if (h < n) {
        b.lift = row_orthonormal(h, n, rng);
      } else {
        b.lift = row_orthonormal(n, h, rng).transpose();
      }
      b.project = cfg.project_scale * b.lift.transpose();
    }
    if (cfg.init_noise > 0.0) {
      const double s = cfg.init_noise;
      b.lift += gaussian_matrix(h, n, rng, s / std::sqrt(static_cast<double>(n)));
      b.transform += gaussian_matrix(h, h, rng, s / std::sqrt(static_cast<double>(h)));
      b.transform_inv += gaussian_matrix(h, h, rng, s / std::sqrt(static_cast<double>(h)));
      b.project += gaussian_matrix(n, h, rng, s / std::sqrt(static_cast<double>(h)));
    }
  }
  return model;
}

void IstaModel::fit_initializer(const RMat& x_train, std::vector<std::string>* warnings) {
  if (x_train.rows() != cfg.n_total)
    throw DimensionError("fit_initializer: data rows must equal n_total");
  q_init = fit_qinit(x_train, phi * x_train, warnings);
}

IstaTrace ista_forward(const IstaModel& m, const RMat& y_batch) {
  if (y_batch.rows() != m.phi.rows())
    throw DimensionError("ista_forward: measurement length " + std::to_string(y_batch.rows()) +
                         " does not match phi rows " + std::to_string(m.phi.rows()));
  if (m.q_init.rows() != m.cfg.n_total || m.q_init.cols() != m.phi.rows())
    throw DimensionError("ista_forward: initializer shape mismatch");

  IstaTrace tr;
  tr.x0 = m.q_init * y_batch;
  if (!tr.x0.allFinite()) throw DivergenceError("ista_forward: non-finite initializer output");
  tr.r.reserve(m.blocks.size());
  tr.lifted.reserve(m.blocks.size());
  tr.x.reserve(m.blocks.size());

  RMat x = tr.x0;
  for (std::size_t k = 0; k < m.blocks.size(); ++k) {
    const IstaBlock& b = m.blocks[k];
    RMat r = x - b.rho * (m.phi.transpose() * (m.phi * x - y_batch));
    RMat lifted = b.lift * r;
    RMat s = soft_threshold(RMat(b.transform * lifted), b.theta());
    RMat xk = r + b.project * (b.transform_inv * s);
    if (!xk.allFinite())
      throw DivergenceError("ista_forward: non-finite intermediate at block " + std::to_string(k + 1));
    tr.r.push_back(std::move(r));
    tr.lifted.push_back(std::move(lifted));
    tr.x.push_back(std::move(xk));
    x = tr.x.back();
  }
  return tr;
}

RVec ista_reconstruct(const IstaModel& m, const RVec& y) {
  return ista_forward(m, RMat(y)).xk().col(0);
}

} // namespace csilab::cs
