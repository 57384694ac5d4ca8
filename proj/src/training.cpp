#include "csilab/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "csilab/autodiff.hpp"

namespace csilab::training {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("train: learning_rate must be non-negative");
  if (sym_weight < 0.0) throw ConfigError("train: sym_weight must be non-negative");
}

void write_history_csv(const History& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "epoch,train_mse,val_mse,l_sym\n";
  char buf[160];
  for (const EpochStats& e : h) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g\n", e.epoch, e.train_mse, e.val_mse,
                  e.l_sym);
    out << buf;
  }
}

std::vector<ParamView> param_views(cs::IstaModel& m) {
  std::vector<ParamView> v;
  v.reserve(m.blocks.size() * 6);
  for (cs::IstaBlock& b : m.blocks) {
    v.push_back({&b.rho, 1});
    v.push_back({&b.theta_raw, 1});
    v.push_back({b.lift.data(), b.lift.size()});
    v.push_back({b.transform.data(), b.transform.size()});
    v.push_back({b.transform_inv.data(), b.transform_inv.size()});
    v.push_back({b.project.data(), b.project.size()});
  }
  return v;
}

std::vector<ParamView> param_views(DenseAutoencoder& ae) {
  return {{ae.w1.data(), ae.w1.size()}, {ae.b1.data(), ae.b1.size()},
          {ae.w2.data(), ae.w2.size()}, {ae.b2.data(), ae.b2.size()},
          {ae.w3.data(), ae.w3.size()}, {ae.b3.data(), ae.b3.size()}};
}

Index param_count(const std::vector<ParamView>& views) {
  Index n = 0;
  for (const ParamView& v : views) n += v.size;
  return n;
}

double param_get(const std::vector<ParamView>& views, Index flat) {
  for (const ParamView& v : views) {
    if (flat < v.size) return v.data[flat];
    flat -= v.size;
  }
  throw IndexError("param_get: flat index out of range");
}

void param_set(const std::vector<ParamView>& views, Index flat, double value) {
  for (const ParamView& v : views) {
    if (flat < v.size) {
      v.data[flat] = value;
      return;
    }
    flat -= v.size;
  }
  throw IndexError("param_set: flat index out of range");
}

DenseAutoencoder DenseAutoencoder::create(const AeConfig& cfg) {
  if (cfg.n_total < 1) throw ConfigError("DenseAutoencoder: n_total must be >= 1");
  if (!(cfg.cr > 0.0 && cfg.cr <= 1.0)) throw ConfigError("DenseAutoencoder: cr must be in (0, 1]");
  const Index m = static_cast<Index>(std::llround(cfg.cr * static_cast<double>(cfg.n_total)));
  if (m < 1) throw ConfigError("DenseAutoencoder: round(n_total * cr) must be >= 1");
  const Index h = cfg.resolved_hidden();

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto init = [&](Index rows, Index cols) {
    RMat w(rows, cols);
    const double s = 1.0 / std::sqrt(static_cast<double>(cols));
    for (Index c = 0; c < cols; ++c)
      for (Index r = 0; r < rows; ++r) w(r, c) = gauss(rng) * s;
    return w;
  };

  DenseAutoencoder ae;
  ae.cfg = cfg;
  ae.w1 = init(m, cfg.n_total);
  ae.b1 = RVec::Zero(m);
  ae.w2 = init(h, m);
  ae.b2 = RVec::Zero(h);
  ae.w3 = init(cfg.n_total, h);
  ae.b3 = RVec::Zero(cfg.n_total);
  return ae;
}

RMat ae_forward(const DenseAutoencoder& ae, const RMat& x_batch) {
  if (x_batch.rows() != ae.cfg.n_total)
    throw DimensionError("ae_forward: input rows must equal n_total");
  const RMat z1 = ((ae.w1 * x_batch).colwise() + ae.b1).array().tanh();
  const RMat z2 = ((ae.w2 * z1).colwise() + ae.b2).array().tanh();
  return (ae.w3 * z2).colwise() + ae.b3;
}

RVec ae_forward(const DenseAutoencoder& ae, const RVec& x) {
  return ae_forward(ae, RMat(x)).col(0);
}

namespace {

double loss_scale(Index n_total, Index batch) {
  return 1.0 / (static_cast<double>(n_total) * static_cast<double>(batch));
}

struct IstaGraph {
  int loss = -1;
  int mse = -1;
  int sym = -1;
  // leaf ids per block in param_views order
  std::vector<std::array<int, 6>> block_leaves;
};

IstaGraph build_ista_graph(ad::Tape& t, const cs::IstaModel& m, const RMat& y_batch,
                           const RMat& target_batch, double sym_weight) {
  const Index batch = y_batch.cols();
  IstaGraph g;

  const int y = t.leaf(y_batch);
  const int target = t.leaf(target_batch);
  const int phi = t.leaf(m.phi);
  const int phi_t = t.leaf(m.phi.transpose());

  int x = t.leaf(m.q_init * y_batch);
  int sym_acc = -1;
  for (const cs::IstaBlock& b : m.blocks) {
    const int rho = t.leaf((RMat(1, 1) << b.rho).finished());
    const int theta_raw = t.leaf((RMat(1, 1) << b.theta_raw).finished());
    const int lift_w = t.leaf(b.lift);
    const int trans_w = t.leaf(b.transform);
    const int trans_inv_w = t.leaf(b.transform_inv);
    const int proj_w = t.leaf(b.project);
    g.block_leaves.push_back({rho, theta_raw, lift_w, trans_w, trans_inv_w, proj_w});

    const int r = t.sub(x, t.scale(rho, t.matmul(phi_t, t.sub(t.matmul(phi, x), y))));
    const int lifted = t.matmul(lift_w, r);
    const int h = t.matmul(trans_w, lifted);
    const int theta = t.softplus(theta_raw);
    const int s = t.soft_threshold(h, theta);
    x = t.add(r, t.matmul(proj_w, t.matmul(trans_inv_w, s)));

    // round-trip defect of the transform pair on the lifted intermediate
    const int defect = t.sum_squares(t.sub(t.matmul(trans_inv_w, h), lifted));
    sym_acc = (sym_acc < 0) ? defect : t.add(sym_acc, defect);
  }

  const double scale = loss_scale(m.cfg.n_total, batch);
  g.mse = t.mul_const(t.sum_squares(t.sub(x, target)), scale);
  g.sym = t.mul_const(sym_acc, scale);
  g.loss = t.add(g.mse, t.mul_const(g.sym, sym_weight));
  return g;
}

struct AeGraph {
  int loss = -1;
  std::array<int, 6> leaves{};
};

AeGraph build_ae_graph(ad::Tape& t, const DenseAutoencoder& ae, const RMat& x_batch,
                       const RMat& target_batch) {
  AeGraph g;
  const int x = t.leaf(x_batch);
  const int target = t.leaf(target_batch);
  const int w1 = t.leaf(ae.w1);
  const int b1 = t.leaf(ae.b1);
  const int w2 = t.leaf(ae.w2);
  const int b2 = t.leaf(ae.b2);
  const int w3 = t.leaf(ae.w3);
  const int b3 = t.leaf(ae.b3);
  g.leaves = {w1, b1, w2, b2, w3, b3};

  const int z1 = t.tanh(t.add_col_broadcast(t.matmul(w1, x), b1));
  const int z2 = t.tanh(t.add_col_broadcast(t.matmul(w2, z1), b2));
  const int xh = t.add_col_broadcast(t.matmul(w3, z2), b3);
  g.loss = t.mul_const(t.sum_squares(t.sub(xh, target)),
                       loss_scale(ae.cfg.n_total, x_batch.cols()));
  return g;
}

void collect_grad(const ad::Tape& t, const std::vector<int>& leaf_order, RVec& grad) {
  Index off = 0;
  for (int id : leaf_order) {
    const RMat& g = t.grad(id);
    std::copy(g.data(), g.data() + g.size(), grad.data() + off);
    off += g.size();
  }
}

} // namespace

LossResult loss_total(const cs::IstaModel& m, const RMat& y_batch, const RMat& target_batch,
                      double sym_weight) {
  if (y_batch.cols() < 1) throw DegenerateInputError("loss_total: empty batch");
  if (target_batch.rows() != m.cfg.n_total || target_batch.cols() != y_batch.cols())
    throw DimensionError("loss_total: target shape mismatch");
  ad::Tape t;
  const IstaGraph g = build_ista_graph(t, m, y_batch, target_batch, sym_weight);
  t.backward(g.loss);

  LossResult res;
  res.total = t.value(g.loss)(0, 0);
  res.mse = t.value(g.mse)(0, 0);
  res.sym = t.value(g.sym)(0, 0);
  std::vector<int> order;
  for (const auto& leaves : g.block_leaves)
    for (int id : leaves) order.push_back(id);
  res.grad.resize(param_count(param_views(const_cast<cs::IstaModel&>(m))));
  collect_grad(t, order, res.grad);
  return res;
}

LossResult loss_total(const DenseAutoencoder& ae, const RMat& x_batch, const RMat& target_batch) {
  if (x_batch.cols() < 1) throw DegenerateInputError("loss_total: empty batch");
  if (target_batch.rows() != ae.cfg.n_total || target_batch.cols() != x_batch.cols())
    throw DimensionError("loss_total: target shape mismatch");
  ad::Tape t;
  const AeGraph g = build_ae_graph(t, ae, x_batch, target_batch);
  t.backward(g.loss);

  LossResult res;
  res.total = res.mse = t.value(g.loss)(0, 0);
  res.sym = 0.0;
  std::vector<int> order(g.leaves.begin(), g.leaves.end());
  res.grad.resize(param_count(param_views(const_cast<DenseAutoencoder&>(ae))));
  collect_grad(t, order, res.grad);
  return res;
}

double mse_value(const cs::IstaModel& m, const RMat& y_batch, const RMat& target_batch) {
  const cs::IstaTrace tr = cs::ista_forward(m, y_batch);
  return (tr.xk() - target_batch).squaredNorm() * loss_scale(m.cfg.n_total, y_batch.cols());
}

double loss_value(const cs::IstaModel& m, const RMat& y_batch, const RMat& target_batch,
                  double sym_weight) {
  const cs::IstaTrace tr = cs::ista_forward(m, y_batch);
  double sym = 0.0;
  for (std::size_t k = 0; k < m.blocks.size(); ++k) {
    const cs::IstaBlock& b = m.blocks[k];
    sym += (b.transform_inv * (b.transform * tr.lifted[k]) - tr.lifted[k]).squaredNorm();
  }
  const double scale = loss_scale(m.cfg.n_total, y_batch.cols());
  return (tr.xk() - target_batch).squaredNorm() * scale + sym_weight * sym * scale;
}

double mse_value(const DenseAutoencoder& ae, const RMat& x_batch, const RMat& target_batch) {
  return (ae_forward(ae, x_batch) - target_batch).squaredNorm() *
         loss_scale(ae.cfg.n_total, x_batch.cols());
}

double loss_value(const DenseAutoencoder& ae, const RMat& x_batch, const RMat& target_batch) {
  return mse_value(ae, x_batch, target_batch);
}

Adam::Adam(Index n, double learning_rate)
    : lr_(learning_rate), m_(RVec::Zero(n)), v_(RVec::Zero(n)) {}

void Adam::step(const std::vector<ParamView>& views, const RVec& grad) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  Index off = 0;
  for (const ParamView& v : views) {
    for (Index i = 0; i < v.size; ++i, ++off) {
      const double g = grad(off);
      m_(off) = b1 * m_(off) + (1.0 - b1) * g;
      v_(off) = b2 * v_(off) + (1.0 - b2) * g * g;
      const double mhat = m_(off) / c1;
      const double vhat = v_(off) / c2;
      v.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

namespace {

// Shared mini-batch loop; step(order, start, count) must update the model
// parameters and return (mse, sym) for the batch.
template <typename BatchStep, typename ValMse>
History train_loop(Index n_samples, const TrainConfig& cfg, BatchStep step, ValMse val_mse) {
  cfg.validate();
  History history;
  history.reserve(cfg.epochs);
  std::vector<Index> order(n_samples);
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double mse_acc = 0.0, sym_acc = 0.0;
    int batches = 0;
    for (Index start = 0; start < n_samples; start += cfg.batch_size) {
      const Index count = std::min<Index>(cfg.batch_size, n_samples - start);
      const auto [mse, sym] = step(order, start, count);
      if (!std::isfinite(mse))
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                              ", batch " + std::to_string(batches + 1));
      mse_acc += mse;
      sym_acc += sym;
      ++batches;
    }
    EpochStats s;
    s.epoch = epoch + 1;
    s.train_mse = mse_acc / batches;
    s.l_sym = sym_acc / batches;
    s.val_mse = val_mse();
    history.push_back(s);
  }
  return history;
}

RMat gather_cols(const RMat& src, const std::vector<Index>& order, Index start, Index count) {
  RMat out(src.rows(), count);
  for (Index i = 0; i < count; ++i) out.col(i) = src.col(order[start + i]);
  return out;
}

} // namespace

History train(cs::IstaModel& m, const RMat& inputs, const RMat& targets, const RMat& val_inputs,
              const RMat& val_targets, const TrainConfig& cfg) {
  if (inputs.rows() != m.cfg.n_total)
    throw DimensionError("train: input rows must equal model n_total");
  if (targets.rows() != inputs.rows() || targets.cols() != inputs.cols())
    throw DimensionError("train: targets must match inputs");
  if (m.q_init.isZero(0.0)) m.fit_initializer(inputs);

  const RMat y_all = m.phi * inputs;
  const RMat y_val = val_inputs.cols() > 0 ? RMat(m.phi * val_inputs) : RMat();
  auto views = param_views(m);
  Adam adam(param_count(views), cfg.learning_rate);

  auto step = [&](const std::vector<Index>& order, Index start, Index count) {
    const RMat yb = gather_cols(y_all, order, start, count);
    const RMat tb = gather_cols(targets, order, start, count);
    const LossResult lr = loss_total(m, yb, tb, cfg.sym_weight);
    adam.step(views, lr.grad);
    return std::pair<double, double>(lr.mse, lr.sym);
  };
  auto val = [&]() {
    if (y_val.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
    return mse_value(m, y_val, val_targets);
  };
  return train_loop(inputs.cols(), cfg, step, val);
}

History train(DenseAutoencoder& ae, const RMat& inputs, const RMat& targets,
              const RMat& val_inputs, const RMat& val_targets, const TrainConfig& cfg) {
  if (inputs.rows() != ae.cfg.n_total)
    throw DimensionError("train: input rows must equal model n_total");
  if (targets.rows() != inputs.rows() || targets.cols() != inputs.cols())
    throw DimensionError("train: targets must match inputs");
  auto views = param_views(ae);
  Adam adam(param_count(views), cfg.learning_rate);

  auto step = [&](const std::vector<Index>& order, Index start, Index count) {
    const RMat xb = gather_cols(inputs, order, start, count);
    const RMat tb = gather_cols(targets, order, start, count);
    const LossResult lr = loss_total(ae, xb, tb);
    adam.step(views, lr.grad);
    return std::pair<double, double>(lr.mse, 0.0);
  };
  auto val = [&]() {
    if (val_inputs.cols() == 0) return std::numeric_limits<double>::quiet_NaN();
    return mse_value(ae, val_inputs, val_targets);
  };
  return train_loop(inputs.cols(), cfg, step, val);
}

namespace {

template <typename LossFn>
double probe_params(const std::vector<ParamView>& views, const RVec& analytic, LossFn loss,
                    int n_probes, std::uint64_t seed) {
  if (n_probes < 1) throw ParameterError("grad_check: n_probes must be >= 1");
  const Index total = param_count(views);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick(0, total - 1);
  constexpr double h = 1e-6;
  double worst = 0.0;
  for (int p = 0; p < n_probes; ++p) {
    const Index idx = pick(rng);
    const double orig = param_get(views, idx);
    param_set(views, idx, orig + h);
    const double lp = loss();
    param_set(views, idx, orig - h);
    const double lm = loss();
    param_set(views, idx, orig);
    const double fd = (lp - lm) / (2.0 * h);
    const double a = analytic(idx);
    const double rel = std::abs(fd - a) / std::max({1.0, std::abs(fd), std::abs(a)});
    worst = std::max(worst, rel);
  }
  return worst;
}

} // namespace

double grad_check(cs::IstaModel& m, const RMat& y_batch, const RMat& target_batch,
                  double sym_weight, int n_probes, std::uint64_t seed) {
  const LossResult base = loss_total(m, y_batch, target_batch, sym_weight);
  auto views = param_views(m);
  return probe_params(views, base.grad,
                      [&]() { return loss_value(m, y_batch, target_batch, sym_weight); },
                      n_probes, seed);
}

double grad_check(DenseAutoencoder& ae, const RMat& x_batch, const RMat& target_batch,
                  int n_probes, std::uint64_t seed) {
  const LossResult base = loss_total(ae, x_batch, target_batch);
  auto views = param_views(ae);
  return probe_params(views, base.grad, [&]() { return loss_value(ae, x_batch, target_batch); },
                      n_probes, seed);
}

} // namespace csilab::training
