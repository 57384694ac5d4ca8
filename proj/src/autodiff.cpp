#include "csilab/autodiff.hpp"

#include <cmath>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace csilab::ad {

namespace {

#ifdef __GLIBC__
// Tape batches churn through ~100 KB matrix temporaries per node; with the
// default glibc threshold those allocations round-trip through mmap/munmap
// and page faults dominate the backward pass.
const bool kMallocTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
  return true;
}();
#endif

double softplus_scalar(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace

int Tape::push(RMat value, std::function<void(Tape&, int)> pull) {
  nodes_.push_back(Node{std::move(value), std::move(pull)});
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw IndexError("tape: node id out of range");
}

int Tape::leaf(RMat value) { return push(std::move(value), nullptr); }

int Tape::matmul(int a, int b) {
  check(a);
  check(b);
  if (nodes_[a].value.cols() != nodes_[b].value.rows())
    throw DimensionError("tape matmul: inner dimensions differ");
  RMat v = nodes_[a].value * nodes_[b].value;
  return push(std::move(v), [a, b](Tape& t, int id) {
    const RMat& g = t.grads_[id];
    t.grads_[a].noalias() += g * t.nodes_[b].value.transpose();
    t.grads_[b].noalias() += t.nodes_[a].value.transpose() * g;
  });
}

int Tape::add(int a, int b) {
  check(a);
  check(b);
  if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
      nodes_[a].value.cols() != nodes_[b].value.cols())
    throw DimensionError("tape add: shape mismatch");
  RMat v = nodes_[a].value + nodes_[b].value;
  return push(std::move(v), [a, b](Tape& t, int id) {
    t.grads_[a] += t.grads_[id];
    t.grads_[b] += t.grads_[id];
  });
}

int Tape::sub(int a, int b) {
  check(a);
  check(b);
  if (nodes_[a].value.rows() != nodes_[b].value.rows() ||
      nodes_[a].value.cols() != nodes_[b].value.cols())
    throw DimensionError("tape sub: shape mismatch");
  RMat v = nodes_[a].value - nodes_[b].value;
  return push(std::move(v), [a, b](Tape& t, int id) {
    t.grads_[a] += t.grads_[id];
    t.grads_[b] -= t.grads_[id];
  });
}

int Tape::mul_const(int x, double c) {
  check(x);
  RMat v = c * nodes_[x].value;
  return push(std::move(v), [x, c](Tape& t, int id) { t.grads_[x] += c * t.grads_[id]; });
}

int Tape::scale(int s, int x) {
  check(s);
  check(x);
  if (nodes_[s].value.size() != 1) throw DimensionError("tape scale: scalar node must be 1x1");
  RMat v = nodes_[s].value(0, 0) * nodes_[x].value;
  return push(std::move(v), [s, x](Tape& t, int id) {
    const RMat& g = t.grads_[id];
    t.grads_[x] += t.nodes_[s].value(0, 0) * g;
    t.grads_[s](0, 0) += (g.array() * t.nodes_[x].value.array()).sum();
  });
}

int Tape::add_col_broadcast(int x, int b) {
  check(x);
  check(b);
  if (nodes_[b].value.cols() != 1 || nodes_[b].value.rows() != nodes_[x].value.rows())
    throw DimensionError("tape add_col_broadcast: bias must be a matching column vector");
  RMat v = nodes_[x].value.colwise() + Eigen::VectorXd(nodes_[b].value.col(0));
  return push(std::move(v), [x, b](Tape& t, int id) {
    const RMat& g = t.grads_[id];
    t.grads_[x] += g;
    t.grads_[b].col(0) += g.rowwise().sum();
  });
}

int Tape::soft_threshold(int x, int theta) {
  check(x);
  check(theta);
  if (nodes_[theta].value.size() != 1)
    throw DimensionError("tape soft_threshold: threshold node must be 1x1");
  const double th = nodes_[theta].value(0, 0);
  if (th < 0.0) throw ParameterError("tape soft_threshold: threshold must be non-negative");
  RMat v = nodes_[x].value.array().sign() * (nodes_[x].value.array().abs() - th).max(0.0);
  return push(std::move(v), [x, theta](Tape& t, int id) {
    const RMat& g = t.grads_[id];
    const auto& xv = t.nodes_[x].value.array();
    const double th2 = t.nodes_[theta].value(0, 0);
    const auto mask = (xv.abs() > th2).cast<double>();
    t.grads_[x].array() += g.array() * mask;
    t.grads_[theta](0, 0) += (-(xv.sign()) * mask * g.array()).sum();
  });
}

int Tape::softplus(int x) {
  check(x);
  RMat v = nodes_[x].value.unaryExpr([](double a) { return softplus_scalar(a); });
  return push(std::move(v), [x](Tape& t, int id) {
    const RMat& g = t.grads_[id];
    t.grads_[x].array() +=
        g.array() * t.nodes_[x].value.unaryExpr([](double a) { return sigmoid_scalar(a); }).array();
  });
}

int Tape::tanh(int x) {
  check(x);
  RMat v = nodes_[x].value.array().tanh();
  return push(std::move(v), [x](Tape& t, int id) {
    const RMat& g = t.grads_[id];
    t.grads_[x].array() += g.array() * (1.0 - t.nodes_[id].value.array().square());
  });
}

int Tape::sum_squares(int x) {
  check(x);
  RMat v(1, 1);
  v(0, 0) = nodes_[x].value.squaredNorm();
  return push(std::move(v), [x](Tape& t, int id) {
    t.grads_[x] += 2.0 * t.grads_[id](0, 0) * t.nodes_[x].value;
  });
}

void Tape::backward(int root) {
  check(root);
  if (nodes_[root].value.size() != 1)
    throw DimensionError("tape backward: root must be a 1x1 scalar node");
  grads_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    grads_[i] = RMat::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
  grads_[root](0, 0) = 1.0;
  for (int id = root; id >= 0; --id)
    if (nodes_[id].pull) nodes_[id].pull(*this, id);
}

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
}

} // namespace csilab::ad
