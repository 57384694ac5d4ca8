#pragma once

#include <functional>
#include <vector>

#include "csilab/types.hpp"

namespace csilab::ad {

/// Reverse-mode tape over dense matrix operations. Every operation appends a
/// node, so node creation order is a topological order of the graph;
/// backward() walks nodes in exact reverse order and accumulates gradients
/// additively wherever a node fans out. Scalars are carried as 1x1 matrices.
class Tape {
 public:
  int leaf(RMat value);

  int matmul(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int mul_const(int x, double c);
  /// y = s * X with a 1x1 scalar node s.
  int scale(int s, int x);
  /// Broadcast-add a column vector node b (n x 1) to every column of X.
  int add_col_broadcast(int x, int b);
  /// Elementwise sign(x) * max(|x| - theta, 0) with a 1x1 threshold node.
  int soft_threshold(int x, int theta);
  int softplus(int x);
  int tanh(int x);
  /// 1x1 node holding the squared Frobenius norm of X.
  int sum_squares(int x);

  const RMat& value(int id) const { return nodes_[id].value; }
  /// Valid after backward().
  const RMat& grad(int id) const { return grads_[id]; }

  /// Seeds d(root) = 1 (root must be 1x1) and propagates to every node.
  void backward(int root);

  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    RMat value;
    std::function<void(Tape&, int)> pull; // empty for leaves
  };

  int push(RMat value, std::function<void(Tape&, int)> pull);
  void check(int id) const;

  std::vector<Node> nodes_;
  std::vector<RMat> grads_;
};

} // namespace csilab::ad
