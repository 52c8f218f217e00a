#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace unimatch {

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Eigen::MatrixXd& value() const;
  double scalar() const { return value()(0, 0); }
  bool requires_grad() const;
};

/// Minimal reverse-mode differentiation over dense matrices.
///
/// Nodes are appended in evaluation order; backward() walks them in reverse
/// and calls each node's pullback with the accumulated output gradient.
/// Nodes that do not depend on a trainable leaf are never visited.
class Tape {
 public:
  /// Receives the gradient of the node's output and accumulates into parents
  /// through Tape::accumulate.
  using Pullback = std::function<void(Tape&, const Eigen::MatrixXd& grad)>;

  Var leaf(Eigen::MatrixXd value, bool requires_grad = true);
  Var constant(Eigen::MatrixXd value) { return leaf(std::move(value), false); }

  /// Custom node; requires_grad is inherited from the parents.
  Var push(Eigen::MatrixXd value, const std::vector<Var>& parents, Pullback pullback);

  void accumulate(Var v, const Eigen::MatrixXd& grad);

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and runs the reverse sweep.
  void backward(Var root);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  /// Zero matrix of the right shape if nothing reached the node.
  Eigen::MatrixXd grad(Var v) const;
  bool requires_grad(Var v) const {
    return nodes_[static_cast<std::size_t>(v.id)].requires_grad;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    bool has_grad = false;
    Pullback pullback;
  };
  std::vector<Node> nodes_;
};

namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
/// Adds a 1 x m row to every row of an n x m matrix.
Var add_row(Var x, Var row);
Var silu(Var x);
Var exp(Var x);
/// Sum of squared entries, as a 1x1 node.
Var squared_norm(Var x);
/// Weighted sum of 1x1 nodes.
Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights);
/// Same value, no gradient flow.
Var detach(Var x);

}  // namespace ad

}  // namespace unimatch
