#include "unimatch/autodiff.hpp"

#include <stdexcept>

namespace unimatch {

const Eigen::MatrixXd& Var::value() const { return tape->value(*this); }
bool Var::requires_grad() const { return tape->requires_grad(*this); }

Var Tape::leaf(Eigen::MatrixXd value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::push(Eigen::MatrixXd value, const std::vector<Var>& parents, Pullback pullback) {
  Node node;
  node.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape != this) throw std::logic_error("Tape::push: parent from another tape");
    node.requires_grad = node.requires_grad || requires_grad(p);
  }
  if (node.requires_grad) node.pullback = std::move(pullback);
  nodes_.push_back(std::move(node));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Eigen::MatrixXd& grad) {
  Node& node = nodes_[static_cast<std::size_t>(v.id)];
  if (!node.requires_grad) return;
  if (node.has_grad) {
    node.grad += grad;
  } else {
    node.grad = grad;
    node.has_grad = true;
  }
}

void Tape::backward(Var root) {
  Node& r = nodes_[static_cast<std::size_t>(root.id)];
  if (r.value.size() != 1) throw std::logic_error("Tape::backward: root must be 1x1");
  accumulate(root, Eigen::MatrixXd::Ones(1, 1));
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.pullback) continue;
    // Pullbacks only accumulate into earlier nodes; nothing is appended.
    node.pullback(*this, node.grad);
  }
}

Eigen::MatrixXd Tape::grad(Var v) const {
  const Node& node = nodes_[static_cast<std::size_t>(v.id)];
  if (node.has_grad) return node.grad;
  return Eigen::MatrixXd::Zero(node.value.rows(), node.value.cols());
}

namespace ad {

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  return t.push(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var transpose(Var a) {
  return a.tape->push(a.value().transpose(), {a}, [a](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g.transpose());
  });
}

Var add(Var a, Var b) {
  return a.tape->push(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  return a.tape->push(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var scale(Var a, double s) {
  return a.tape->push(a.value() * s, {a}, [a, s](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(a, g * s);
  });
}

Var add_row(Var x, Var row) {
  Eigen::MatrixXd out = x.value();
  out.rowwise() += row.value().row(0);
  return x.tape->push(std::move(out), {x, row}, [x, row](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(x, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var silu(Var x) {
  const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-x.value().array()).exp());
  Eigen::MatrixXd out = x.value().array() * sig;
  // silu'(z) = s(z) (1 + z (1 - s(z)))
  Eigen::MatrixXd dout = sig * (1.0 + x.value().array() * (1.0 - sig));
  return x.tape->push(std::move(out), {x},
                      [x, d = std::move(dout)](Tape& t, const Eigen::MatrixXd& g) {
                        t.accumulate(x, g.cwiseProduct(d));
                      });
}

Var exp(Var x) {
  // Arguments below -700 only produce subnormals; flushing them keeps exp()
  // on its fast path.
  Eigen::MatrixXd out = x.value().array().max(-700.0).exp();
  Tape& tape = *x.tape;
  const int id = static_cast<int>(tape.size());
  return tape.push(std::move(out), {x}, [x, id](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(x, g.cwiseProduct(t.value(Var{&t, id})));
  });
}

Var squared_norm(Var x) {
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = x.value().squaredNorm();
  return x.tape->push(std::move(out), {x}, [x](Tape& t, const Eigen::MatrixXd& g) {
    t.accumulate(x, 2.0 * g(0, 0) * t.value(x));
  });
}

Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    throw std::invalid_argument("weighted_sum: terms and weights must match");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(1, 1);
  for (std::size_t i = 0; i < terms.size(); ++i) out(0, 0) += weights[i] * terms[i].scalar();
  return terms.front().tape->push(std::move(out), terms,
                                  [terms, weights](Tape& t, const Eigen::MatrixXd& g) {
                                    for (std::size_t i = 0; i < terms.size(); ++i) {
                                      if (weights[i] != 0.0) {
                                        t.accumulate(terms[i], g * weights[i]);
                                      }
                                    }
                                  });
}

Var detach(Var x) { return x.tape->constant(x.value()); }

}  // namespace ad

}  // namespace unimatch
