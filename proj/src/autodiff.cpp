#include "flowbind/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace flowbind::ad {

Var Tape::push(Matrix value, std::function<void(Tape&, const Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_of(Var v) {
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::parameter(Matrix value, Matrix* sink) {
  Var v = push(std::move(value), nullptr);
  nodes_.back().sink = sink;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  return push(value(a) * value(b), [a, b](Tape& t, const Node& out) {
    t.grad_of(a).noalias() += out.grad * t.value(b).transpose();
    t.grad_of(b).noalias() += t.value(a).transpose() * out.grad;
  });
}

Var Tape::add(Var a, Var b) {
  return push(value(a) + value(b), [a, b](Tape& t, const Node& out) {
    t.grad_of(a) += out.grad;
    t.grad_of(b) += out.grad;
  });
}

Var Tape::sub(Var a, Var b) {
  return push(value(a) - value(b), [a, b](Tape& t, const Node& out) {
    t.grad_of(a) += out.grad;
    t.grad_of(b) -= out.grad;
  });
}

Var Tape::mul(Var a, Var b) {
  return push(value(a).cwiseProduct(value(b)), [a, b](Tape& t, const Node& out) {
    t.grad_of(a) += out.grad.cwiseProduct(t.value(b));
    t.grad_of(b) += out.grad.cwiseProduct(t.value(a));
  });
}

Var Tape::add_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols())
    throw std::invalid_argument("add_row: shape mismatch");
  Matrix v = value(a);
  v.rowwise() += value(row).row(0);
  return push(std::move(v), [a, row](Tape& t, const Node& out) {
    t.grad_of(a) += out.grad;
    t.grad_of(row) += out.grad.colwise().sum();
  });
}

Var Tape::scale(Var a, double s) {
  return push(s * value(a), [a, s](Tape& t, const Node& out) { t.grad_of(a) += s * out.grad; });
}

Var Tape::silu(Var a) {
  const Matrix& x = value(a);
  Matrix sig = (1.0 + (-x.array()).exp()).inverse().matrix();
  Matrix y = x.cwiseProduct(sig);
  return push(std::move(y), [a, sig = std::move(sig)](Tape& t, const Node& out) {
    const Matrix& x = t.value(a);
    // d/dx x·s(x) = s + x s (1 - s)
    const Matrix d = (sig.array() * (1.0 + x.array() * (1.0 - sig.array()))).matrix();
    t.grad_of(a) += out.grad.cwiseProduct(d);
  });
}

Var Tape::tanh(Var a) {
  Matrix y = value(a).array().tanh().matrix();
  return push(std::move(y), [a](Tape& t, const Node& out) {
    t.grad_of(a) += out.grad.cwiseProduct((1.0 - out.value.array().square()).matrix());
  });
}

Var Tape::exp(Var a) {
  Matrix y = value(a).array().exp().matrix();
  return push(std::move(y), [a](Tape& t, const Node& out) { t.grad_of(a) += out.grad.cwiseProduct(out.value); });
}

Var Tape::sum(Var a) {
  Matrix s(1, 1);
  s(0, 0) = value(a).sum();
  return push(std::move(s), [a](Tape& t, const Node& out) { t.grad_of(a).array() += out.grad(0, 0); });
}

Var Tape::sum_squares(Var a) {
  Matrix s(1, 1);
  s(0, 0) = value(a).squaredNorm();
  return push(std::move(s), [a](Tape& t, const Node& out) { t.grad_of(a) += 2.0 * out.grad(0, 0) * t.value(a); });
}

Var Tape::row_sum(Var a) {
  Matrix s = value(a).rowwise().sum();
  return push(std::move(s), [a](Tape& t, const Node& out) {
    Matrix& g = t.grad_of(a);
    for (Eigen::Index i = 0; i < g.rows(); ++i) g.row(i).array() += out.grad(i, 0);
  });
}

Var Tape::log_softmax_pick(Var logits, const std::vector<int>& picks) {
  const Matrix& l = value(logits);
  if (static_cast<Eigen::Index>(picks.size()) != l.rows()) throw std::invalid_argument("log_softmax_pick: size");
  Matrix probs(l.rows(), l.cols());
  Matrix out(l.rows(), 1);
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double m = l.row(i).maxCoeff();
    const Eigen::ArrayXd e = (l.row(i).array() - m).exp().transpose();
    const double z = e.sum();
    probs.row(i) = (e / z).transpose().matrix();
    out(i, 0) = l(i, picks[static_cast<std::size_t>(i)]) - m - std::log(z);
  }
  return push(std::move(out), [logits, picks, probs = std::move(probs)](Tape& t, const Node& o) {
    Matrix& g = t.grad_of(logits);
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      g.row(i) -= o.grad(i, 0) * probs.row(i);
      g(i, picks[static_cast<std::size_t>(i)]) += o.grad(i, 0);
    }
  });
}

void Tape::backward(Var out) {
  if (value(out).size() != 1) throw std::invalid_argument("backward: output must be scalar");
  grad_of(out)(0, 0) = 1.0;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) continue;
    if (n.back) n.back(*this, n);
    if (n.sink) *n.sink += n.grad;
  }
}

}  // namespace flowbind::ad
