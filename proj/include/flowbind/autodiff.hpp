#pragma once

#include <functional>
#include <vector>

#include "flowbind/types.hpp"

// Minimal reverse-mode accumulation over dense matrices. A Tape records each
// operation with a closure that pushes the output adjoint to its inputs.
namespace flowbind::ad {

struct Var {
  int id = -1;
};

class Tape {
 public:
  Var constant(Matrix value);
  // Gradients of a parameter are accumulated into `sink` (same shape) on backward.
  Var parameter(Matrix value, Matrix* sink);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);           // elementwise
  Var add_row(Var a, Var row);     // broadcast a 1×n row over every row of a
  Var scale(Var a, double s);
  Var silu(Var a);
  Var tanh(Var a);
  Var exp(Var a);
  Var sum(Var a);                  // 1×1
  Var sum_squares(Var a);          // 1×1
  Var log_softmax_pick(Var logits, const std::vector<int>& picks);  // n×1 rows of log p[pick]
  Var row_sum(Var a);              // n×1

  const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  double scalar(Var v) const { return value(v)(0, 0); }

  // Seeds d(out)/d(out) = 1 for a 1×1 output and propagates.
  void backward(Var out);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Matrix* sink = nullptr;
    std::function<void(Tape&, const Node&)> back;
  };
  Var push(Matrix value, std::function<void(Tape&, const Node&)> back);
  Matrix& grad_of(Var v);

  std::vector<Node> nodes_;
};

}  // namespace flowbind::ad
