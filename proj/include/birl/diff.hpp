#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "birl/array.hpp"

namespace birl {

enum class Op {
  Constant,
  Parameter,
  Add,
  Sub,
  Mul,
  MatMul,
  Concat,
  RowSelect,
  Tanh,
  Sigmoid,
  Relu,
  Exp,
  Log,
  Softmax,     // over last axis
  LogSumExp,   // over last axis
  Mean,        // over one axis
  Sum,         // over one axis
  Scale,       // by a real constant
  Clamp,       // numerical guard; pass-through gradient inside the range
};

struct Node;
using Var = std::shared_ptr<Node>;

// Computation-graph value. Graphs are define-by-run: forward values are
// computed eagerly at construction and cached for the backward pass.
struct Node {
  Array value;
  Array grad;  // same shape as value at all times
  Op op = Op::Constant;
  std::vector<Var> parents;
  bool requires_grad = false;

  // Op attributes.
  std::vector<size_t> indices;  // RowSelect
  bool zero_pad_row = false;    // RowSelect: index 0 reads as zeros, gets no gradient
  double factor = 0.0;          // Scale
  int axis = 0;                 // Mean / Sum / Concat
  bool trans_a = false;         // MatMul
  bool trans_b = false;
  double lo = 0.0, hi = 0.0;    // Clamp
};

Var constant(Array v);
Var constant_scalar(double v);
Var parameter(Array v);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// C = op(A) * op(B). B may be rank-1 (treated as a column), giving a rank-1 result.
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var concat(const std::vector<Var>& parts, int axis);
Var row_select(const Var& m, std::vector<size_t> rows, bool zero_pad_row = false);
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var softmax(const Var& x);
Var logsumexp(const Var& x);
Var mean(const Var& x, int axis);
Var sum(const Var& x, int axis);
Var sum_all(const Var& x);
Var scale(const Var& x, double factor);
Var clamp(const Var& x, double lo, double hi);

// Forward value of the root (already computed at construction).
const Array& evaluate(const Var& root);

// Reverse-mode pass from a scalar root. Zeroes the accumulators of every
// node it will visit first, then accumulates d(root)/d(node) into each
// requires-grad ancestor, visiting each node exactly once.
void backward(const Var& root);

// Nodes in topological order (parents before children), pruned to the
// requires-grad subgraph plus the root.
std::vector<Node*> topo_order(const Var& root);

// Row-stabilized softmax of a raw buffer; shared with sampling code.
void softmax_rows(const double* x, double* y, size_t rows, size_t cols);

}  // namespace birl
