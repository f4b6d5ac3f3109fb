#include "birl/diff.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace birl {

namespace {

const char* op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Parameter: return "parameter";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::MatMul: return "matmul";
    case Op::Concat: return "concat";
    case Op::RowSelect: return "row_select";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Relu: return "relu";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Softmax: return "softmax";
    case Op::LogSumExp: return "logsumexp";
    case Op::Mean: return "mean";
    case Op::Sum: return "sum";
    case Op::Scale: return "scale";
    case Op::Clamp: return "clamp";
  }
  return "?";
}

Var make_node(Op op, std::vector<Var> parents, Array value) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->parents = std::move(parents);
  n->value = std::move(value);
  n->grad = Array(n->value.shape, 0.0);
  for (const auto& p : n->parents) n->requires_grad = n->requires_grad || p->requires_grad;
  return n;
}

[[noreturn]] void shape_fail(Op op, const Array& a, const Array& b) {
  fail(std::string(op_name(op)) + ": shape mismatch (" + a.shape_str() + " vs " +
       b.shape_str() + ")");
}

enum class Broadcast { None, RowVector, Scalar };

Broadcast broadcast_kind(Op op, const Array& a, const Array& b) {
  if (a.same_shape(b)) return Broadcast::None;
  if (b.size() == 1) return Broadcast::Scalar;
  if (a.rank() == 2 && b.rank() == 1 && b.size() == a.cols()) return Broadcast::RowVector;
  shape_fail(op, a, b);
}

// Elementwise combine with b broadcast over a when needed.
template <typename F>
Array combine(Op op, const Array& a, const Array& b, F f) {
  Array out(a.shape);
  switch (broadcast_kind(op, a, b)) {
    case Broadcast::None:
      for (size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
      break;
    case Broadcast::Scalar:
      for (size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i], b.data[0]);
      break;
    case Broadcast::RowVector: {
      const size_t c = a.cols();
      for (size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i], b.data[i % c]);
      break;
    }
  }
  return out;
}

// Accumulate a full-shape gradient contribution into a possibly-broadcast
// operand: exact shapes add elementwise, a row vector receives column sums,
// a scalar receives the total sum.
void reduce_into(Array& target, const Array& full, const Array& full_shape_ref) {
  if (target.same_shape(full_shape_ref)) {
    for (size_t i = 0; i < full.size(); ++i) target.data[i] += full.data[i];
  } else if (target.size() == 1) {
    double s = 0.0;
    for (double v : full.data) s += v;
    target.data[0] += s;
  } else {
    const size_t c = full_shape_ref.cols();
    for (size_t i = 0; i < full.size(); ++i) target.data[i % c] += full.data[i];
  }
}

void gemm(bool ta, bool tb, size_t m, size_t n, size_t k, const double* a, size_t lda,
          const double* b, size_t ldb, double beta, double* c, size_t ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0, a,
              static_cast<int>(lda), b, static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

template <typename F>
Var unary(Op op, const Var& x, F f) {
  Array out(x->value.shape);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = f(x->value.data[i]);
  return make_node(op, {x}, std::move(out));
}

void last_axis_dims(const Array& a, size_t& rows, size_t& cols) {
  if (a.rank() == 2) {
    rows = a.shape[0];
    cols = a.shape[1];
  } else {
    rows = 1;
    cols = a.shape[0];
  }
}

}  // namespace

void softmax_rows(const double* x, double* y, size_t rows, size_t cols) {
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = y + r * cols;
    double m = xr[0];
    for (size_t j = 1; j < cols; ++j) m = std::max(m, xr[j]);
    double z = 0.0;
    for (size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - m);
      z += yr[j];
    }
    for (size_t j = 0; j < cols; ++j) yr[j] /= z;
  }
}

Var constant(Array v) { return make_node(Op::Constant, {}, std::move(v)); }

Var constant_scalar(double v) { return constant(Array::scalar(v)); }

Var parameter(Array v) {
  auto n = make_node(Op::Parameter, {}, std::move(v));
  n->requires_grad = true;
  return n;
}

Var add(const Var& a, const Var& b) {
  return make_node(Op::Add, {a, b}, combine(Op::Add, a->value, b->value,
                                            [](double x, double y) { return x + y; }));
}

Var sub(const Var& a, const Var& b) {
  return make_node(Op::Sub, {a, b}, combine(Op::Sub, a->value, b->value,
                                            [](double x, double y) { return x - y; }));
}

Var mul(const Var& a, const Var& b) {
  return make_node(Op::Mul, {a, b}, combine(Op::Mul, a->value, b->value,
                                            [](double x, double y) { return x * y; }));
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  const Array& av = a->value;
  const Array& bv = b->value;
  if (av.rank() != 2) fail("matmul: first operand must be rank-2 (" + av.shape_str() + ")");
  const size_t m = trans_a ? av.cols() : av.rows();
  const size_t k = trans_a ? av.rows() : av.cols();
  size_t n;
  if (bv.rank() == 2) {
    const size_t bk = trans_b ? bv.cols() : bv.rows();
    n = trans_b ? bv.rows() : bv.cols();
    if (bk != k) shape_fail(Op::MatMul, av, bv);
  } else {
    if (trans_b) fail("matmul: cannot transpose a rank-1 operand");
    if (bv.size() != k) shape_fail(Op::MatMul, av, bv);
    n = 1;
  }
  Array out = (bv.rank() == 2) ? Array({m, n}) : Array({m});
  gemm(trans_a, trans_b, m, n, k, av.data.data(), av.cols(), bv.data.data(),
       bv.rank() == 2 ? bv.cols() : 1, 0.0, out.data.data(), n);
  auto node = make_node(Op::MatMul, {a, b}, std::move(out));
  node->trans_a = trans_a;
  node->trans_b = trans_b;
  return node;
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) fail("concat: no operands");
  if (axis != 0 && axis != 1) fail("concat: axis must be 0 or 1");
  const Array& first = parts[0]->value;
  if (first.rank() == 1) {
    if (axis != 0) fail("concat: rank-1 operands concatenate along axis 0");
    size_t total = 0;
    for (const auto& p : parts) {
      if (p->value.rank() != 1) shape_fail(Op::Concat, first, p->value);
      total += p->value.size();
    }
    Array out({total});
    size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
      off += p->value.size();
    }
    auto node = make_node(Op::Concat, parts, std::move(out));
    node->axis = 0;
    return node;
  }
  size_t rows = first.rows(), cols = first.cols();
  size_t total = 0;
  for (const auto& p : parts) {
    const Array& v = p->value;
    if (v.rank() != 2) shape_fail(Op::Concat, first, v);
    if (axis == 0) {
      if (v.cols() != cols) shape_fail(Op::Concat, first, v);
      total += v.rows();
    } else {
      if (v.rows() != rows) shape_fail(Op::Concat, first, v);
      total += v.cols();
    }
  }
  Array out = (axis == 0) ? Array({total, cols}) : Array({rows, total});
  if (axis == 0) {
    size_t row_off = 0;
    for (const auto& p : parts) {
      std::copy(p->value.data.begin(), p->value.data.end(),
                out.data.begin() + row_off * cols);
      row_off += p->value.rows();
    }
  } else {
    size_t col_off = 0;
    for (const auto& p : parts) {
      const size_t pc = p->value.cols();
      for (size_t r = 0; r < rows; ++r)
        std::copy(p->value.data.begin() + r * pc, p->value.data.begin() + (r + 1) * pc,
                  out.data.begin() + r * total + col_off);
      col_off += pc;
    }
  }
  auto node = make_node(Op::Concat, parts, std::move(out));
  node->axis = axis;
  return node;
}

Var row_select(const Var& m, std::vector<size_t> rows, bool zero_pad_row) {
  const Array& mv = m->value;
  if (mv.rank() != 2) fail("row_select: operand must be rank-2 (" + mv.shape_str() + ")");
  const size_t c = mv.cols();
  Array out({rows.size(), c});
  for (size_t i = 0; i < rows.size(); ++i) {
    const size_t r = rows[i];
    if (r >= mv.rows())
      fail("row_select: index " + std::to_string(r) + " out of range for " + mv.shape_str());
    if (zero_pad_row && r == 0) continue;  // stays zero
    std::copy(mv.data.begin() + r * c, mv.data.begin() + (r + 1) * c, out.data.begin() + i * c);
  }
  auto node = make_node(Op::RowSelect, {m}, std::move(out));
  node->indices = std::move(rows);
  node->zero_pad_row = zero_pad_row;
  return node;
}

Var tanh(const Var& x) { return unary(Op::Tanh, x, [](double v) { return std::tanh(v); }); }

Var sigmoid(const Var& x) {
  return unary(Op::Sigmoid, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Var relu(const Var& x) { return unary(Op::Relu, x, [](double v) { return v > 0 ? v : 0.0; }); }

Var exp(const Var& x) { return unary(Op::Exp, x, [](double v) { return std::exp(v); }); }

Var log(const Var& x) { return unary(Op::Log, x, [](double v) { return std::log(v); }); }

Var softmax(const Var& x) {
  size_t rows, cols;
  last_axis_dims(x->value, rows, cols);
  Array out(x->value.shape);
  softmax_rows(x->value.data.data(), out.data.data(), rows, cols);
  return make_node(Op::Softmax, {x}, std::move(out));
}

Var logsumexp(const Var& x) {
  size_t rows, cols;
  last_axis_dims(x->value, rows, cols);
  Array out = (x->value.rank() == 2) ? Array({rows}) : Array({1});
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = x->value.data.data() + r * cols;
    double m = xr[0];
    for (size_t j = 1; j < cols; ++j) m = std::max(m, xr[j]);
    double z = 0.0;
    for (size_t j = 0; j < cols; ++j) z += std::exp(xr[j] - m);
    out.data[r] = m + std::log(z);
  }
  return make_node(Op::LogSumExp, {x}, std::move(out));
}

namespace {

Var reduce(Op op, const Var& x, int axis) {
  const Array& v = x->value;
  Array out({1});
  if (v.rank() == 1) {
    if (axis != 0) fail(std::string(op_name(op)) + ": rank-1 reduction must use axis 0");
    double s = 0.0;
    for (double d : v.data) s += d;
    out.data[0] = (op == Op::Mean) ? s / static_cast<double>(v.size()) : s;
  } else {
    if (axis != 0 && axis != 1) fail(std::string(op_name(op)) + ": axis must be 0 or 1");
    const size_t r = v.rows(), c = v.cols();
    out = (axis == 0) ? Array({c}) : Array({r});
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j) out.data[axis == 0 ? j : i] += v.at(i, j);
    const double denom = static_cast<double>(axis == 0 ? r : c);
    if (op == Op::Mean)
      for (double& d : out.data) d /= denom;
  }
  auto node = make_node(op, {x}, std::move(out));
  node->axis = axis;
  return node;
}

}  // namespace

Var mean(const Var& x, int axis) { return reduce(Op::Mean, x, axis); }

Var sum(const Var& x, int axis) { return reduce(Op::Sum, x, axis); }

Var sum_all(const Var& x) {
  Array out({1});
  for (double d : x->value.data) out.data[0] += d;
  auto node = make_node(Op::Sum, {x}, std::move(out));
  node->axis = -1;
  return node;
}

Var scale(const Var& x, double factor) {
  Array out(x->value.shape);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = factor * x->value.data[i];
  auto node = make_node(Op::Scale, {x}, std::move(out));
  node->factor = factor;
  return node;
}

Var clamp(const Var& x, double lo, double hi) {
  Array out(x->value.shape);
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::clamp(x->value.data[i], lo, hi);
  auto node = make_node(Op::Clamp, {x}, std::move(out));
  node->lo = lo;
  node->hi = hi;
  return node;
}

const Array& evaluate(const Var& root) { return root->value; }

std::vector<Node*> topo_order(const Var& root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS; parents are emitted before the node itself.
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    Node* node = stack.back().first;
    bool descended = false;
    while (stack.back().second < node->parents.size()) {
      Node* p = node->parents[stack.back().second++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
        descended = true;
        break;
      }
    }
    if (!descended) {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

namespace {

void backward_into_parents(Node* n) {
  const Array& g = n->grad;
  switch (n->op) {
    case Op::Constant:
    case Op::Parameter:
      break;
    case Op::Add: {
      Node* a = n->parents[0].get();
      Node* b = n->parents[1].get();
      if (a->requires_grad) reduce_into(a->grad, g, n->value);
      if (b->requires_grad) reduce_into(b->grad, g, n->value);
      break;
    }
    case Op::Sub: {
      Node* a = n->parents[0].get();
      Node* b = n->parents[1].get();
      if (a->requires_grad) reduce_into(a->grad, g, n->value);
      if (b->requires_grad) {
        Array neg(g.shape);
        for (size_t i = 0; i < g.size(); ++i) neg.data[i] = -g.data[i];
        reduce_into(b->grad, neg, n->value);
      }
      break;
    }
    case Op::Mul: {
      Node* a = n->parents[0].get();
      Node* b = n->parents[1].get();
      if (a->requires_grad) {
        Array ga = combine(Op::Mul, g, b->value, [](double x, double y) { return x * y; });
        reduce_into(a->grad, ga, n->value);
      }
      if (b->requires_grad) {
        Array gb(g.shape);
        for (size_t i = 0; i < g.size(); ++i) gb.data[i] = g.data[i] * a->value.data[i];
        reduce_into(b->grad, gb, n->value);
      }
      break;
    }
    case Op::MatMul: {
      Node* a = n->parents[0].get();
      Node* b = n->parents[1].get();
      const Array& av = a->value;
      const Array& bv = b->value;
      const bool ta = n->trans_a, tb = n->trans_b;
      const size_t m = ta ? av.cols() : av.rows();
      const size_t k = ta ? av.rows() : av.cols();
      const size_t nn = (bv.rank() == 2) ? (tb ? bv.rows() : bv.cols()) : 1;
      const size_t ldb = (bv.rank() == 2) ? bv.cols() : 1;
      const double* gd = g.data.data();
      if (a->requires_grad) {
        double* ad = a->grad.data.data();
        if (!ta) {
          // dA += dC * opB^T
          gemm(false, !tb, m, k, nn, gd, nn, bv.data.data(), ldb, 1.0, ad, av.cols());
        } else {
          // dA(stored k x m) += opB * dC^T
          gemm(tb, true, k, m, nn, bv.data.data(), ldb, gd, nn, 1.0, ad, av.cols());
        }
      }
      if (b->requires_grad) {
        double* bd = b->grad.data.data();
        if (!tb) {
          // dB += opA^T * dC
          gemm(!ta, false, k, nn, m, av.data.data(), av.cols(), gd, nn, 1.0, bd, ldb);
        } else {
          // dB(stored n x k) += dC^T * opA
          gemm(true, ta, nn, k, m, gd, nn, av.data.data(), av.cols(), 1.0, bd, ldb);
        }
      }
      break;
    }
    case Op::Concat: {
      if (n->axis == 0 || n->value.rank() == 1) {
        size_t off = 0;
        for (auto& pv : n->parents) {
          Node* p = pv.get();
          const size_t sz = p->value.size();
          if (p->requires_grad)
            for (size_t i = 0; i < sz; ++i) p->grad.data[i] += g.data[off + i];
          off += sz;
        }
      } else {
        const size_t rows = n->value.rows(), total = n->value.cols();
        size_t col_off = 0;
        for (auto& pv : n->parents) {
          Node* p = pv.get();
          const size_t pc = p->value.cols();
          if (p->requires_grad)
            for (size_t r = 0; r < rows; ++r)
              for (size_t j = 0; j < pc; ++j)
                p->grad.data[r * pc + j] += g.data[r * total + col_off + j];
          col_off += pc;
        }
      }
      break;
    }
    case Op::RowSelect: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      const size_t c = p->value.cols();
      for (size_t i = 0; i < n->indices.size(); ++i) {
        const size_t r = n->indices[i];
        if (n->zero_pad_row && r == 0) continue;
        for (size_t j = 0; j < c; ++j) p->grad.data[r * c + j] += g.data[i * c + j];
      }
      break;
    }
    case Op::Tanh: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      for (size_t i = 0; i < g.size(); ++i) {
        const double y = n->value.data[i];
        p->grad.data[i] += g.data[i] * (1.0 - y * y);
      }
      break;
    }
    case Op::Sigmoid: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      for (size_t i = 0; i < g.size(); ++i) {
        const double y = n->value.data[i];
        p->grad.data[i] += g.data[i] * y * (1.0 - y);
      }
      break;
    }
    case Op::Relu: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      for (size_t i = 0; i < g.size(); ++i)
        if (p->value.data[i] > 0) p->grad.data[i] += g.data[i];
      break;
    }
    case Op::Exp: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      for (size_t i = 0; i < g.size(); ++i) p->grad.data[i] += g.data[i] * n->value.data[i];
      break;
    }
    case Op::Log: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      for (size_t i = 0; i < g.size(); ++i) p->grad.data[i] += g.data[i] / p->value.data[i];
      break;
    }
    case Op::Softmax: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      size_t rows, cols;
      last_axis_dims(n->value, rows, cols);
      for (size_t r = 0; r < rows; ++r) {
        const double* y = n->value.data.data() + r * cols;
        const double* gr = g.data.data() + r * cols;
        double dot = 0.0;
        for (size_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
        double* pg = p->grad.data.data() + r * cols;
        for (size_t j = 0; j < cols; ++j) pg[j] += y[j] * (gr[j] - dot);
      }
      break;
    }
    case Op::LogSumExp: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      size_t rows, cols;
      last_axis_dims(p->value, rows, cols);
      std::vector<double> sm(cols);
      for (size_t r = 0; r < rows; ++r) {
        softmax_rows(p->value.data.data() + r * cols, sm.data(), 1, cols);
        double* pg = p->grad.data.data() + r * cols;
        for (size_t j = 0; j < cols; ++j) pg[j] += g.data[r] * sm[j];
      }
      break;
    }
    case Op::Mean:
    case Op::Sum: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      const Array& pv = p->value;
      if (n->axis == -1) {  // sum_all
        const double w = g.data[0];
        for (size_t i = 0; i < pv.size(); ++i) p->grad.data[i] += w;
      } else if (pv.rank() == 1) {
        const double w =
            (n->op == Op::Mean) ? g.data[0] / static_cast<double>(pv.size()) : g.data[0];
        for (size_t i = 0; i < pv.size(); ++i) p->grad.data[i] += w;
      } else {
        const size_t r = pv.rows(), c = pv.cols();
        const double denom = static_cast<double>(n->axis == 0 ? r : c);
        for (size_t i = 0; i < r; ++i)
          for (size_t j = 0; j < c; ++j) {
            double w = g.data[n->axis == 0 ? j : i];
            if (n->op == Op::Mean) w /= denom;
            p->grad.data[i * c + j] += w;
          }
      }
      break;
    }
    case Op::Scale: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      for (size_t i = 0; i < g.size(); ++i) p->grad.data[i] += g.data[i] * n->factor;
      break;
    }
    case Op::Clamp: {
      Node* p = n->parents[0].get();
      if (!p->requires_grad) break;
      for (size_t i = 0; i < g.size(); ++i) {
        const double x = p->value.data[i];
        if (x >= n->lo && x <= n->hi) p->grad.data[i] += g.data[i];
      }
      break;
    }
  }
}

}  // namespace

void backward(const Var& root) {
  if (root->value.size() != 1)
    fail("backward: root must be scalar, got shape " + root->value.shape_str());
  std::vector<Node*> order = topo_order(root);
  for (Node* n : order) std::fill(n->grad.data.begin(), n->grad.data.end(), 0.0);
  root->grad.data[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) backward_into_parents(*it);
}

}  // namespace birl
