#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "contingent/errors.hpp"

namespace contingent {

// Dense row-major tensor of doubles with an optional gradient buffer.
// Rank is 1 or 2 everywhere in this project; rank-1 tensors behave as
// column vectors (n x 1) in matrix contexts.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until ensure_grad(); same length as data otherwise

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols)
      : shape{rows, cols}, data(rows * cols, 0.0) {}
  explicit Tensor(std::size_t n) : shape{n}, data(n, 0.0) {}

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }
  static Tensor vector_of(std::vector<double> v) {
    Tensor t;
    t.shape = {v.size()};
    t.data = std::move(v);
    return t;
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }

  bool finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

namespace kern {

// Y[m x n] = X[m x k] * W[n x k]^T + b[n]
// Every output element accumulates as b[j] + sum over ascending t, so the two
// loop forms below produce bitwise-identical results (fp-contract stays off).
// The reduction over k cannot vectorize without reassociation; transposing W
// turns the inner loop into independent j-lanes, worth it for larger batches.
inline void linear_nt(const double* x, const double* w, const double* b, double* y,
                      std::size_t m, std::size_t k, std::size_t n) {
  if (m >= 16) {
    thread_local std::vector<double> wt;
    wt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t t = 0; t < k; ++t) wt[t * n + j] = w[j * k + t];
    for (std::size_t i = 0; i < m; ++i) {
      const double* xi = x + i * k;
      double* yi = y + i * n;
      for (std::size_t j = 0; j < n; ++j) yi[j] = b[j];
      for (std::size_t t = 0; t < k; ++t) {
        const double xv = xi[t];
        const double* wr = wt.data() + t * n;
        for (std::size_t j = 0; j < n; ++j) yi[j] += xv * wr[j];
      }
    }
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x + i * k;
    double* yi = y + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* wj = w + j * k;
      double acc = b[j];
      for (std::size_t t = 0; t < k; ++t) acc += xi[t] * wj[t];
      yi[j] = acc;
    }
  }
}

// dX[m x k] += dY[m x n] * W[n x k]
inline void linear_bwd_x(const double* dy, const double* w, double* dx,
                         std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* dyi = dy + i * n;
    double* dxi = dx + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double g = dyi[j];
      const double* wj = w + j * k;
      for (std::size_t t = 0; t < k; ++t) dxi[t] += g * wj[t];
    }
  }
}

// dW[n x k] += dY[m x n]^T * X[m x k]
inline void linear_bwd_w(const double* dy, const double* x, double* dw,
                         std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* dyi = dy + i * n;
    const double* xi = x + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double g = dyi[j];
      double* dwj = dw + j * k;
      for (std::size_t t = 0; t < k; ++t) dwj[t] += g * xi[t];
    }
  }
}

// db[n] += column sums of dY[m x n]
inline void linear_bwd_b(const double* dy, double* db, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* dyi = dy + i * n;
    for (std::size_t j = 0; j < n; ++j) db[j] += dyi[j];
  }
}

// log(1 - tanh(u)^2), computed from u without cancellation.
inline double log1m_tanh2(double u) {
  const double t = -2.0 * u;
  // softplus(t) = log1p(exp(-|t|)) + max(t, 0)
  const double sp = std::log1p(std::exp(-std::fabs(t))) + (t > 0.0 ? t : 0.0);
  return 2.0 * (0.6931471805599453094 - u - sp);
}

inline double softplus(double x) {
  return std::log1p(std::exp(-std::fabs(x))) + (x > 0.0 ? x : 0.0);
}

}  // namespace kern

// Reverse-mode gradient tape over rank-2 tensors. Operations append nodes in
// execution order; backward() walks them in reverse, which is a valid
// topological order by construction. The tape is rebuilt per loss evaluation
// and clear() recycles node storage across steps.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void clear() { n_used_ = 0; }
  std::size_t size() const { return n_used_; }

  // Leaf referencing external storage; backward accumulates into t.grad.
  Var param(Tensor& t) {
    Node& nd = push(Op::Param, t.rows(), t.cols());
    nd.ext = &t;
    nd.needs_grad = true;
    return Var{nd.id};
  }

  // Leaf referencing external storage read-only; no gradient, no copy.
  Var frozen(const Tensor& t) {
    Node& nd = push(Op::Frozen, t.rows(), t.cols());
    nd.ext = const_cast<Tensor*>(&t);  // read through vptr only, never written
    return Var{nd.id};
  }

  // Leaf with no gradient, value copied in.
  Var constant(const Tensor& t) {
    Node& nd = push(Op::Const, t.rows(), t.cols());
    nd.val.assign(t.data.begin(), t.data.end());
    return Var{nd.id};
  }

  Var constant(std::size_t rows, std::size_t cols, const double* src) {
    Node& nd = push(Op::Const, rows, cols);
    nd.val.assign(src, src + rows * cols);
    return Var{nd.id};
  }

  // x[m x k] * w[n x k]^T + b[n] -> [m x n]
  Var linear(Var x, Var w, Var b) {
    const Node& nx = node(x);
    const Node& nw = node(w);
    const Node& nb = node(b);
    if (nx.cols != nw.cols)
      throw StructuralError("linear: input width " + std::to_string(nx.cols) +
                            " does not match weight fan-in " + std::to_string(nw.cols));
    if (nb.rows * nb.cols != nw.rows)
      throw StructuralError("linear: bias length does not match weight fan-out");
    Node& nd = push(Op::Linear, nx.rows, nw.rows);
    nd.a = x.id;
    nd.b = w.id;
    nd.c = b.id;
    nd.needs_grad = nx.needs_grad || nw.needs_grad || nb.needs_grad;
    kern::linear_nt(vptr(nx), vptr(nw), vptr(nb), nd.val.data(), nx.rows, nx.cols, nw.rows);
    return Var{nd.id};
  }

  Var tanh_(Var a) {
    return unary(Op::Tanh, a, [](double x) { return std::tanh(x); });
  }
  Var exp_(Var a) {
    return unary(Op::Exp, a, [](double x) { return std::exp(x); });
  }
  Var square_(Var a) {
    return unary(Op::Square, a, [](double x) { return x * x; });
  }
  Var log1m_tanh2_(Var a) {
    return unary(Op::Log1mTanh2, a, [](double x) { return kern::log1m_tanh2(x); });
  }
  // atanh(clamp(a, -bound, bound)); zero gradient where the clamp is active
  Var atanh_clamped(Var a, double bound) {
    Node& nd = unary_node(Op::AtanhClamped, a);
    nd.c0 = bound;
    const Node& na = node(a);
    const double* src = vptr(na);
    for (std::size_t i = 0; i < nd.val.size(); ++i) {
      double v = src[i];
      v = v > bound ? bound : (v < -bound ? -bound : v);
      nd.val[i] = std::atanh(v);
    }
    return Var{nd.id};
  }
  Var clamp_(Var a, double lo, double hi) {
    Node& nd = unary_node(Op::Clamp, a);
    nd.c0 = lo;
    nd.c1 = hi;
    const Node& na = node(a);
    const double* src = vptr(na);
    for (std::size_t i = 0; i < nd.val.size(); ++i)
      nd.val[i] = src[i] > hi ? hi : (src[i] < lo ? lo : src[i]);
    return Var{nd.id};
  }
  Var scale(Var a, double c) {
    Node& nd = unary_node(Op::Scale, a);
    nd.c0 = c;
    const double* src = vptr(node(a));
    for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = c * src[i];
    return Var{nd.id};
  }
  Var add_const(Var a, double c) {
    Node& nd = unary_node(Op::AddConst, a);
    nd.c0 = c;
    const double* src = vptr(node(a));
    for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = src[i] + c;
    return Var{nd.id};
  }

  Var add(Var a, Var b) { return binary(Op::Add, a, b); }
  Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
  Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }
  // Elementwise minimum; gradient routes to the smaller input (ties to a).
  Var min_(Var a, Var b) { return binary(Op::Min, a, b); }

  Var slice_cols(Var a, std::size_t c0, std::size_t n) {
    const Node& na = node(a);
    if (c0 + n > na.cols) throw StructuralError("slice_cols: range out of bounds");
    Node& nd = push(Op::SliceCols, na.rows, n);
    nd.a = a.id;
    nd.i0 = c0;
    nd.needs_grad = na.needs_grad;
    const double* src = vptr(na);
    for (std::size_t i = 0; i < na.rows; ++i)
      for (std::size_t j = 0; j < n; ++j)
        nd.val[i * n + j] = src[i * na.cols + c0 + j];
    return Var{nd.id};
  }

  Var concat_cols(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.rows != nb.rows) throw StructuralError("concat_cols: row mismatch");
    Node& nd = push(Op::ConcatCols, na.rows, na.cols + nb.cols);
    nd.a = a.id;
    nd.b = b.id;
    nd.needs_grad = na.needs_grad || nb.needs_grad;
    const double* pa = vptr(na);
    const double* pb = vptr(nb);
    for (std::size_t i = 0; i < na.rows; ++i) {
      double* out = nd.val.data() + i * nd.cols;
      for (std::size_t j = 0; j < na.cols; ++j) out[j] = pa[i * na.cols + j];
      for (std::size_t j = 0; j < nb.cols; ++j) out[na.cols + j] = pb[i * nb.cols + j];
    }
    return Var{nd.id};
  }

  // [m x n] -> [m x 1]
  Var row_sum(Var a) {
    const Node& na = node(a);
    Node& nd = push(Op::RowSum, na.rows, 1);
    nd.a = a.id;
    nd.needs_grad = na.needs_grad;
    const double* src = vptr(na);
    for (std::size_t i = 0; i < na.rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < na.cols; ++j) acc += src[i * na.cols + j];
      nd.val[i] = acc;
    }
    return Var{nd.id};
  }

  Var sum_all(Var a) {
    const Node& na = node(a);
    Node& nd = push(Op::SumAll, 1, 1);
    nd.a = a.id;
    nd.needs_grad = na.needs_grad;
    const double* src = vptr(na);
    double acc = 0.0;
    for (std::size_t i = 0; i < na.rows * na.cols; ++i) acc += src[i];
    nd.val[0] = acc;
    return Var{nd.id};
  }

  Var mean_all(Var a) {
    const Node& na = node(a);
    Var s = sum_all(a);
    return scale(s, 1.0 / static_cast<double>(na.rows * na.cols));
  }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every reachable
  // Param leaf's Tensor::grad. Loss must be scalar.
  void backward(Var loss) {
    Node& nl = node(loss);
    if (nl.rows * nl.cols != 1)
      throw StructuralError("backward: loss must be scalar, got " +
                            std::to_string(nl.rows) + "x" + std::to_string(nl.cols));
    grad_of(nl)[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      Node& nd = nodes_[i];
      if (!nd.needs_grad || nd.grad.empty()) continue;
      dispatch_backward(nd);
    }
    // flush Param leaf gradients to their tensors
    for (int i = 0; i <= loss.id; ++i) {
      Node& nd = nodes_[i];
      if (nd.op != Op::Param || nd.grad.empty()) continue;
      nd.ext->ensure_grad();
      for (std::size_t j = 0; j < nd.grad.size(); ++j) nd.ext->grad[j] += nd.grad[j];
    }
  }

  std::span<const double> data(Var v) const {
    const Node& nd = node(v);
    return {vptr(nd), nd.rows * nd.cols};
  }
  double scalar(Var v) const {
    const Node& nd = node(v);
    if (nd.rows * nd.cols != 1) throw StructuralError("scalar: var is not scalar");
    return vptr(nd)[0];
  }
  std::size_t var_rows(Var v) const { return node(v).rows; }
  std::size_t var_cols(Var v) const { return node(v).cols; }
  // Gradient buffer of an intermediate node (empty span if untouched).
  std::span<const double> grad(Var v) const {
    const Node& nd = node(v);
    return {nd.grad.data(), nd.grad.size()};
  }

 private:
  enum class Op {
    Param, Const, Frozen, Linear, Tanh, Exp, Square, Log1mTanh2, AtanhClamped,
    Clamp, Scale, AddConst, Add, Sub, Mul, Min, SliceCols, ConcatCols, RowSum,
    SumAll
  };

  struct Node {
    Op op;
    int id = -1;
    int a = -1, b = -1, c = -1;
    std::size_t rows = 0, cols = 0;
    std::vector<double> val;   // unused for Param (value lives in *ext)
    std::vector<double> grad;  // lazily zero-filled on first touch
    Tensor* ext = nullptr;
    double c0 = 0.0, c1 = 0.0;
    std::size_t i0 = 0;
    bool needs_grad = false;
  };

  Node& push(Op op, std::size_t rows, std::size_t cols) {
    if (n_used_ == nodes_.size()) nodes_.emplace_back();
    Node& nd = nodes_[n_used_];
    nd.op = op;
    nd.id = static_cast<int>(n_used_);
    nd.a = nd.b = nd.c = -1;
    nd.rows = rows;
    nd.cols = cols;
    nd.ext = nullptr;
    nd.c0 = nd.c1 = 0.0;
    nd.i0 = 0;
    nd.needs_grad = false;
    if (op != Op::Param && op != Op::Frozen)
      nd.val.assign(rows * cols, 0.0);
    else
      nd.val.clear();
    nd.grad.clear();
    ++n_used_;
    return nd;
  }

  Node& node(Var v) {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= n_used_)
      throw StructuralError("tape: invalid var handle");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= n_used_)
      throw StructuralError("tape: invalid var handle");
    return nodes_[v.id];
  }

  static const double* vptr(const Node& nd) {
    return (nd.op == Op::Param || nd.op == Op::Frozen) ? nd.ext->data.data()
                                                       : nd.val.data();
  }

  std::vector<double>& grad_of(Node& nd) {
    if (nd.grad.size() != nd.rows * nd.cols) nd.grad.assign(nd.rows * nd.cols, 0.0);
    return nd.grad;
  }

  Node& unary_node(Op op, Var a) {
    const Node& na = node(a);
    Node& nd = push(op, na.rows, na.cols);
    nd.a = a.id;
    nd.needs_grad = na.needs_grad;
    return nd;
  }

  template <typename F>
  Var unary(Op op, Var a, F f) {
    Node& nd = unary_node(op, a);
    const double* src = vptr(node(a));
    for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = f(src[i]);
    return Var{nd.id};
  }

  Var binary(Op op, Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.rows != nb.rows || na.cols != nb.cols)
      throw StructuralError("elementwise op: shape mismatch");
    Node& nd = push(op, na.rows, na.cols);
    nd.a = a.id;
    nd.b = b.id;
    nd.needs_grad = na.needs_grad || nb.needs_grad;
    const double* pa = vptr(na);
    const double* pb = vptr(nb);
    switch (op) {
      case Op::Add:
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = pa[i] + pb[i];
        break;
      case Op::Sub:
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = pa[i] - pb[i];
        break;
      case Op::Mul:
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = pa[i] * pb[i];
        break;
      case Op::Min:
        for (std::size_t i = 0; i < nd.val.size(); ++i) nd.val[i] = pa[i] <= pb[i] ? pa[i] : pb[i];
        break;
      default:
        throw StructuralError("binary: bad op");
    }
    return Var{nd.id};
  }

  void push_grad(int parent, const double* g, std::size_t n,
                 const double* mask = nullptr) {
    Node& np = nodes_[parent];
    if (!np.needs_grad) return;
    std::vector<double>& pg = grad_of(np);
    if (mask) {
      for (std::size_t i = 0; i < n; ++i) pg[i] += g[i] * mask[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) pg[i] += g[i];
    }
  }

  void dispatch_backward(Node& nd) {
    const double* g = nd.grad.data();
    const std::size_t n = nd.rows * nd.cols;
    switch (nd.op) {
      case Op::Param:
      case Op::Const:
      case Op::Frozen:
        break;
      case Op::Linear: {
        Node& nx = nodes_[nd.a];
        Node& nw = nodes_[nd.b];
        Node& nb = nodes_[nd.c];
        const std::size_t m = nx.rows, k = nx.cols, out = nw.rows;
        if (nx.needs_grad)
          kern::linear_bwd_x(g, vptr(nw), grad_of(nx).data(), m, k, out);
        if (nw.needs_grad)
          kern::linear_bwd_w(g, vptr(nx), grad_of(nw).data(), m, k, out);
        if (nb.needs_grad) kern::linear_bwd_b(g, grad_of(nb).data(), m, out);
        break;
      }
      case Op::Tanh: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < n; ++i) pg[i] += g[i] * (1.0 - nd.val[i] * nd.val[i]);
        break;
      }
      case Op::Exp: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < n; ++i) pg[i] += g[i] * nd.val[i];
        break;
      }
      case Op::Square: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        const double* src = vptr(na);
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < n; ++i) pg[i] += g[i] * 2.0 * src[i];
        break;
      }
      case Op::Log1mTanh2: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        const double* src = vptr(na);
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < n; ++i) pg[i] += g[i] * -2.0 * std::tanh(src[i]);
        break;
      }
      case Op::AtanhClamped: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        const double* src = vptr(na);
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < n; ++i) {
          const double v = src[i];
          if (v > nd.c0 || v < -nd.c0) continue;  // clamped: zero gradient
          pg[i] += g[i] / (1.0 - v * v);
        }
        break;
      }
      case Op::Clamp: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        const double* src = vptr(na);
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < n; ++i) {
          if (src[i] < nd.c0 || src[i] > nd.c1) continue;
          pg[i] += g[i];
        }
        break;
      }
      case Op::Scale: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < n; ++i) pg[i] += g[i] * nd.c0;
        break;
      }
      case Op::AddConst:
        push_grad(nd.a, g, n);
        break;
      case Op::Add:
        push_grad(nd.a, g, n);
        push_grad(nd.b, g, n);
        break;
      case Op::Sub: {
        push_grad(nd.a, g, n);
        Node& nb = nodes_[nd.b];
        if (nb.needs_grad) {
          std::vector<double>& pg = grad_of(nb);
          for (std::size_t i = 0; i < n; ++i) pg[i] -= g[i];
        }
        break;
      }
      case Op::Mul: {
        Node& na = nodes_[nd.a];
        Node& nb = nodes_[nd.b];
        if (na.needs_grad) push_grad(nd.a, g, n, vptr(nb));
        if (nb.needs_grad) push_grad(nd.b, g, n, vptr(na));
        break;
      }
      case Op::Min: {
        Node& na = nodes_[nd.a];
        Node& nb = nodes_[nd.b];
        const double* pa = vptr(na);
        const double* pb = vptr(nb);
        if (na.needs_grad) {
          std::vector<double>& pg = grad_of(na);
          for (std::size_t i = 0; i < n; ++i)
            if (pa[i] <= pb[i]) pg[i] += g[i];
        }
        if (nb.needs_grad) {
          std::vector<double>& pg = grad_of(nb);
          for (std::size_t i = 0; i < n; ++i)
            if (pa[i] > pb[i]) pg[i] += g[i];
        }
        break;
      }
      case Op::SliceCols: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < nd.rows; ++i)
          for (std::size_t j = 0; j < nd.cols; ++j)
            pg[i * na.cols + nd.i0 + j] += g[i * nd.cols + j];
        break;
      }
      case Op::ConcatCols: {
        Node& na = nodes_[nd.a];
        Node& nb = nodes_[nd.b];
        if (na.needs_grad) {
          std::vector<double>& pg = grad_of(na);
          for (std::size_t i = 0; i < nd.rows; ++i)
            for (std::size_t j = 0; j < na.cols; ++j)
              pg[i * na.cols + j] += g[i * nd.cols + j];
        }
        if (nb.needs_grad) {
          std::vector<double>& pg = grad_of(nb);
          for (std::size_t i = 0; i < nd.rows; ++i)
            for (std::size_t j = 0; j < nb.cols; ++j)
              pg[i * nb.cols + j] += g[i * nd.cols + na.cols + j];
        }
        break;
      }
      case Op::RowSum: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < nd.rows; ++i)
          for (std::size_t j = 0; j < na.cols; ++j) pg[i * na.cols + j] += g[i];
        break;
      }
      case Op::SumAll: {
        Node& na = nodes_[nd.a];
        if (!na.needs_grad) break;
        std::vector<double>& pg = grad_of(na);
        for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[0];
        break;
      }
    }
  }

  // deque: growth must not invalidate Node references held across push()
  std::deque<Node> nodes_;
  std::size_t n_used_ = 0;
};

}  // namespace contingent
