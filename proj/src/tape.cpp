#include "sumgraph/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sumgraph/errors.hpp"

namespace sumgraph {

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) {
  if (v.id >= nodes_.size()) throw ContractError("variable does not belong to this tape");
  return nodes_[v.id];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backprop fn) {
  bool needs = false;
  for (Var p : parents) needs = needs || node(p).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(fn) : Backprop{}});
  return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    require_same_shape(n.value, g, "gradient accumulate");
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  const Node& l = node(loss);
  if (l.value.rows() != 1 || l.value.cols() != 1) {
    throw ContractError("backward requires a 1x1 loss, got " + std::to_string(l.value.rows()) +
                        "x" + std::to_string(l.value.cols()));
  }
  for (auto& n : nodes_) n.grad = Matrix();
  if (!l.requires_grad) return;
  nodes_[loss.id].grad = Matrix(1, 1, 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backprop || n.grad.empty()) continue;
    n.backprop(*this, Var{i}, n.grad);
  }
}

// ---------------------------------------------------------------------------
// Plain activations

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& m) {
  Matrix out = m;
  for (double& x : out.data()) x = sigmoid(x);
  return out;
}

Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Primitives

namespace ad {

namespace {

using G = const Matrix&;

void require_column(const Matrix& v, std::size_t n, const char* what) {
  if (v.cols() != 1 || v.rows() != n) {
    throw ShapeError(std::string(what) + ": expected a " + std::to_string(n) + "x1 column, got " +
                     std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
  }
}

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + ": square matrix required");
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  Matrix out = sumgraph::matmul(t.value(a), t.value(b));
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, Var, G g) {
    if (tp.requires_grad(a)) tp.accumulate(a, matmul_nt(g, tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, matmul_tn(tp.value(a), g));
  });
}

Var transpose(Tape& t, Var a) {
  return t.record(sumgraph::transpose(t.value(a)), {a},
                  [a](Tape& tp, Var, G g) { tp.accumulate(a, sumgraph::transpose(g)); });
}

Var add(Tape& t, Var a, Var b) {
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, Var, G g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Tape& t, Var a, Var b) {
  return t.record(t.value(a) - t.value(b), {a, b}, [a, b](Tape& tp, Var, G g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, g * -1.0);
  });
}

Var scale(Tape& t, Var a, double s) {
  return t.record(t.value(a) * s, {a}, [a, s](Tape& tp, Var, G g) { tp.accumulate(a, g * s); });
}

Var relu(Tape& t, Var a) {
  return t.record(sumgraph::relu(t.value(a)), {a}, [a](Tape& tp, Var, G g) {
    Matrix d = g;
    auto x = tp.value(a).data();
    auto dd = d.data();
    // Subgradient at exactly 0 is 0.
    for (std::size_t i = 0; i < dd.size(); ++i)
      if (!(x[i] > 0.0)) dd[i] = 0.0;
    tp.accumulate(a, d);
  });
}

Var sigmoid(Tape& t, Var a) {
  return t.record(sumgraph::sigmoid(t.value(a)), {a}, [a](Tape& tp, Var self, G g) {
    Matrix d = g;
    auto y = tp.value(self).data();
    auto dd = d.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= y[i] * (1.0 - y[i]);
    tp.accumulate(a, d);
  });
}

Var add_identity(Tape& t, Var a) {
  const Matrix& v = t.value(a);
  require_square(v, "add_identity");
  Matrix out = v;
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += 1.0;
  return t.record(std::move(out), {a}, [a](Tape& tp, Var, G g) { tp.accumulate(a, g); });
}

Var row_sum(Tape& t, Var a) {
  const Matrix& v = t.value(a);
  Matrix out(v.rows(), 1);
  for (std::size_t i = 0; i < v.rows(); ++i) {
    double acc = 0.0;
    for (double x : v.row(i)) acc += x;
    out(i, 0) = acc;
  }
  return t.record(std::move(out), {a}, [a](Tape& tp, Var, G g) {
    const Matrix& v = tp.value(a);
    Matrix d(v.rows(), v.cols());
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (double& x : d.row(i)) x = g(i, 0);
    tp.accumulate(a, d);
  });
}

Var rsqrt(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& x : out.data()) {
    if (!(x > 0.0)) throw InvariantError("rsqrt of a non-positive value");
    x = 1.0 / std::sqrt(x);
  }
  return t.record(std::move(out), {a}, [a](Tape& tp, Var self, G g) {
    Matrix d = g;
    auto y = tp.value(self).data();
    auto dd = d.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= -0.5 * y[i] * y[i] * y[i];
    tp.accumulate(a, d);
  });
}

Var reciprocal(Tape& t, Var a) {
  Matrix out = t.value(a);
  for (double& x : out.data()) x = 1.0 / std::max(x, kClampFloor);
  return t.record(std::move(out), {a}, [a](Tape& tp, Var self, G g) {
    Matrix d = g;
    auto x = tp.value(a).data();
    auto y = tp.value(self).data();
    auto dd = d.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] = x[i] > kClampFloor ? -dd[i] * y[i] * y[i] : 0.0;
    tp.accumulate(a, d);
  });
}

Var scale_rows(Tape& t, Var a, Var v) {
  const Matrix& m = t.value(a);
  const Matrix& s = t.value(v);
  require_column(s, m.rows(), "scale_rows");
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& x : out.row(i)) x *= s(i, 0);
  return t.record(std::move(out), {a, v}, [a, v](Tape& tp, Var, G g) {
    const Matrix& m = tp.value(a);
    const Matrix& s = tp.value(v);
    if (tp.requires_grad(a)) {
      Matrix d = g;
      for (std::size_t i = 0; i < d.rows(); ++i)
        for (double& x : d.row(i)) x *= s(i, 0);
      tp.accumulate(a, d);
    }
    if (tp.requires_grad(v)) {
      Matrix d(s.rows(), 1);
      for (std::size_t i = 0; i < m.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) acc += g(i, j) * m(i, j);
        d(i, 0) = acc;
      }
      tp.accumulate(v, d);
    }
  });
}

Var scale_cols(Tape& t, Var a, Var v) {
  const Matrix& m = t.value(a);
  const Matrix& s = t.value(v);
  require_column(s, m.cols(), "scale_cols");
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] *= s(j, 0);
  }
  return t.record(std::move(out), {a, v}, [a, v](Tape& tp, Var, G g) {
    const Matrix& m = tp.value(a);
    const Matrix& s = tp.value(v);
    if (tp.requires_grad(a)) {
      Matrix d = g;
      for (std::size_t i = 0; i < d.rows(); ++i) {
        auto r = d.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] *= s(j, 0);
      }
      tp.accumulate(a, d);
    }
    if (tp.requires_grad(v)) {
      Matrix d(s.rows(), 1);
      for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) d(j, 0) += g(i, j) * m(i, j);
      tp.accumulate(v, d);
    }
  });
}

Var row_norms(Tape& t, Var a, double eps) {
  const Matrix& m = t.value(a);
  Matrix out(m.rows(), 1);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (double x : m.row(i)) acc += x * x;
    out(i, 0) = std::sqrt(acc) + eps;
  }
  return t.record(std::move(out), {a}, [a, eps](Tape& tp, Var self, G g) {
    const Matrix& m = tp.value(a);
    const Matrix& n = tp.value(self);
    Matrix d(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double norm = n(i, 0) - eps;
      if (!(norm > 0.0)) continue;
      const double f = g(i, 0) / norm;
      auto src = m.row(i);
      auto dst = d.row(i);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] = f * src[j];
    }
    tp.accumulate(a, d);
  });
}

Var sum(Tape& t, Var a) {
  return t.record(Matrix(1, 1, sumgraph::sum(t.value(a))), {a}, [a](Tape& tp, Var, G g) {
    const Matrix& m = tp.value(a);
    tp.accumulate(a, Matrix(m.rows(), m.cols(), g(0, 0)));
  });
}

Var abs_sum(Tape& t, Var a) {
  double acc = 0.0;
  for (double x : t.value(a).data()) acc += std::abs(x);
  return t.record(Matrix(1, 1, acc), {a}, [a](Tape& tp, Var, G g) {
    Matrix d = tp.value(a);
    for (double& x : d.data()) x = x > 0.0 ? g(0, 0) : (x < 0.0 ? -g(0, 0) : 0.0);
    tp.accumulate(a, d);
  });
}

Var sum_squares(Tape& t, Var a) {
  double acc = 0.0;
  for (double x : t.value(a).data()) acc += x * x;
  return t.record(Matrix(1, 1, acc), {a},
                  [a](Tape& tp, Var, G g) { tp.accumulate(a, tp.value(a) * (2.0 * g(0, 0))); });
}

Var sum_off_diagonal(Tape& t, Var a) {
  const Matrix& m = t.value(a);
  require_square(m, "sum_off_diagonal");
  double acc = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (i != j) acc += m(i, j);
  return t.record(Matrix(1, 1, acc), {a}, [a](Tape& tp, Var, G g) {
    const Matrix& m = tp.value(a);
    Matrix d(m.rows(), m.cols(), g(0, 0));
    for (std::size_t i = 0; i < m.rows(); ++i) d(i, i) = 0.0;
    tp.accumulate(a, d);
  });
}

Var gather_rows(Tape& t, Var a, std::span<const std::size_t> index) {
  const Matrix& m = t.value(a);
  Matrix out(index.size(), m.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= m.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy_n(m.row(index[r]).begin(), m.cols(), out.row(r).begin());
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return t.record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& tp, Var, G g) {
    const Matrix& m = tp.value(a);
    Matrix d(m.rows(), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto src = g.row(r);
      auto dst = d.row(idx[r]);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
    tp.accumulate(a, d);
  });
}

Var gather_cols(Tape& t, Var a, std::span<const std::size_t> index) {
  const Matrix& m = t.value(a);
  Matrix out(m.rows(), index.size());
  for (std::size_t c = 0; c < index.size(); ++c) {
    if (index[c] >= m.cols()) throw ShapeError("gather_cols: index out of range");
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, c) = m(i, index[c]);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return t.record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& tp, Var, G g) {
    const Matrix& m = tp.value(a);
    Matrix d(m.rows(), m.cols());
    for (std::size_t c = 0; c < idx.size(); ++c)
      for (std::size_t i = 0; i < m.rows(); ++i) d(i, idx[c]) += g(i, c);
    tp.accumulate(a, d);
  });
}

Var weighted_bce(Tape& t, Var y, std::span<const double> labels,
                 std::span<const double> weights) {
  const Matrix& s = t.value(y);
  require_column(s, labels.size(), "weighted_bce");
  if (weights.size() != labels.size()) throw ShapeError("weighted_bce: weight length mismatch");
  const double n = static_cast<double>(labels.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = s(i, 0);
    acc += weights[i] * (labels[i] * std::log(std::max(p, kClampFloor)) +
                         (1.0 - labels[i]) * std::log(std::max(1.0 - p, kClampFloor)));
  }
  std::vector<double> l(labels.begin(), labels.end());
  std::vector<double> w(weights.begin(), weights.end());
  return t.record(Matrix(1, 1, -acc / n), {y},
                  [y, l = std::move(l), w = std::move(w), n](Tape& tp, Var, G g) {
                    const Matrix& s = tp.value(y);
                    Matrix d(s.rows(), 1);
                    for (std::size_t i = 0; i < l.size(); ++i) {
                      const double p = s(i, 0);
                      double dp = 0.0;
                      if (p > kClampFloor) dp += l[i] / p;
                      if (1.0 - p > kClampFloor) dp -= (1.0 - l[i]) / (1.0 - p);
                      d(i, 0) = -g(0, 0) * w[i] * dp / n;
                    }
                    tp.accumulate(y, d);
                  });
}

}  // namespace ad
}  // namespace sumgraph
