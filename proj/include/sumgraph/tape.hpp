#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape is an append-only arena of nodes. Each node holds its forward value
// and, when any of its inputs requires a gradient, a closure that pushes the
// node's gradient back to those inputs. Node ids are issued in creation
// order, so iterating ids downward during backward() is a reverse
// topological traversal.
//
// A tape is meant to live for exactly one forward/backward pass and must not
// be shared across threads.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "sumgraph/matrix.hpp"

namespace sumgraph {

struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;

  bool valid() const { return id != kInvalid; }
  friend bool operator==(Var, Var) = default;
};

class Tape {
 public:
  // Receives the tape, the node's own id and its accumulated gradient.
  using Backprop = std::function<void(Tape&, Var self, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(Matrix value);
  Var parameter(Matrix value);

  const Matrix& value(Var v) const;
  // Gradient of the last backward() loss w.r.t. v. Zero-filled (same shape as
  // the value) for nodes the loss does not depend on, or before backward().
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every node that requires a
  // gradient. loss must be 1x1; ContractError otherwise.
  void backward(Var loss);

  // Op-author interface. record() drops `fn` when no parent requires a
  // gradient, so constant subgraphs cost nothing on the way back.
  Var record(Matrix value, std::initializer_list<Var> parents, Backprop fn);
  void accumulate(Var v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backprop backprop;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
};

// Differentiable primitives. Every op takes its operands by Var and records
// one node on the tape the operands belong to.
namespace ad {

Var matmul(Tape& t, Var a, Var b);
Var transpose(Tape& t, Var a);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var relu(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);
Var add_identity(Tape& t, Var a);

// n x m -> n x 1 row sums.
Var row_sum(Tape& t, Var a);
// Entrywise x^(-1/2); operands must be strictly positive.
Var rsqrt(Tape& t, Var a);
// Entrywise 1 / max(x, 1e-12).
Var reciprocal(Tape& t, Var a);
// out(i, j) = v(i) * a(i, j), v is n x 1.
Var scale_rows(Tape& t, Var a, Var v);
// out(i, j) = a(i, j) * v(j), v is m x 1.
Var scale_cols(Tape& t, Var a, Var v);
// n x m -> n x 1 with entries ||row_i||_2 + eps.
Var row_norms(Tape& t, Var a, double eps);

Var sum(Tape& t, Var a);
Var abs_sum(Tape& t, Var a);
Var sum_squares(Tape& t, Var a);
// Sum of all entries with i != j; square input.
Var sum_off_diagonal(Tape& t, Var a);

Var gather_rows(Tape& t, Var a, std::span<const std::size_t> index);
Var gather_cols(Tape& t, Var a, std::span<const std::size_t> index);

// -(1/T) sum_t w_t [l_t log y_t + (1 - l_t) log(1 - y_t)] over a T x 1 score
// column, with both log arguments clamped to >= 1e-12.
Var weighted_bce(Tape& t, Var y, std::span<const double> labels,
                 std::span<const double> weights);

}  // namespace ad

// Plain (tape-free) versions of the pointwise activations.
Matrix relu(const Matrix& m);
Matrix sigmoid(const Matrix& m);
double sigmoid(double x);

// Lower bound applied to log and division operands.
inline constexpr double kClampFloor = 1e-12;

}  // namespace sumgraph
