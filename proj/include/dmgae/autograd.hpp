#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dmgae/graph.hpp"

// Reverse-mode differentiation over a fixed set of matrix primitives.
//
// A Tape records every value produced during a forward pass. Each primitive
// appends one node holding its value and, when any input needs a gradient, a
// closure that pushes the output gradient back to the inputs. backward()
// walks the nodes in reverse creation order, so the tape is its own
// topological order.
namespace dmgae::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Var constant(Matrix value);
  Var leaf(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  // Gradient of the last backward() target with respect to v; zeros if v
  // did not contribute.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Runs reverse accumulation from a 1x1 node.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Primitive implementation hooks.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  const Matrix& output_grad(std::size_t id) const { return nodes_[id].grad; }
  void accumulate(Var v, const Matrix& g);
  void accumulate(Var v, Matrix&& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

Var matmul(Var a, Var b);
Var transpose(Var a);
// s * b for a constant sparse s. `s` must outlive the tape.
Var spmm(const SparseMatrix& s, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a + 1 * row, broadcasting a 1 x c row over the rows of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var shift(Var a, double s);
Var mul_const(Var a, const Matrix& c);
Var add_const(Var a, const Matrix& c);

Var exp(Var a);
Var log(Var a);
Var pow(Var a, double exponent);
Var relu(Var a);
Var sigmoid(Var a);
// Elementwise clamp; the gradient is passed only where lo <= a <= hi.
Var clamp(Var a, double lo, double hi);

Var sum(Var a);
Var mean(Var a);

Var gather_rows(Var a, std::span<const int> rows);
// Euclidean distances between all row pairs; coincident rows get zero
// gradient.
Var pairwise_distance(Var a);

}  // namespace dmgae::ad
