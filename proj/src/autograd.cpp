#include "dmgae/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace dmgae::ad {

Var Tape::constant(Matrix value) { return record(std::move(value), {}, nullptr); }

Var Tape::leaf(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
  nodes_.push_back({std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Matrix Tape::grad(Var v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

void Tape::accumulate(Var v, Matrix&& g) {
  Node& node = nodes_[v.id()];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = std::move(g);
  } else {
    node.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward() needs a scalar (1x1) node");
  }
  for (Node& node : nodes_) node.grad.resize(0, 0);
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.backward && node.grad.size() != 0) node.backward(*this, id);
  }
}

namespace {

void check_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Tape& t = *a.tape();
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const Matrix& g = tape.output_grad(self);
    if (tape.requires_grad(a)) tape.accumulate(a, g * b.value().transpose());
    if (tape.requires_grad(b)) tape.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  return t.record(a.value().transpose(), {a}, [a](Tape& tape, std::size_t self) {
    tape.accumulate(a, tape.output_grad(self).transpose());
  });
}

Var spmm(const SparseMatrix& s, Var b) {
  if (s.cols() != b.rows()) throw std::invalid_argument("spmm: inner dimension mismatch");
  Tape& t = *b.tape();
  const SparseMatrix* sp = &s;
  return t.record(Matrix(s * b.value()), {b}, [sp, b](Tape& tape, std::size_t self) {
    tape.accumulate(b, Matrix(sp->transpose() * tape.output_grad(self)));
  });
}

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tape& t = *a.tape();
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tape, std::size_t self) {
    tape.accumulate(a, tape.output_grad(self));
    tape.accumulate(b, tape.output_grad(self));
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tape, std::size_t self) {
    tape.accumulate(a, tape.output_grad(self));
    tape.accumulate(b, -tape.output_grad(self));
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Tape& t = *a.tape();
  return t.record(a.value().cwiseProduct(b.value()), {a, b},
                  [a, b](Tape& tape, std::size_t self) {
                    const Matrix& g = tape.output_grad(self);
                    if (tape.requires_grad(a)) tape.accumulate(a, g.cwiseProduct(b.value()));
                    if (tape.requires_grad(b)) tape.accumulate(b, g.cwiseProduct(a.value()));
                  });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("add_row: row must be 1 x cols(a)");
  }
  Tape& t = *a.tape();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& tape, std::size_t self) {
    const Matrix& g = tape.output_grad(self);
    tape.accumulate(a, g);
    if (tape.requires_grad(row)) tape.accumulate(row, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  return t.record(a.value() * s, {a}, [a, s](Tape& tape, std::size_t self) {
    tape.accumulate(a, tape.output_grad(self) * s);
  });
}

Var shift(Var a, double s) {
  Tape& t = *a.tape();
  return t.record(a.value().array() + s, {a}, [a](Tape& tape, std::size_t self) {
    tape.accumulate(a, tape.output_grad(self));
  });
}

Var mul_const(Var a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) {
    throw std::invalid_argument("mul_const: shape mismatch");
  }
  Tape& t = *a.tape();
  return t.record(a.value().cwiseProduct(c), {a}, [a, c](Tape& tape, std::size_t self) {
    tape.accumulate(a, tape.output_grad(self).cwiseProduct(c));
  });
}

Var add_const(Var a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols()) {
    throw std::invalid_argument("add_const: shape mismatch");
  }
  Tape& t = *a.tape();
  return t.record(a.value() + c, {a}, [a](Tape& tape, std::size_t self) {
    tape.accumulate(a, tape.output_grad(self));
  });
}

Var exp(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().array().exp();
  return t.record(std::move(out), {a}, [a](Tape& tape, std::size_t self) {
    tape.accumulate(a, tape.output_grad(self).cwiseProduct(tape.value(Var(&tape, self))));
  });
}

Var log(Var a) {
  Tape& t = *a.tape();
  return t.record(a.value().array().log(), {a}, [a](Tape& tape, std::size_t self) {
    tape.accumulate(a, tape.output_grad(self).cwiseQuotient(a.value()));
  });
}

Var pow(Var a, double exponent) {
  Tape& t = *a.tape();
  return t.record(a.value().array().pow(exponent), {a},
                  [a, exponent](Tape& tape, std::size_t self) {
                    const Matrix local = exponent * a.value().array().pow(exponent - 1.0);
                    tape.accumulate(a, tape.output_grad(self).cwiseProduct(local));
                  });
}

Var relu(Var a) {
  Tape& t = *a.tape();
  return t.record(a.value().cwiseMax(0.0), {a}, [a](Tape& tape, std::size_t self) {
    const Matrix mask = (a.value().array() > 0.0).cast<double>();
    tape.accumulate(a, tape.output_grad(self).cwiseProduct(mask));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Matrix out = a.value().unaryExpr([](double x) {
    // Split by sign so exp never overflows.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return t.record(std::move(out), {a}, [a](Tape& tape, std::size_t self) {
    const Matrix& s = tape.value(Var(&tape, self));
    const Matrix local = s.array() * (1.0 - s.array());
    tape.accumulate(a, tape.output_grad(self).cwiseProduct(local));
  });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = *a.tape();
  return t.record(a.value().cwiseMax(lo).cwiseMin(hi), {a},
                  [a, lo, hi](Tape& tape, std::size_t self) {
                    const Matrix mask =
                        ((a.value().array() >= lo) && (a.value().array() <= hi)).cast<double>();
                    tape.accumulate(a, tape.output_grad(self).cwiseProduct(mask));
                  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [a](Tape& tape, std::size_t self) {
    tape.accumulate(a, Matrix::Constant(a.rows(), a.cols(), tape.output_grad(self)(0, 0)));
  });
}

Var mean(Var a) {
  const auto count = static_cast<double>(a.value().size());
  return scale(sum(a), count > 0 ? 1.0 / count : 0.0);
}

Var gather_rows(Var a, std::span<const int> rows) {
  Tape& t = *a.tape();
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = a.value().row(rows[r]);
  std::vector<int> index(rows.begin(), rows.end());
  return t.record(std::move(out), {a}, [a, index](Tape& tape, std::size_t self) {
    const Matrix& g = tape.output_grad(self);
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t r = 0; r < index.size(); ++r) full.row(index[r]) += g.row(static_cast<Eigen::Index>(r));
    tape.accumulate(a, full);
  });
}

Var pairwise_distance(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  const Eigen::Index n = x.rows();
  Matrix d = Matrix::Zero(n, n);
  const Matrix points = x.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = (points.col(i) - points.col(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return t.record(std::move(d), {a}, [a](Tape& tape, std::size_t self) {
    const Matrix& g = tape.output_grad(self);
    const Matrix& x = a.value();
    const Matrix& d = tape.value(Var(&tape, self));
    // d(d_ij)/d(x_i) = (x_i - x_j) / d_ij, and d_ij appears at (i,j) and (j,i).
    Matrix w = Matrix::Zero(g.rows(), g.cols());
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (i != j && d(i, j) > 0.0) w(i, j) = (g(i, j) + g(j, i)) / d(i, j);
      }
    }
    // sum_j w_ij (x_i - x_j) = diag(rowsum w) x - w x
    const Vector row_sum = w.rowwise().sum();
    Matrix grad = row_sum.asDiagonal() * x - w * x;
    tape.accumulate(a, std::move(grad));
  });
}

}  // namespace dmgae::ad
