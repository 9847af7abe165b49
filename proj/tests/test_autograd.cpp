#include "doctest.h"

#include <functional>
#include <random>

#include "dmgae/autograd.hpp"

using namespace dmgae;

namespace {

using Builder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

double evaluate(const Builder& f, const std::vector<Matrix>& inputs) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.leaf(m));
  return f(tape, vars).value()(0, 0);
}

// Central differences against the tape gradient for every input entry.
double max_gradient_error(const Builder& f, std::vector<Matrix> inputs, double h = 1e-5) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.leaf(m));
  tape.backward(f(tape, vars));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix g = tape.grad(vars[k]);
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k].data()[i];
      inputs[k].data()[i] = saved + h;
      const double up = evaluate(f, inputs);
      inputs[k].data()[i] = saved - h;
      const double down = evaluate(f, inputs);
      inputs[k].data()[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double err = std::abs(fd - g.data()[i]) / std::max({1.0, std::abs(fd), std::abs(g.data()[i])});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Weighted sum so every output entry gets a distinct gradient.
ad::Var reduce(ad::Var v) {
  Matrix w(v.rows(), v.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
  return ad::sum(ad::mul_const(v, w));
}

}  // namespace

TEST_CASE("values of primitives") {
  ad::Tape tape;
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  Matrix b(2, 2);
  b << 0, 1, 1, 0;
  const auto va = tape.leaf(a);
  const auto vb = tape.constant(b);
  CHECK(ad::matmul(va, vb).value() == a * b);
  CHECK(ad::transpose(va).value() == a.transpose());
  CHECK(ad::sum(va).value()(0, 0) == 10.0);
  CHECK(ad::mean(va).value()(0, 0) == 2.5);
  CHECK(ad::clamp(va, 1.5, 3.5).value()(1, 1) == 3.5);
  const std::vector<int> rows = {1, 1, 0};
  const Matrix g = ad::gather_rows(va, rows).value();
  CHECK(g.rows() == 3);
  CHECK(g(0, 0) == 3.0);
  CHECK(g(2, 1) == 2.0);
  Matrix pts(3, 2);
  pts << 0, 0, 3, 4, 0, 1;
  const Matrix d = ad::pairwise_distance(tape.leaf(pts)).value();
  CHECK(d(0, 1) == doctest::Approx(5.0));
  CHECK(d(1, 0) == doctest::Approx(5.0));
  CHECK(d(0, 2) == doctest::Approx(1.0));
  CHECK(d(2, 2) == 0.0);
}

TEST_CASE("unreached leaves get zero gradient") {
  ad::Tape tape;
  const auto a = tape.leaf(Matrix::Ones(2, 2));
  const auto b = tape.leaf(Matrix::Ones(3, 1));
  tape.backward(ad::sum(a));
  CHECK(tape.grad(b).isZero());
  CHECK(tape.grad(a).isOnes());
}

TEST_CASE("gradients of every primitive match finite differences") {
  std::mt19937_64 rng(21);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(4, 2, rng);
  const Matrix c = random_matrix(3, 4, rng);
  const Matrix row = random_matrix(1, 4, rng);
  const Matrix pos = random_matrix(3, 4, rng, 0.2, 2.0);
  SparseMatrix s(3, 3);
  s.insert(0, 0) = 0.5;
  s.insert(0, 2) = -1.5;
  s.insert(2, 1) = 2.0;
  s.makeCompressed();
  const std::vector<int> rows = {2, 0, 2};

  const std::vector<std::pair<const char*, std::pair<Builder, std::vector<Matrix>>>> cases = {
      {"matmul", {[](ad::Tape&, const auto& v) { return reduce(ad::matmul(v[0], v[1])); }, {a, b}}},
      {"transpose", {[](ad::Tape&, const auto& v) { return reduce(ad::transpose(v[0])); }, {a}}},
      {"spmm", {[&s](ad::Tape&, const auto& v) { return reduce(ad::spmm(s, v[0])); }, {a}}},
      {"add", {[](ad::Tape&, const auto& v) { return reduce(ad::add(v[0], v[1])); }, {a, c}}},
      {"sub", {[](ad::Tape&, const auto& v) { return reduce(ad::sub(v[0], v[1])); }, {a, c}}},
      {"mul", {[](ad::Tape&, const auto& v) { return reduce(ad::mul(v[0], v[1])); }, {a, c}}},
      {"add_row", {[](ad::Tape&, const auto& v) { return reduce(ad::add_row(v[0], v[1])); }, {a, row}}},
      {"scale_shift", {[](ad::Tape&, const auto& v) { return reduce(ad::shift(ad::scale(v[0], -2.5), 0.7)); }, {a}}},
      {"add_const", {[&c](ad::Tape&, const auto& v) { return reduce(ad::mul(ad::add_const(v[0], c), v[0])); }, {a}}},
      {"exp", {[](ad::Tape&, const auto& v) { return reduce(ad::exp(v[0])); }, {a}}},
      {"log", {[](ad::Tape&, const auto& v) { return reduce(ad::log(v[0])); }, {pos}}},
      {"pow", {[](ad::Tape&, const auto& v) { return reduce(ad::pow(v[0], -1.7)); }, {pos}}},
      {"relu", {[](ad::Tape&, const auto& v) { return reduce(ad::relu(v[0])); }, {a}}},
      {"sigmoid", {[](ad::Tape&, const auto& v) { return reduce(ad::sigmoid(v[0])); }, {a}}},
      {"clamp", {[](ad::Tape&, const auto& v) { return reduce(ad::clamp(v[0], -0.5, 0.5)); }, {a}}},
      {"mean", {[](ad::Tape&, const auto& v) { return ad::mean(ad::mul(v[0], v[0])); }, {a}}},
      {"gather_rows", {[&rows](ad::Tape&, const auto& v) { return reduce(ad::gather_rows(v[0], rows)); }, {a}}},
      {"pairwise_distance", {[](ad::Tape&, const auto& v) { return reduce(ad::pairwise_distance(v[0])); }, {a}}},
      {"reuse", {[](ad::Tape&, const auto& v) {
                   const auto t = ad::sigmoid(v[0]);
                   return reduce(ad::mul(t, ad::exp(t)));
                 }, {a}}},
  };
  for (const auto& [name, c_] : cases) {
    CAPTURE(name);
    CHECK(max_gradient_error(c_.first, c_.second) < 1e-7);
  }
}

TEST_CASE("pairwise distance gradient is zero for coincident rows") {
  Matrix x(3, 2);
  x << 1, 1, 1, 1, 0, 2;
  ad::Tape tape;
  const auto v = tape.leaf(x);
  Matrix w = Matrix::Zero(3, 3);
  w(0, 1) = 1.0;
  tape.backward(ad::sum(ad::mul_const(ad::pairwise_distance(v), w)));
  CHECK(tape.grad(v).allFinite());
  CHECK(tape.grad(v).isZero());
}

TEST_CASE("backward requires a scalar") {
  ad::Tape tape;
  const auto v = tape.leaf(Matrix::Ones(2, 2));
  CHECK_THROWS(tape.backward(v));
}
