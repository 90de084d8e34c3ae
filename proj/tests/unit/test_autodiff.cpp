#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "cmh/agent/autodiff.hpp"
#include "cmh/errors.hpp"
#include "cmh/random.hpp"

using namespace cmh;
using namespace cmh::ad;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

// f maps bound leaves to a scalar. Compares the tape gradient of every input
// with central differences and returns the worst relative error.
double check_grad(std::vector<Parameter>& inputs,
                  const std::function<Var(Tape&, std::vector<Var>&)>& f) {
  auto eval = [&] {
    Tape t;
    std::vector<Var> leaves;
    for (auto& p : inputs) leaves.push_back(t.param(p));
    return f(t, leaves).scalar();
  };
  for (auto& p : inputs) p.zero_grad();
  {
    Tape t;
    std::vector<Var> leaves;
    for (auto& p : inputs) leaves.push_back(t.param(p));
    t.backward(f(t, leaves));
  }
  double worst = 0.0;
  const double h = 1e-6;
  for (auto& p : inputs) {
    Matrix fd(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double x = p.value(i);
      p.value(i) = x + h;
      const double up = eval();
      p.value(i) = x - h;
      const double down = eval();
      p.value(i) = x;
      fd(i) = (up - down) / (2 * h);
    }
    const double denom = std::max(1e-8, fd.norm() + p.grad.norm());
    worst = std::max(worst, (fd - p.grad).norm() / denom);
  }
  return worst;
}

// Weighted sum so that every output entry gets a distinct upstream gradient.
Var reduce(Tape& t, Var y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, t.constant(random_matrix(rng, y.rows(), y.cols()))));
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("binary ops") {
  Rng rng(1);
  std::vector<Parameter> in{{"a", random_matrix(rng, 3, 4), {}}, {"b", random_matrix(rng, 3, 4), {}},
                            {"c", random_matrix(rng, 4, 2), {}}, {"r", random_matrix(rng, 1, 4), {}}};
  CHECK(check_grad(in, [](Tape& t, std::vector<Var>& v) { return reduce(t, matmul(v[0], v[2]), 1); }) < 1e-7);
  CHECK(check_grad(in, [](Tape& t, std::vector<Var>& v) { return reduce(t, add(v[0], v[1]), 2); }) < 1e-7);
  CHECK(check_grad(in, [](Tape& t, std::vector<Var>& v) { return reduce(t, sub(v[0], v[1]), 3); }) < 1e-7);
  CHECK(check_grad(in, [](Tape& t, std::vector<Var>& v) { return reduce(t, mul(v[0], v[1]), 4); }) < 1e-7);
  CHECK(check_grad(in, [](Tape& t, std::vector<Var>& v) { return reduce(t, add_row(v[0], v[3]), 5); }) < 1e-7);
  CHECK(check_grad(in, [](Tape& t, std::vector<Var>& v) { return reduce(t, minimum(v[0], v[1]), 6); }) < 1e-7);
}

TEST_CASE("unary ops") {
  Rng rng(2);
  std::vector<Parameter> in{{"a", random_matrix(rng, 3, 5, 2.0), {}}};
  using Op = std::function<Var(Var)>;
  const std::vector<Op> ops{
      [](Var a) { return scale(a, -1.7); },      [](Var a) { return add_const(a, 0.3); },
      [](Var a) { return elu(a); },               [](Var a) { return sigmoid(a); },
      [](Var a) { return ad::tanh(a); },          [](Var a) { return ad::exp(a); },
      [](Var a) { return square(a); },            [](Var a) { return clamp(a, -0.5, 0.5); },
      [](Var a) { return pair_norm(a); },         [](Var a) { return standardize_rows(a); },
      [](Var a) { return mean_rows(a); },         [](Var a) { return row(a, 1); },
      [](Var a) { return slice_cols(a, 1, 3); },  [](Var a) { return pick(a, 2, 4); },
  };
  for (std::size_t i = 0; i < ops.size(); ++i) {
    CAPTURE(i);
    CHECK(check_grad(in, [&](Tape& t, std::vector<Var>& v) { return reduce(t, ops[i](v[0]), 10 + i); }) < 1e-6);
  }
  const std::vector<Eigen::Index> rows{0, 2};
  CHECK(check_grad(in, [&](Tape& t, std::vector<Var>& v) { return reduce(t, mean_rows_of(v[0], rows), 7); }) < 1e-7);
}

TEST_CASE("concat") {
  Rng rng(3);
  std::vector<Parameter> in{{"a", random_matrix(rng, 2, 3), {}}, {"b", random_matrix(rng, 2, 1), {}}};
  CHECK(check_grad(in, [](Tape& t, std::vector<Var>& v) {
          const Var parts[] = {v[0], v[1], v[0]};
          return reduce(t, concat_cols(parts), 8);
        }) < 1e-7);
}

TEST_CASE("masked log softmax") {
  Rng rng(4);
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 1};
  std::vector<Parameter> in{{"z", random_matrix(rng, 1, 6, 3.0), {}}};

  Tape t;
  const Var lp = masked_log_softmax(t.param(in[0]), mask);
  double total = 0.0;
  for (int i = 0; i < 6; ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      total += std::exp(lp.value()(0, i));
    } else {
      CHECK(lp.value()(0, i) == -std::numeric_limits<double>::infinity());
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // Gradient only reaches unmasked logits.
  CHECK(check_grad(in, [&](Tape& tt, std::vector<Var>& v) {
          return pick(masked_log_softmax(v[0], mask), 0, 2);
        }) < 1e-7);
  CHECK(in[0].grad(0, 1) == 0.0);
  CHECK(in[0].grad(0, 4) == 0.0);

  // Entropy agrees with -sum p log p and has a finite gradient.
  Tape t2;
  const Var h = masked_entropy(t2.param(in[0]), mask);
  double expect = 0.0;
  for (int i = 0; i < 6; ++i) {
    if (mask[static_cast<std::size_t>(i)]) expect -= std::exp(lp.value()(0, i)) * lp.value()(0, i);
  }
  CHECK(h.scalar() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(check_grad(in, [&](Tape&, std::vector<Var>& v) { return masked_entropy(v[0], mask); }) < 1e-7);

  // Large logits stay finite.
  Tape t3;
  const Var big = masked_log_softmax(t3.constant(Matrix::Constant(1, 6, 800.0)), mask);
  CHECK(big.value()(0, 0) == doctest::Approx(-std::log(4.0)));
}

TEST_CASE("gradients accumulate over reused nodes and backward needs a scalar") {
  Parameter p{"p", Matrix::Constant(1, 1, 3.0), {}};
  Tape t;
  const Var x = t.param(p);
  t.backward(mul(x, x));
  CHECK(p.grad(0, 0) == doctest::Approx(6.0));
  Tape t2;
  CHECK_THROWS_AS(t2.backward(t2.constant(Matrix::Zero(2, 1))), NumericError);
  Tape t3;
  CHECK_THROWS_AS(add(t3.constant(Matrix::Zero(2, 2)), t3.constant(Matrix::Zero(2, 3))), NumericError);
}

}  // TEST_SUITE
