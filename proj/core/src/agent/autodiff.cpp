#include "cmh/agent/autodiff.hpp"

#include <cmath>
#include <limits>

#include "cmh/errors.hpp"

namespace cmh::ad {

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::param(Parameter& p) {
  Var v = push(p.value, true, nullptr);
  nodes_[v.id].sink = &p;
  return v;
}

Var Tape::push(Matrix value, bool needs_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  if (root.rows() != 1 || root.cols() != 1) throw NumericError("backward() needs a scalar root");
  accumulate(root.id, Matrix::Ones(1, 1));
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.sink) {
      if (n.sink->grad.rows() != n.value.rows() || n.sink->grad.cols() != n.value.cols()) n.sink->zero_grad();
      n.sink->grad += n.grad;
    }
  }
}

namespace {

bool any_grad(Var a) { return a.tape->needs_grad(a.id); }
bool any_grad(Var a, Var b) { return any_grad(a) || any_grad(b); }

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw NumericError("operands live on different tapes");
}

void same_shape(Var a, Var b, const char* op) {
  same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw NumericError(std::string(op) + ": shape mismatch");
  }
}

// Unary elementwise op given f(x) and f'(x) expressed through x and y = f(x).
template <class F, class D>
Var unary(Var a, F f, D df) {
  Matrix y = a.value().unaryExpr(f);
  return a.tape->push(std::move(y), any_grad(a), [a, df](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a.id);
    const Matrix& yv = t.value(self);
    Matrix d(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) d(i) = df(x(i), yv(i));
    t.accumulate(a.id, t.grad(self).cwiseProduct(d));
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) throw NumericError("matmul: inner dimension mismatch");
  return a.tape->push(a.value() * b.value(), any_grad(a, b), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a.id)) t.accumulate(a.id, g * t.value(b.id).transpose());
    if (t.needs_grad(b.id)) t.accumulate(b.id, t.value(a.id).transpose() * g);
  });
}

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  return a.tape->push(a.value() + b.value(), any_grad(a, b), [a, b](Tape& t, std::size_t self) {
    t.accumulate(a.id, t.grad(self));
    t.accumulate(b.id, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  return a.tape->push(a.value() - b.value(), any_grad(a, b), [a, b](Tape& t, std::size_t self) {
    t.accumulate(a.id, t.grad(self));
    t.accumulate(b.id, -t.grad(self));
  });
}

Var mul(Var a, Var b) {
  same_shape(a, b, "mul");
  return a.tape->push(a.value().cwiseProduct(b.value()), any_grad(a, b), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(a.id)) t.accumulate(a.id, g.cwiseProduct(t.value(b.id)));
    if (t.needs_grad(b.id)) t.accumulate(b.id, g.cwiseProduct(t.value(a.id)));
  });
}

Var add_row(Var a, Var row_vec) {
  same_tape(a, row_vec);
  if (row_vec.rows() != 1 || row_vec.cols() != a.cols()) throw NumericError("add_row: shape mismatch");
  Matrix y = a.value().rowwise() + row_vec.value().row(0);
  return a.tape->push(std::move(y), any_grad(a, row_vec), [a, row_vec](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    t.accumulate(a.id, g);
    if (t.needs_grad(row_vec.id)) t.accumulate(row_vec.id, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  return a.tape->push(a.value() * s, any_grad(a), [a, s](Tape& t, std::size_t self) {
    t.accumulate(a.id, t.grad(self) * s);
  });
}

Var add_const(Var a, double s) {
  Matrix y = a.value().array() + s;
  return a.tape->push(std::move(y), any_grad(a), [a](Tape& t, std::size_t self) {
    t.accumulate(a.id, t.grad(self));
  });
}

Var elu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var minimum(Var a, Var b) {
  same_shape(a, b, "minimum");
  Matrix y = a.value().cwiseMin(b.value());
  return a.tape->push(std::move(y), any_grad(a, b), [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(a.id);
    const Matrix& bv = t.value(b.id);
    Matrix ga = Matrix::Zero(g.rows(), g.cols());
    Matrix gb = Matrix::Zero(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      // Ties route the gradient to the first operand.
      if (av(i) <= bv(i)) {
        ga(i) = g(i);
      } else {
        gb(i) = g(i);
      }
    }
    t.accumulate(a.id, ga);
    t.accumulate(b.id, gb);
  });
}

Var clamp(Var a, double lo, double hi) {
  Matrix y = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape->push(std::move(y), any_grad(a), [a, lo, hi](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a.id);
    Matrix g = t.grad(self);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (x(i) < lo || x(i) > hi) g(i) = 0.0;
    }
    t.accumulate(a.id, g);
  });
}

Var pair_norm(Var a, double eps) {
  const Matrix& x = a.value();
  const auto n = static_cast<double>(x.rows());
  Matrix c = x.rowwise() - x.colwise().mean();
  const double s = std::sqrt(c.squaredNorm() / n + eps);
  Matrix y = c / s;
  return a.tape->push(std::move(y), any_grad(a), [a, n, s](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix c = t.value(self) * s;
    const double gc = g.cwiseProduct(c).sum();
    Matrix dc = g / s - c * (gc / (n * s * s * s));
    Matrix dx = dc.rowwise() - dc.colwise().mean();
    t.accumulate(a.id, dx);
  });
}

Var standardize_rows(Var a, double eps) {
  const Matrix& x = a.value();
  const auto d = static_cast<double>(x.cols());
  Matrix y(x.rows(), x.cols());
  Eigen::VectorXd inv_sd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().sum() / d;
    inv_sd(r) = 1.0 / std::sqrt(var + eps);
    y.row(r) = (x.row(r).array() - mu) * inv_sd(r);
  }
  return a.tape->push(std::move(y), any_grad(a), [a, inv_sd](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& yv = t.value(self);
    Matrix dx(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double mg = g.row(r).mean();
      const double mgy = g.row(r).cwiseProduct(yv.row(r)).mean();
      dx.row(r) = (g.row(r).array() - mg - yv.row(r).array() * mgy) * inv_sd(r);
    }
    t.accumulate(a.id, dx);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_cols: no operands");
  Tape* tape = parts.front().tape;
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool grad = false;
  for (const Var& p : parts) {
    if (p.tape != tape || p.rows() != rows) throw NumericError("concat_cols: shape mismatch");
    cols += p.cols();
    grad = grad || any_grad(p);
  }
  Matrix y(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    y.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return tape->push(std::move(y), grad, [ps](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Eigen::Index off = 0;
    for (const Var& p : ps) {
      const Eigen::Index c = t.value(p.id).cols();
      if (t.needs_grad(p.id)) t.accumulate(p.id, g.middleCols(off, c));
      off += c;
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw NumericError("slice_cols: out of range");
  Matrix y = a.value().middleCols(start, count);
  return a.tape->push(std::move(y), any_grad(a), [a, start, count](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a.id);
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    g.middleCols(start, count) = t.grad(self);
    t.accumulate(a.id, g);
  });
}

Var row(Var a, Eigen::Index r) {
  if (r < 0 || r >= a.rows()) throw NumericError("row: out of range");
  Matrix y = a.value().row(r);
  return a.tape->push(std::move(y), any_grad(a), [a, r](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a.id);
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    g.row(r) = t.grad(self).row(0);
    t.accumulate(a.id, g);
  });
}

Var mean_rows(Var a) {
  Matrix y = a.value().colwise().mean();
  return a.tape->push(std::move(y), any_grad(a), [a](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a.id);
    Matrix g = t.grad(self).replicate(x.rows(), 1) / static_cast<double>(x.rows());
    t.accumulate(a.id, g);
  });
}

Var mean_rows_of(Var a, std::span<const Eigen::Index> rows) {
  if (rows.empty()) throw NumericError("mean_rows_of: empty row set");
  Matrix y = Matrix::Zero(1, a.cols());
  for (Eigen::Index r : rows) {
    if (r < 0 || r >= a.rows()) throw NumericError("mean_rows_of: out of range");
    y += a.value().row(r);
  }
  const auto k = static_cast<double>(rows.size());
  y /= k;
  std::vector<Eigen::Index> rs(rows.begin(), rows.end());
  return a.tape->push(std::move(y), any_grad(a), [a, rs, k](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a.id);
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r : rs) g.row(r) += t.grad(self).row(0) / k;
    t.accumulate(a.id, g);
  });
}

Var pick(Var a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) throw NumericError("pick: out of range");
  Matrix y(1, 1);
  y(0, 0) = a.value()(r, c);
  return a.tape->push(std::move(y), any_grad(a), [a, r, c](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a.id);
    Matrix g = Matrix::Zero(x.rows(), x.cols());
    g(r, c) = t.grad(self)(0, 0);
    t.accumulate(a.id, g);
  });
}

Var sum(Var a) {
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape->push(std::move(y), any_grad(a), [a](Tape& t, std::size_t self) {
    const Matrix& x = t.value(a.id);
    t.accumulate(a.id, Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

namespace {

void check_mask(Var logits, std::span<const std::uint8_t> mask) {
  if (logits.rows() != 1 || static_cast<std::size_t>(logits.cols()) != mask.size()) {
    throw NumericError("masked softmax: logits must be a row matching the mask");
  }
}

// Log-probabilities over the unmasked entries; -inf elsewhere.
Matrix log_softmax_values(const Matrix& x, std::span<const std::uint8_t> mask) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) m = std::max(m, x(0, static_cast<Eigen::Index>(i)));
  }
  if (!std::isfinite(m)) throw NumericError("masked softmax: every entry is masked or logits are not finite");
  double z = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) z += std::exp(x(0, static_cast<Eigen::Index>(i)) - m);
  }
  const double lse = m + std::log(z);
  Matrix y(1, x.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    y(0, c) = mask[i] ? x(0, c) - lse : -std::numeric_limits<double>::infinity();
  }
  return y;
}

}  // namespace

Var masked_log_softmax(Var logits, std::span<const std::uint8_t> mask) {
  check_mask(logits, mask);
  Matrix y = log_softmax_values(logits.value(), mask);
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return logits.tape->push(std::move(y), any_grad(logits), [logits, m](Tape& t, std::size_t self) {
    const Matrix& lp = t.value(self);
    const Matrix& g = t.grad(self);
    double gsum = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i]) gsum += g(0, static_cast<Eigen::Index>(i));
    }
    Matrix dx = Matrix::Zero(1, lp.cols());
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      if (m[i]) dx(0, c) = g(0, c) - std::exp(lp(0, c)) * gsum;
    }
    t.accumulate(logits.id, dx);
  });
}

Var masked_entropy(Var logits, std::span<const std::uint8_t> mask) {
  check_mask(logits, mask);
  const Matrix lp = log_softmax_values(logits.value(), mask);
  double h = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    if (mask[i]) h -= std::exp(lp(0, c)) * lp(0, c);
  }
  Matrix y(1, 1);
  y(0, 0) = h;
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return logits.tape->push(std::move(y), any_grad(logits), [logits, m, lp, h](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    Matrix dx = Matrix::Zero(1, lp.cols());
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      if (m[i]) dx(0, c) = -g * std::exp(lp(0, c)) * (lp(0, c) + h);
    }
    t.accumulate(logits.id, dx);
  });
}

}  // namespace cmh::ad
