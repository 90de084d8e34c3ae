#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cmh::ad {

using Matrix = Eigen::MatrixXd;

/// A named learnable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
/// insertion order is a valid topological order for the backward sweep.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Matrix value);
  /// Leaf bound to `p`; backward() adds its gradient into p.grad.
  Var param(Parameter& p);

  /// Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates.
  void backward(Var root);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` into the gradient of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Matrix& g);

  Var push(Matrix value, bool needs_grad, Backward backward);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool has_grad = false;
    Parameter* sink = nullptr;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);          // elementwise
Var add_row(Var a, Var row);    // a (r x c) + broadcast row (1 x c)
Var scale(Var a, double s);
Var add_const(Var a, double s);
Var elu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var square(Var a);
Var minimum(Var a, Var b);
Var clamp(Var a, double lo, double hi);

/// PairNorm with unit scale: centre columns, then divide by the root mean
/// squared row norm.
Var pair_norm(Var a, double eps = 1e-5);
/// Per-row zero mean / unit variance (LayerNorm without the affine part).
Var standardize_rows(Var a, double eps = 1e-5);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var row(Var a, Eigen::Index r);
Var mean_rows(Var a);
Var mean_rows_of(Var a, std::span<const Eigen::Index> rows);
Var pick(Var a, Eigen::Index r, Eigen::Index c);
Var sum(Var a);

/// Row-vector log-softmax restricted to entries with mask != 0. Masked
/// entries hold -inf and receive no gradient.
Var masked_log_softmax(Var logits, std::span<const std::uint8_t> mask);
/// Entropy of masked_log_softmax(logits, mask), as a 1x1 node.
Var masked_entropy(Var logits, std::span<const std::uint8_t> mask);

}  // namespace cmh::ad
