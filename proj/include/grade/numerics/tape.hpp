#pragma once

// Minimal reverse-mode differentiation over dense double matrices.
//
// A Tape records every operation applied to Vars in creation order; since
// inputs always precede outputs, a reverse sweep over the record is a valid
// topological order. Leaves created from a Parameter accumulate their
// gradient back into Parameter::grad on backward().

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grade/error.hpp"

namespace grade {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// A trainable array and its accumulated gradient.
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Mat value);

  const std::string& name() const noexcept { return name_; }
  Eigen::Index rows() const noexcept { return value.rows(); }
  Eigen::Index cols() const noexcept { return value.cols(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }

  Mat value;
  Mat grad;

 private:
  std::string name_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Scalar value of a 1x1 node.
  double item() const;
  Tape& tape() const { return *tape_; }
  int id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  /// Leaf reading `p.value` by reference; gradient flows into `p.grad`.
  Var param(Parameter& p);

  /// Records a node. `fn` is skipped when no input requires a gradient.
  Var record(Mat value, std::vector<int> inputs, BackwardFn fn);

  /// Seeds d(out)/d(out) = 1 and accumulates gradients into parameters.
  void backward(Var out);

  const Mat& value(int id) const;
  /// Gradient buffer of node `id`; only valid during backward.
  const Mat& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// grad(id) += delta, when the node participates in differentiation.
  template <typename Expr>
  void accumulate(int id, const Expr& delta) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.needs_grad) n.grad += delta;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Parameter* param = nullptr;
    Mat grad;
    std::vector<int> inputs;
    BackwardFn backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

}  // namespace grade
