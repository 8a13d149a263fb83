#include "grade/numerics/tape.hpp"

namespace grade {

Parameter::Parameter(std::string name, Mat v)
    : value(std::move(v)), grad(Mat::Zero(value.rows(), value.cols())), name_(std::move(name)) {}

const Mat& Var::value() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->value(id_);
}

double Var::item() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("item() on a " + std::to_string(v.rows()) + "x" +
                     std::to_string(v.cols()) + " value");
  }
  return v(0, 0);
}

Var Tape::constant(Mat value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Mat value, std::vector<int> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (int i : inputs) {
    if (nodes_[static_cast<std::size_t>(i)].needs_grad) n.needs_grad = true;
  }
  n.inputs = std::move(inputs);
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Mat& Tape::value(int id) const {
  const auto& n = nodes_[static_cast<std::size_t>(id)];
  return n.external ? *n.external : n.value;
}

void Tape::backward(Var out) {
  if (out.tape_ != this) throw Error("backward on a Var from another tape");
  const auto& ov = value(out.id_);
  if (ov.rows() != 1 || ov.cols() != 1) throw ShapeError("backward needs a scalar output");
  for (auto& n : nodes_) {
    if (n.needs_grad) {
      const Mat& v = n.external ? *n.external : n.value;
      n.grad.setZero(v.rows(), v.cols());
    }
  }
  auto& root = nodes_[static_cast<std::size_t>(out.id_)];
  if (!root.needs_grad) return;
  root.grad(0, 0) = 1.0;
  for (int i = out.id_; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) n.param->grad += n.grad;
  }
}

}  // namespace grade
