#include <cmath>

#include "grade/numerics/optim.hpp"

namespace grade {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.learning_rate > 0.0) || config_.decay_every < 1) {
    throw Error("Adam: learning rate and decay interval must be positive");
  }
  for (auto* p : params_) {
    m_.push_back(Mat::Zero(p->rows(), p->cols()));
    v_.push_back(Mat::Zero(p->rows(), p->cols()));
    if (p->grad.rows() != p->rows() || p->grad.cols() != p->cols()) p->zero_grad();
  }
}

double Adam::current_learning_rate() const {
  return config_.learning_rate *
         std::pow(config_.decay, static_cast<double>(iterations_ / config_.decay_every));
}

void Adam::step() {
  const double lr = current_learning_rate();
  ++iterations_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(iterations_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(iterations_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grad;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m_[i].array() / bc1) /
                       ((v_[i].array() / bc2).sqrt() + config_.epsilon);
    p.grad.setZero();
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->grad.setZero();
}

GradientCheckResult check_gradients(const std::function<Var(Tape&)>& f,
                                    const std::vector<Parameter*>& params, double step) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    Var out = f(tape);
    if (!std::isfinite(out.item())) throw Error("check_gradients: non-finite objective");
    tape.backward(out);
  }
  auto eval = [&]() {
    Tape tape;
    double v = f(tape).item();
    if (!std::isfinite(v)) throw Error("check_gradients: non-finite objective");
    return v;
  };

  GradientCheckResult result;
  for (auto* p : params) {
    Mat analytic = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + step;
      const double up = eval();
      x = saved - step;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_relative_error || result.worst_index < 0) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name();
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
    p->zero_grad();
  }
  return result;
}

}  // namespace grade
