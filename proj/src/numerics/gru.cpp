#include <cmath>

#include "grade/numerics/kernels.hpp"
#include "grade/numerics/layers.hpp"

namespace grade {

namespace {

Mat sigmoid_plain(const Mat& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

Mat affine_rows(const Mat& x, const Mat& w, const Mat& b) {
  Mat y = x * w.transpose();
  y.rowwise() += b.col(0).transpose();
  return y;
}

void fill_uniform(Mat& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

}  // namespace

LinearMap::LinearMap(const std::string& name, Eigen::Index in, Eigen::Index out)
    : weight(name + ".weight", Mat::Zero(out, in)), bias(name + ".bias", Mat::Zero(out, 1)) {}

Var LinearMap::forward(Tape& tape, Var x) {
  return ops::linear(x, tape.param(weight), tape.param(bias));
}

Mat LinearMap::apply_rows(const Mat& x) const {
  if (x.cols() != weight.cols()) throw ShapeError("LinearMap: input width mismatch");
  return affine_rows(x, weight.value, bias.value);
}

GruCell::GruCell(const std::string& name, Eigen::Index input, Eigen::Index hidden)
    : w_reset(name + ".w_reset", Mat::Zero(hidden, input)),
      w_update(name + ".w_update", Mat::Zero(hidden, input)),
      w_cand(name + ".w_cand", Mat::Zero(hidden, input)),
      u_reset(name + ".u_reset", Mat::Zero(hidden, hidden)),
      u_update(name + ".u_update", Mat::Zero(hidden, hidden)),
      u_cand(name + ".u_cand", Mat::Zero(hidden, hidden)),
      b_reset(name + ".b_reset", Mat::Zero(hidden, 1)),
      b_update(name + ".b_update", Mat::Zero(hidden, 1)),
      b_cand(name + ".b_cand", Mat::Zero(hidden, 1)) {}

std::vector<Parameter*> GruCell::parameters() {
  return {&w_reset, &w_update, &w_cand, &u_reset, &u_update,
          &u_cand,  &b_reset,  &b_update, &b_cand};
}

Var GruCell::forward(Tape& tape, Var x, Var h) {
  if (x.cols() != input_size() || h.cols() != hidden_size() || x.rows() != h.rows()) {
    throw ShapeError("GruCell: expected x [n x " + std::to_string(input_size()) +
                     "], h [n x " + std::to_string(hidden_size()) + "]");
  }
  using namespace ops;
  Var zero_bias = tape.constant(Mat::Zero(hidden_size(), 1));
  Var r = sigmoid(add(linear(x, tape.param(w_reset), tape.param(b_reset)),
                      linear(h, tape.param(u_reset), zero_bias)));
  Var u = sigmoid(add(linear(x, tape.param(w_update), tape.param(b_update)),
                      linear(h, tape.param(u_update), zero_bias)));
  Var cand = tanh(add(linear(x, tape.param(w_cand), tape.param(b_cand)),
                      linear(mul(r, h), tape.param(u_cand), zero_bias)));
  // h' = h + u * (h~ - h)
  return add(h, mul(u, sub(cand, h)));
}

Mat GruCell::step_rows(const Mat& x, const Mat& h) const {
  if (x.cols() != input_size() || h.cols() != hidden_size() || x.rows() != h.rows()) {
    throw ShapeError("GruCell: shape mismatch");
  }
  Mat r = sigmoid_plain(affine_rows(x, w_reset.value, b_reset.value) +
                        h * u_reset.value.transpose());
  Mat u = sigmoid_plain(affine_rows(x, w_update.value, b_update.value) +
                        h * u_update.value.transpose());
  Mat cand = (affine_rows(x, w_cand.value, b_cand.value) +
              r.cwiseProduct(h) * u_cand.value.transpose())
                 .array()
                 .tanh()
                 .matrix();
  return h + u.cwiseProduct(cand - h);
}

Vec GruCell::step(const Vec& x, const Vec& h) const {
  return step_rows(x.transpose(), h.transpose()).row(0).transpose();
}

void init_normal(const std::vector<Parameter*>& params, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, scale);
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = dist(rng);
    p->zero_grad();
  }
}

void init_linear(LinearMap& map, std::mt19937_64& rng) {
  fill_uniform(map.weight.value, 1.0 / std::sqrt(static_cast<double>(map.in_features())), rng);
  map.bias.value.setZero();
  map.weight.zero_grad();
  map.bias.zero_grad();
}

void init_gru(GruCell& cell, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cell.hidden_size()));
  for (auto* p : cell.parameters()) {
    if (p->cols() == 1) {
      p->value.setZero();
    } else {
      fill_uniform(p->value, bound, rng);
    }
    p->zero_grad();
  }
}

}  // namespace grade
