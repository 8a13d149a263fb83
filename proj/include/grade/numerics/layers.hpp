#pragma once

#include <random>
#include <string>
#include <vector>

#include "grade/numerics/ops.hpp"

namespace grade {

/// y = W x + b with W [out x in], b [out x 1].
struct LinearMap {
  LinearMap() = default;
  LinearMap(const std::string& name, Eigen::Index in, Eigen::Index out);

  Var forward(Tape& tape, Var x);
  Vec apply(const Vec& x) const { return linear(weight.value, bias.value.col(0), x); }
  /// Batched plain evaluation, one input per row.
  Mat apply_rows(const Mat& x) const;

  Eigen::Index in_features() const { return weight.cols(); }
  Eigen::Index out_features() const { return weight.rows(); }
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }

  Parameter weight;
  Parameter bias;
};

/// Single-layer gated recurrent unit:
///   r  = sigmoid(W_r x + U_r h + b_r)
///   u  = sigmoid(W_u x + U_u h + b_u)
///   h~ = tanh(W_h x + U_h (r * h) + b_h)
///   h' = (1 - u) * h + u * h~
struct GruCell {
  GruCell() = default;
  GruCell(const std::string& name, Eigen::Index input, Eigen::Index hidden);

  /// Batched step; x [n x input], h [n x hidden].
  Var forward(Tape& tape, Var x, Var h);
  Vec step(const Vec& x, const Vec& h) const;
  Mat step_rows(const Mat& x, const Mat& h) const;

  Eigen::Index input_size() const { return w_reset.cols(); }
  Eigen::Index hidden_size() const { return w_reset.rows(); }
  std::vector<Parameter*> parameters();

  Parameter w_reset, w_update, w_cand;
  Parameter u_reset, u_update, u_cand;
  Parameter b_reset, b_update, b_cand;
};

/// Fills every parameter with N(0, scale^2) draws.
void init_normal(const std::vector<Parameter*>& params, double scale, std::mt19937_64& rng);
/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for matrices, zero for biases.
void init_linear(LinearMap& map, std::mt19937_64& rng);
void init_gru(GruCell& cell, std::mt19937_64& rng);

}  // namespace grade
