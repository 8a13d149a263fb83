#pragma once

// Differentiable operations on Tape variables. All arrays are row-major in
// the logical sense: a batch of vectors is a matrix with one vector per row.

#include <vector>

#include "grade/numerics/tape.hpp"

namespace grade::ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var matmul(Var a, Var b);
/// x [n x in], W [out x in], b [out x 1] -> x W^T + 1 b^T  [n x out]
Var linear(Var x, Var w, Var b);
Var transpose(Var a);

Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
/// log(max(a, floor)); zero gradient where the clamp is active.
Var log(Var a, double floor = 1e-12);
/// Clamp into [lo, hi]; zero gradient outside.
Var clamp(Var a, double lo, double hi);

Var row_softmax(Var a);
Var row_log_softmax(Var a);
/// Each row holds `block` consecutive groups of `block` logits; softmax is
/// applied within each group (a row-major K x K matrix per row).
Var block_row_softmax(Var a, Eigen::Index block);
/// out[n, j] = sum_i pi[n, i] * A[n, i*K + j]   (row vector times K x K).
Var mixture_update(Var pi, Var transitions);

Var gather_rows(Var a, const std::vector<int>& rows);

Var sum(Var a);
/// Row-wise sum -> [n x 1].
Var row_sum(Var a);

/// mean + exp(0.5 * log_var) * noise, noise held constant.
Var gaussian_sample(Var mean, Var log_var, const Mat& noise);
/// softmax((logits + g) / tau) per row, g = -log(-log(u)) from uniform noise u.
Var gumbel_softmax(Var logits, double tau, const Mat& uniform_noise);

/// Per-row KL(N(qm, exp(qlv)) || N(pm, exp(plv))) summed over columns -> [n x 1].
Var kl_gaussian_rows(Var q_mean, Var q_log_var, Var p_mean, Var p_log_var);
/// Same with a scalar prior log-variance.
Var kl_gaussian_rows(Var q_mean, Var q_log_var, Var p_mean, double p_log_var);
/// Per-row KL(q || p) for categorical rows -> [n x 1]; 0 log 0 := 0.
Var kl_categorical_rows(Var q, Var p);

}  // namespace grade::ops
