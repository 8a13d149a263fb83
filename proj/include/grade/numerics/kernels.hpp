#pragma once

// Plain (non-recorded) numeric kernels. The Tape ops reuse these for their
// forward passes.

#include "grade/numerics/tape.hpp"

namespace grade {

/// Floor applied before every log.
inline constexpr double kLogFloor = 1e-12;
/// Uniform noise for Gumbel draws is clamped into (eps, 1 - eps).
inline constexpr double kGumbelEps = 1e-10;

/// Diagonal Gaussian with log-variance as the scale parameter.
struct GaussianParams {
  Vec mean;
  Vec log_var;
};

void require_finite(const Mat& m, const char* what);

Vec softmax(const Vec& logits);
Mat row_softmax(const Mat& logits);
Mat row_log_softmax(const Mat& logits);

/// y = W x + b
Vec linear(const Mat& w, const Vec& b, const Vec& x);

Vec gaussian_sample(const GaussianParams& g, const Vec& noise);

/// -log(-log(u)) with u clamped into (kGumbelEps, 1 - kGumbelEps).
Mat gumbel_from_uniform(const Mat& uniform);
Vec gumbel_softmax(const Vec& logits, double tau, const Vec& uniform_noise);

double kl_gaussian_diag(const GaussianParams& q, const GaussianParams& p);
double kl_categorical(const Vec& q, const Vec& p);

}  // namespace grade
