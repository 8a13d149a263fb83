#include "grade/numerics/kernels.hpp"

#include <cmath>
#include <string>

namespace grade {

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw Error(std::string("non-finite values in ") + what);
}

Vec softmax(const Vec& logits) {
  require_finite(logits, "softmax input");
  Vec e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Mat row_softmax(const Mat& logits) {
  require_finite(logits, "softmax input");
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    Eigen::RowVectorXd e = (row.array() - row.maxCoeff()).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

Mat row_log_softmax(const Mat& logits) {
  require_finite(logits, "log-softmax input");
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    double m = row.maxCoeff();
    double lse = m + std::log((row.array() - m).exp().sum());
    out.row(i) = row.array() - lse;
  }
  return out;
}

Vec linear(const Mat& w, const Vec& b, const Vec& x) {
  if (w.cols() != x.size() || w.rows() != b.size()) {
    throw ShapeError("linear: W is " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + ", b has " + std::to_string(b.size()) +
                     ", x has " + std::to_string(x.size()));
  }
  return w * x + b;
}

Vec gaussian_sample(const GaussianParams& g, const Vec& noise) {
  if (g.mean.size() != g.log_var.size() || g.mean.size() != noise.size()) {
    throw ShapeError("gaussian_sample: shape mismatch");
  }
  return g.mean.array() + (0.5 * g.log_var.array()).exp() * noise.array();
}

Mat gumbel_from_uniform(const Mat& uniform) {
  Mat u = uniform.cwiseMax(kGumbelEps).cwiseMin(1.0 - kGumbelEps);
  return -(-u.array().log()).log();
}

Vec gumbel_softmax(const Vec& logits, double tau, const Vec& uniform_noise) {
  if (!(tau > 0.0)) throw Error("gumbel_softmax: temperature must be positive");
  if (logits.size() != uniform_noise.size()) throw ShapeError("gumbel_softmax: shape mismatch");
  Vec g = gumbel_from_uniform(uniform_noise);
  return softmax((logits + g) / tau);
}

double kl_gaussian_diag(const GaussianParams& q, const GaussianParams& p) {
  const auto n = q.mean.size();
  if (q.log_var.size() != n || p.mean.size() != n || p.log_var.size() != n) {
    throw ShapeError("kl_gaussian_diag: dimension mismatch");
  }
  auto vq = q.log_var.array().exp();
  auto vp = p.log_var.array().exp();
  auto d = q.mean.array() - p.mean.array();
  return 0.5 * (p.log_var.array() - q.log_var.array() + (vq + d * d) / vp - 1.0).sum();
}

double kl_categorical(const Vec& q, const Vec& p) {
  if (q.size() != p.size()) throw ShapeError("kl_categorical: dimension mismatch");
  if ((q.array() < 0.0).any() || (p.array() < 0.0).any()) {
    throw Error("kl_categorical: negative probability");
  }
  double kl = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    if (q[k] > 0.0) {
      kl += q[k] * (std::log(std::max(q[k], kLogFloor)) - std::log(std::max(p[k], kLogFloor)));
    }
  }
  return std::max(kl, 0.0);
}

}  // namespace grade
