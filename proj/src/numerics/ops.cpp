#include "grade/numerics/ops.hpp"

#include <cmath>
#include <string>

#include "grade/numerics/kernels.hpp"

namespace grade::ops {

namespace {

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

void same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw Error("operands recorded on different tapes");
}

}  // namespace

Var add(Var a, Var b) {
  same_tape(a, b);
  same_shape(a, b, "add");
  int ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(Var a, Var b) {
  same_tape(a, b);
  same_shape(a, b, "sub");
  int ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

Var mul(Var a, Var b) {
  same_tape(a, b);
  same_shape(a, b, "mul");
  int ia = a.id(), ib = b.id();
  return a.tape().record(a.value().cwiseProduct(b.value()), {ia, ib},
                         [ia, ib](Tape& t, int self) {
                           t.accumulate(ia, t.grad(self).cwiseProduct(t.value(ib)));
                           t.accumulate(ib, t.grad(self).cwiseProduct(t.value(ia)));
                         });
}

Var scale(Var a, double s) {
  int ia = a.id();
  return a.tape().record(a.value() * s, {ia},
                         [ia, s](Tape& t, int self) { t.accumulate(ia, t.grad(self) * s); });
}

Var add_scalar(Var a, double s) {
  int ia = a.id();
  return a.tape().record((a.value().array() + s).matrix(), {ia},
                         [ia](Tape& t, int self) { t.accumulate(ia, t.grad(self)); });
}

Var matmul(Var a, Var b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  int ia = a.id(), ib = b.id();
  return a.tape().record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    if (t.needs_grad(ia)) t.accumulate(ia, t.grad(self) * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * t.grad(self));
  });
}

Var linear(Var x, Var w, Var b) {
  same_tape(x, w);
  same_tape(x, b);
  if (w.cols() != x.cols() || b.rows() != w.rows() || b.cols() != 1) {
    throw ShapeError("linear: x is " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + ", W is " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + ", b is " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
  Mat y = x.value() * w.value().transpose();
  y.rowwise() += b.value().col(0).transpose();
  int ix = x.id(), iw = w.id(), ib = b.id();
  return x.tape().record(std::move(y), {ix, iw, ib}, [ix, iw, ib](Tape& t, int self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ix)) t.accumulate(ix, g * t.value(iw));
    if (t.needs_grad(iw)) t.accumulate(iw, g.transpose() * t.value(ix));
    if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum().transpose());
  });
}

Var transpose(Var a) {
  int ia = a.id();
  return a.tape().record(a.value().transpose(), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad(self).transpose());
  });
}

Var sigmoid(Var a) {
  int ia = a.id();
  Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape().record(std::move(y), {ia}, [ia](Tape& t, int self) {
    const auto& y = t.value(self).array();
    t.accumulate(ia, (t.grad(self).array() * y * (1.0 - y)).matrix());
  });
}

Var tanh(Var a) {
  int ia = a.id();
  return a.tape().record(a.value().array().tanh().matrix(), {ia}, [ia](Tape& t, int self) {
    const auto& y = t.value(self).array();
    t.accumulate(ia, (t.grad(self).array() * (1.0 - y * y)).matrix());
  });
}

Var exp(Var a) {
  int ia = a.id();
  return a.tape().record(a.value().array().exp().matrix(), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var log(Var a, double floor) {
  int ia = a.id();
  Mat y = a.value().cwiseMax(floor).array().log().matrix();
  return a.tape().record(std::move(y), {ia}, [ia, floor](Tape& t, int self) {
    const Mat& x = t.value(ia);
    Mat g = (x.array() > floor).select(t.grad(self).array() / x.array(), 0.0).matrix();
    t.accumulate(ia, g);
  });
}

Var clamp(Var a, double lo, double hi) {
  int ia = a.id();
  Mat y = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape().record(std::move(y), {ia}, [ia, lo, hi](Tape& t, int self) {
    const auto& x = t.value(ia).array();
    Mat g = ((x >= lo) && (x <= hi)).select(t.grad(self).array(), 0.0).matrix();
    t.accumulate(ia, g);
  });
}

Var row_softmax(Var a) {
  int ia = a.id();
  return a.tape().record(grade::row_softmax(a.value()), {ia}, [ia](Tape& t, int self) {
    const Mat& s = t.value(self);
    const Mat& g = t.grad(self);
    Eigen::VectorXd dot = s.cwiseProduct(g).rowwise().sum();
    Mat gi = s.cwiseProduct(g - dot.replicate(1, g.cols()));
    t.accumulate(ia, gi);
  });
}

Var row_log_softmax(Var a) {
  int ia = a.id();
  return a.tape().record(grade::row_log_softmax(a.value()), {ia}, [ia](Tape& t, int self) {
    Mat s = t.value(self).array().exp().matrix();
    const Mat& g = t.grad(self);
    Eigen::VectorXd gsum = g.rowwise().sum();
    Mat gi = g - s.cwiseProduct(gsum.replicate(1, g.cols()));
    t.accumulate(ia, gi);
  });
}

Var block_row_softmax(Var a, Eigen::Index block) {
  if (block < 1 || a.cols() != block * block) {
    throw ShapeError("block_row_softmax: expected " + std::to_string(block * block) +
                     " columns, got " + std::to_string(a.cols()));
  }
  const Mat& x = a.value();
  require_finite(x, "softmax input");
  Mat y(x.rows(), x.cols());
  for (Eigen::Index n = 0; n < x.rows(); ++n) {
    for (Eigen::Index i = 0; i < block; ++i) {
      auto seg = x.row(n).segment(i * block, block);
      Eigen::RowVectorXd e = (seg.array() - seg.maxCoeff()).exp();
      y.row(n).segment(i * block, block) = e / e.sum();
    }
  }
  int ia = a.id();
  return a.tape().record(std::move(y), {ia}, [ia, block](Tape& t, int self) {
    const Mat& s = t.value(self);
    const Mat& g = t.grad(self);
    Mat gi(s.rows(), s.cols());
    for (Eigen::Index n = 0; n < s.rows(); ++n) {
      for (Eigen::Index i = 0; i < block; ++i) {
        auto ss = s.row(n).segment(i * block, block);
        auto gg = g.row(n).segment(i * block, block);
        double dot = ss.dot(gg);
        gi.row(n).segment(i * block, block) = ss.array() * (gg.array() - dot);
      }
    }
    t.accumulate(ia, gi);
  });
}

Var mixture_update(Var pi, Var transitions) {
  same_tape(pi, transitions);
  const Eigen::Index k = pi.cols();
  if (transitions.rows() != pi.rows() || transitions.cols() != k * k) {
    throw ShapeError("mixture_update: transitions must be n x K*K");
  }
  const Mat& p = pi.value();
  const Mat& a = transitions.value();
  Mat y = Mat::Zero(p.rows(), k);
  for (Eigen::Index n = 0; n < p.rows(); ++n) {
    for (Eigen::Index i = 0; i < k; ++i) {
      y.row(n) += p(n, i) * a.row(n).segment(i * k, k);
    }
  }
  int ip = pi.id(), ia = transitions.id();
  return pi.tape().record(std::move(y), {ip, ia}, [ip, ia, k](Tape& t, int self) {
    const Mat& g = t.grad(self);
    const Mat& p = t.value(ip);
    const Mat& a = t.value(ia);
    if (t.needs_grad(ip)) {
      Mat gp(p.rows(), k);
      for (Eigen::Index n = 0; n < p.rows(); ++n) {
        for (Eigen::Index i = 0; i < k; ++i) gp(n, i) = a.row(n).segment(i * k, k).dot(g.row(n));
      }
      t.accumulate(ip, gp);
    }
    if (t.needs_grad(ia)) {
      Mat ga(a.rows(), a.cols());
      for (Eigen::Index n = 0; n < p.rows(); ++n) {
        for (Eigen::Index i = 0; i < k; ++i) ga.row(n).segment(i * k, k) = p(n, i) * g.row(n);
      }
      t.accumulate(ia, ga);
    }
  });
}

Var gather_rows(Var a, const std::vector<int>& rows) {
  const Mat& x = a.value();
  Mat y(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    y.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
  }
  int ia = a.id();
  return a.tape().record(std::move(y), {ia}, [ia, rows](Tape& t, int self) {
    const Mat& g = t.grad(self);
    Mat gi = Mat::Zero(t.value(ia).rows(), t.value(ia).cols());
    for (std::size_t r = 0; r < rows.size(); ++r) gi.row(rows[r]) += g.row(static_cast<Eigen::Index>(r));
    t.accumulate(ia, gi);
  });
}

Var sum(Var a) {
  int ia = a.id();
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape().record(std::move(y), {ia}, [ia](Tape& t, int self) {
    const Mat& x = t.value(ia);
    t.accumulate(ia, Mat::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

Var row_sum(Var a) {
  int ia = a.id();
  return a.tape().record(a.value().rowwise().sum(), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad(self).replicate(1, t.value(ia).cols()));
  });
}

Var gaussian_sample(Var mean, Var log_var, const Mat& noise) {
  same_shape(mean, log_var, "gaussian_sample");
  if (noise.rows() != mean.rows() || noise.cols() != mean.cols()) {
    throw ShapeError("gaussian_sample: noise shape mismatch");
  }
  Mat sd = (0.5 * log_var.value().array()).exp().matrix();
  Mat y = mean.value() + sd.cwiseProduct(noise);
  int im = mean.id(), il = log_var.id();
  return mean.tape().record(std::move(y), {im, il}, [im, il, sd, noise](Tape& t, int self) {
    const Mat& g = t.grad(self);
    t.accumulate(im, g);
    t.accumulate(il, (0.5 * g.array() * sd.array() * noise.array()).matrix());
  });
}

Var gumbel_softmax(Var logits, double tau, const Mat& uniform_noise) {
  if (!(tau > 0.0)) throw Error("gumbel_softmax: temperature must be positive");
  if (uniform_noise.rows() != logits.rows() || uniform_noise.cols() != logits.cols()) {
    throw ShapeError("gumbel_softmax: noise shape mismatch");
  }
  Var g = logits.tape().constant(gumbel_from_uniform(uniform_noise));
  return row_softmax(scale(add(logits, g), 1.0 / tau));
}

Var kl_gaussian_rows(Var q_mean, Var q_log_var, Var p_mean, Var p_log_var) {
  same_shape(q_mean, q_log_var, "kl_gaussian");
  same_shape(q_mean, p_mean, "kl_gaussian");
  same_shape(q_mean, p_log_var, "kl_gaussian");
  const auto qm = q_mean.value().array();
  const auto ql = q_log_var.value().array();
  const auto pm = p_mean.value().array();
  const auto pl = p_log_var.value().array();
  Mat terms = (0.5 * (pl - ql + (ql.exp() + (qm - pm).square()) / pl.exp() - 1.0)).matrix();
  int iqm = q_mean.id(), iql = q_log_var.id(), ipm = p_mean.id(), ipl = p_log_var.id();
  return q_mean.tape().record(
      terms.rowwise().sum(), {iqm, iql, ipm, ipl}, [iqm, iql, ipm, ipl](Tape& t, int self) {
        const auto qm = t.value(iqm).array();
        const auto ql = t.value(iql).array();
        const auto pm = t.value(ipm).array();
        const auto pl = t.value(ipl).array();
        Mat g = t.grad(self).replicate(1, t.value(iqm).cols());
        auto ga = g.array();
        auto vp = pl.exp();
        auto d = qm - pm;
        t.accumulate(iqm, (ga * d / vp).matrix());
        t.accumulate(ipm, (-ga * d / vp).matrix());
        t.accumulate(iql, (ga * 0.5 * (ql.exp() / vp - 1.0)).matrix());
        t.accumulate(ipl, (ga * 0.5 * (1.0 - (ql.exp() + d.square()) / vp)).matrix());
      });
}

Var kl_gaussian_rows(Var q_mean, Var q_log_var, Var p_mean, double p_log_var) {
  Var plv = q_mean.tape().constant(Mat::Constant(q_mean.rows(), q_mean.cols(), p_log_var));
  return kl_gaussian_rows(q_mean, q_log_var, p_mean, plv);
}

Var kl_categorical_rows(Var q, Var p) {
  same_tape(q, p);
  same_shape(q, p, "kl_categorical");
  const Mat& qv = q.value();
  const Mat& pv = p.value();
  if ((qv.array() < 0.0).any() || (pv.array() < 0.0).any()) {
    throw Error("kl_categorical: negative probability");
  }
  Mat terms = (qv.array() > 0.0)
                  .select(qv.array() * (qv.array().max(kLogFloor).log() -
                                        pv.array().max(kLogFloor).log()),
                          0.0)
                  .matrix();
  int iq = q.id(), ip = p.id();
  return q.tape().record(terms.rowwise().sum(), {iq, ip}, [iq, ip](Tape& t, int self) {
    const auto qa = t.value(iq).array();
    const auto pa = t.value(ip).array();
    Mat g = t.grad(self).replicate(1, t.value(iq).cols());
    auto ga = g.array();
    if (t.needs_grad(iq)) {
      auto log_p = pa.max(kLogFloor).log();
      Mat gq = (qa > kLogFloor)
                   .select(ga * (qa.max(kLogFloor).log() + 1.0 - log_p),
                           ga * (std::log(kLogFloor) - log_p))
                   .matrix();
      t.accumulate(iq, gq);
    }
    if (t.needs_grad(ip)) {
      Mat gp = (pa > kLogFloor).select(-ga * qa / pa, 0.0).matrix();
      t.accumulate(ip, gp);
    }
  });
}

}  // namespace grade::ops
