#include <cmath>

#include "grade/inference.hpp"

namespace grade {

namespace {

/// Flattened K*K transition rows as a (n*K) x K matrix of distributions.
Mat unflatten_transitions(const Mat& flat, Eigen::Index k) {
  Mat out(flat.rows() * k, k);
  for (Eigen::Index n = 0; n < flat.rows(); ++n) {
    for (Eigen::Index i = 0; i < k; ++i) out.row(n * k + i) = flat.row(n).segment(i * k, k);
  }
  return out;
}

RowVec q_row(const Edge& edge, const StepView& view, const GenerativeParams& gen) {
  return amortized_z_posterior(view.pi_prev.row(edge.src), view.phi.row(edge.src).transpose(),
                               view.phi.row(edge.dst).transpose(), gen);
}

struct ChainVars {
  Var x_node, x_comm, h_node, h_comm, pi;
};

Var elbo_core(Tape& tape, GradeModel& model, const ChainVars& prev, const StepNoise& noise,
              std::span<const Edge> batch, std::size_t step_edge_count,
              const Mat& gumbel_uniform, ElboTerms* terms, const SimplexObserver* observer,
              double kl_z_weight) {
  using namespace ops;
  if (batch.empty()) throw Error("elbo_batch: empty batch");
  if (step_edge_count < batch.size()) throw Error("elbo_batch: batch larger than its step");
  auto& gen = model.gen;
  const Eigen::Index k = gen.num_communities;
  const auto n = static_cast<double>(model.num_vertices());
  if (gumbel_uniform.rows() != static_cast<Eigen::Index>(batch.size()) ||
      gumbel_uniform.cols() != k) {
    throw ShapeError("elbo_batch: Gumbel noise must be |batch| x K");
  }

  Var x_node = prev.x_node, x_comm = prev.x_comm;
  auto node = posterior_forward(tape, model.var.node, prev.h_node, x_node);
  auto comm = posterior_forward(tape, model.var.comm, prev.h_comm, x_comm);
  Var phi = gaussian_sample(node.mean, node.log_var, noise.node);
  Var beta = gaussian_sample(comm.mean, comm.log_var, noise.comm);

  Var kl_node = sum(kl_gaussian_rows(node.mean, node.log_var, x_node, 2.0 * std::log(gen.sigma)));
  Var kl_comm = sum(kl_gaussian_rows(comm.mean, comm.log_var, x_comm, 2.0 * std::log(gen.gamma)));

  std::vector<int> src(batch.size()), dst(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    src[i] = batch[i].src;
    dst[i] = batch[i].dst;
  }
  Var phi_v = gather_rows(phi, src);
  Var phi_c = gather_rows(phi, dst);
  Var pi_prev_v = gather_rows(prev.pi, src);

  // Prior p(z | v) = pi_v^t from the source-only transition.
  Var a_prior = block_row_softmax(gen.psi.forward(tape, phi_v), k);
  Var p_z = mixture_update(pi_prev_v, a_prior);
  // Amortized q(z | v, c) from the combined embedding.
  Var a_post = block_row_softmax(gen.psi.forward(tape, scale(add(phi_v, phi_c), 0.5)), k);
  Var q_z = mixture_update(pi_prev_v, a_post);

  Var log_theta = row_log_softmax(gen.zeta.forward(tape, beta));  // K x N
  Var log_theta_c = gather_rows(transpose(log_theta), dst);       // B x K

  Var z = gumbel_softmax(log(q_z), model.config.tau, gumbel_uniform);
  Var recon = sum(mul(z, log_theta_c));
  Var kl_z = sum(kl_categorical_rows(q_z, p_z));

  const double weight = static_cast<double>(batch.size()) / static_cast<double>(step_edge_count);
  Var kl_embed = add(kl_comm, scale(kl_node, 1.0 / n));
  Var loss = add(sub(kl_z_weight == 1.0 ? kl_z : scale(kl_z, kl_z_weight), recon),
                 scale(kl_embed, weight));

  if (terms) {
    terms->reconstruction = recon.item();
    terms->kl_z = kl_z.item();
    terms->kl_comm = kl_comm.item();
    terms->kl_node = kl_node.item();
    terms->kl_weight = weight;
    terms->loss = loss.item();
  }
  if (observer && *observer) {
    (*observer)("q_z", q_z.value());
    (*observer)("pi", p_z.value());
    (*observer)("A", unflatten_transitions(a_prior.value(), k));
    (*observer)("A", unflatten_transitions(a_post.value(), k));
    (*observer)("theta", log_theta.value().array().exp().matrix());
    (*observer)("z_sample", z.value());
  }
  return loss;
}

}  // namespace

Var elbo_batch(Tape& tape, GradeModel& model, const StepState& prev, const StepNoise& noise,
               std::span<const Edge> batch, std::size_t step_edge_count,
               const Mat& gumbel_uniform, ElboTerms* terms, const SimplexObserver* observer,
               double kl_z_weight) {
  const bool first = prev.t == 0;
  ChainVars chain{first ? tape.param(model.gen.phi0) : tape.constant(prev.phi),
                  first ? tape.param(model.gen.beta0) : tape.constant(prev.beta),
                  tape.constant(prev.h_node), tape.constant(prev.h_comm),
                  tape.constant(prev.pi)};
  return elbo_core(tape, model, chain, noise, batch, step_edge_count, gumbel_uniform, terms,
                   observer, kl_z_weight);
}

Var elbo_batch_unrolled(Tape& tape, GradeModel& model, std::span<const StepNoise> noises,
                        std::span<const Edge> batch, std::size_t step_edge_count,
                        const Mat& gumbel_uniform, ElboTerms* terms,
                        const SimplexObserver* observer, double kl_z_weight) {
  using namespace ops;
  if (noises.empty()) throw Error("elbo_batch_unrolled: no steps");
  const StepState s0 = initial_state(model);
  const Eigen::Index k = model.gen.num_communities;
  ChainVars chain{tape.param(model.gen.phi0), tape.param(model.gen.beta0),
                  tape.constant(s0.h_node), tape.constant(s0.h_comm), tape.constant(s0.pi)};
  for (std::size_t i = 0; i + 1 < noises.size(); ++i) {
    auto node = posterior_forward(tape, model.var.node, chain.h_node, chain.x_node);
    auto comm = posterior_forward(tape, model.var.comm, chain.h_comm, chain.x_comm);
    Var phi = gaussian_sample(node.mean, node.log_var, noises[i].node);
    Var a = block_row_softmax(model.gen.psi.forward(tape, phi), k);
    chain = {phi, gaussian_sample(comm.mean, comm.log_var, noises[i].comm), node.hidden,
             comm.hidden, mixture_update(chain.pi, a)};
  }
  return elbo_core(tape, model, chain, noises.back(), batch, step_edge_count, gumbel_uniform,
                   terms, observer, kl_z_weight);
}

double exact_reconstruction(const Edge& edge, const StepView& view, const GenerativeParams& gen) {
  RowVec q = q_row(edge, view, gen);
  return q.dot(view.log_theta.col(edge.dst));
}

double exact_edge_elbo(const Edge& edge, const StepView& view, const GenerativeParams& gen) {
  RowVec q = q_row(edge, view, gen);
  RowVec p = view.pi.row(edge.src);
  return q.dot(view.log_theta.col(edge.dst)) - kl_categorical(q.transpose(), p.transpose());
}

double soft_reconstruction_sample(const Edge& edge, const StepView& view,
                                  const GenerativeParams& gen, double tau,
                                  const Vec& uniform_noise) {
  RowVec q = q_row(edge, view, gen);
  Vec log_q = q.transpose().cwiseMax(kLogFloor).array().log();
  Vec z = gumbel_softmax(log_q, tau, uniform_noise);
  return z.dot(view.log_theta.col(edge.dst));
}

}  // namespace grade
