#include <algorithm>
#include <cmath>

#include "grade/inference.hpp"

namespace grade {

void TrainConfig::validate() const {
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (batch_edges < 1) throw Error("batch_edges must be positive");
  if (!(learning_rate > 0.0) || !(lr_decay > 0.0) || decay_every < 1) {
    throw Error("learning-rate schedule must be positive");
  }
  if (!(tau > 0.0)) throw Error("Gumbel temperature must be positive");
  if (!(gamma > 0.0) || !(sigma > 0.0)) throw Error("gamma and sigma must be positive");
  if (num_communities < 1 || embed_dim < 1 || hidden_dim < 1) {
    throw Error("K, L and H must be positive");
  }
  if (eval_every < 0) throw Error("eval_every must be non-negative");
  if (kl_hold_epochs < 0 || kl_ramp_epochs < 0) throw Error("KL schedule must be non-negative");
}

double TrainConfig::kl_z_weight(int epoch) const {
  const int ramped = epoch - kl_hold_epochs;
  if (ramped <= 0) return 0.0;
  if (kl_ramp_epochs == 0) return 1.0;
  return std::min(1.0, static_cast<double>(ramped) / kl_ramp_epochs);
}

RecurrentPosterior::RecurrentPosterior(const std::string& name, int embed_dim, int hidden_dim)
    : gru(name + ".gru", embed_dim, hidden_dim),
      mean_head(name + ".mean_head", hidden_dim, embed_dim),
      log_var_head(name + ".log_var_head", hidden_dim, embed_dim) {}

void RecurrentPosterior::initialize(std::mt19937_64& rng) {
  init_gru(gru, rng);
  init_linear(mean_head, rng);
  init_linear(log_var_head, rng);
}

std::vector<Parameter*> RecurrentPosterior::parameters() {
  auto out = gru.parameters();
  for (auto* p : mean_head.parameters()) out.push_back(p);
  for (auto* p : log_var_head.parameters()) out.push_back(p);
  return out;
}

VariationalParams::VariationalParams(int embed_dim, int hidden_dim)
    : node("q_node", embed_dim, hidden_dim), comm("q_comm", embed_dim, hidden_dim) {}

void VariationalParams::initialize(std::mt19937_64& rng) {
  node.initialize(rng);
  comm.initialize(rng);
}

std::vector<Parameter*> VariationalParams::parameters() {
  auto out = node.parameters();
  for (auto* p : comm.parameters()) out.push_back(p);
  return out;
}

GradeModel::GradeModel(std::size_t num_vertices, const TrainConfig& cfg)
    : gen(num_vertices, cfg.num_communities, cfg.embed_dim, cfg.gamma, cfg.sigma),
      var(cfg.embed_dim, cfg.hidden_dim),
      config(cfg) {}

void GradeModel::initialize(std::mt19937_64& rng) {
  gen.initialize(rng);
  var.initialize(rng);
  // Start the posterior scales at the prior scales.
  var.node.log_var_head.bias.value.setConstant(2.0 * std::log(gen.sigma));
  var.comm.log_var_head.bias.value.setConstant(2.0 * std::log(gen.gamma));
}

std::vector<Parameter*> GradeModel::parameters() {
  auto out = gen.parameters();
  for (auto* p : var.parameters()) out.push_back(p);
  return out;
}

// ------------------------------------------------------------ posteriors

PosteriorRows posterior_rows(const RecurrentPosterior& post, const Mat& h_prev,
                             const Mat& x_prev) {
  PosteriorRows out;
  out.hidden = post.gru.step_rows(x_prev, h_prev);
  out.mean = post.mean_head.apply_rows(out.hidden);
  out.log_var = post.log_var_head.apply_rows(out.hidden).cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  return out;
}

PosteriorOutput posterior_step(const RecurrentPosterior& post, const Vec& h_prev,
                               const Vec& x_prev) {
  auto rows = posterior_rows(post, h_prev.transpose(), x_prev.transpose());
  PosteriorOutput out;
  out.gaussian.mean = rows.mean.row(0).transpose();
  out.gaussian.log_var = rows.log_var.row(0).transpose();
  out.hidden = rows.hidden.row(0).transpose();
  return out;
}

PosteriorVars posterior_forward(Tape& tape, RecurrentPosterior& post, Var h_prev, Var x_prev) {
  PosteriorVars out;
  out.hidden = post.gru.forward(tape, x_prev, h_prev);
  out.mean = post.mean_head.forward(tape, out.hidden);
  out.log_var = ops::clamp(post.log_var_head.forward(tape, out.hidden), kLogVarMin, kLogVarMax);
  return out;
}

RowVec amortized_z_posterior(const RowVec& pi_prev_row, const Vec& phi_v, const Vec& phi_c,
                             const GenerativeParams& gen) {
  if (phi_v.size() != phi_c.size()) throw ShapeError("amortized_z_posterior: shape mismatch");
  Mat a = transition_matrix(0.5 * (phi_v + phi_c), gen);
  return update_mixture(pi_prev_row, a);
}

// ------------------------------------------------------------ states

StepState initial_state(const GradeModel& model) {
  const auto n = static_cast<Eigen::Index>(model.num_vertices());
  const Eigen::Index k = model.num_communities();
  const Eigen::Index h = model.config.hidden_dim;
  StepState s;
  s.t = 0;
  s.phi = model.gen.phi0.value;
  s.beta = model.gen.beta0.value;
  s.phi_mean = s.phi;
  s.beta_mean = s.beta;
  s.phi_log_var = Mat::Zero(s.phi.rows(), s.phi.cols());
  s.beta_log_var = Mat::Zero(s.beta.rows(), s.beta.cols());
  s.h_node = Mat::Zero(n, h);
  s.h_comm = Mat::Zero(k, h);
  s.pi = Mat::Constant(n, k, 1.0 / static_cast<double>(k));
  return s;
}

StepNoise draw_step_noise(const GradeModel& model, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  StepNoise noise;
  noise.node.resize(static_cast<Eigen::Index>(model.num_vertices()), model.config.embed_dim);
  noise.comm.resize(model.num_communities(), model.config.embed_dim);
  for (Eigen::Index i = 0; i < noise.node.size(); ++i) noise.node.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < noise.comm.size(); ++i) noise.comm.data()[i] = normal(rng);
  return noise;
}

StepState advance_state(const GradeModel& model, const StepState& prev, const StepNoise* noise) {
  StepState s;
  s.t = prev.t + 1;
  auto node = posterior_rows(model.var.node, prev.h_node, prev.phi);
  auto comm = posterior_rows(model.var.comm, prev.h_comm, prev.beta);
  s.phi_mean = std::move(node.mean);
  s.phi_log_var = std::move(node.log_var);
  s.h_node = std::move(node.hidden);
  s.beta_mean = std::move(comm.mean);
  s.beta_log_var = std::move(comm.log_var);
  s.h_comm = std::move(comm.hidden);
  if (noise) {
    s.phi = s.phi_mean + (0.5 * s.phi_log_var.array()).exp().matrix().cwiseProduct(noise->node);
    s.beta = s.beta_mean + (0.5 * s.beta_log_var.array()).exp().matrix().cwiseProduct(noise->comm);
  } else {
    s.phi = s.phi_mean;
    s.beta = s.beta_mean;
  }
  s.pi = update_mixture_rows(prev.pi, transition_rows(s.phi, model.gen));
  return s;
}

StepView make_view(const GradeModel& model, const StepState& prev, const StepState& cur) {
  StepView view;
  view.pi_prev = prev.pi;
  view.phi = cur.phi;
  view.pi = cur.pi;
  view.log_theta = row_log_softmax(model.gen.zeta.apply_rows(cur.beta));
  return view;
}

int hard_assignment(const RowVec& membership) {
  if (membership.size() == 0) throw Error("hard_assignment: empty membership");
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < membership.size(); ++k) {
    if (membership[k] > membership[best]) best = k;
  }
  return static_cast<int>(best);
}

}  // namespace grade
