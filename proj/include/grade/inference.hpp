#pragma once

// Structured amortized variational inference.
//
// q(phi_n^t | phi_n^{1:t-1}) and q(beta_k^t | beta_k^{1:t-1}) are diagonal
// Gaussians whose parameters come from a GRU run over the embedding history.
// q(z | v, c) reuses psi: the transition matrix is computed from the mean of
// the source and target embeddings and applied to the source's previous
// mixture, so no extra parameters are introduced.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "grade/dyngraph.hpp"
#include "grade/model.hpp"

namespace grade {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct TrainConfig {
  int epochs = 100;
  int batch_edges = 1024;
  double learning_rate = 0.005;
  double lr_decay = 0.99;
  long decay_every = 100;
  double tau = 0.5;
  double gamma = 0.1;
  double sigma = 0.1;
  int num_communities = 8;
  int embed_dim = 128;
  int hidden_dim = 128;
  std::uint64_t seed = 0;
  /// Validation MAR is computed every `eval_every` epochs (0 disables model
  /// selection; the final parameters are returned).
  int eval_every = 1;
  /// Schedule for the weight on KL(q(z|v,c) || pi_v): zero for the first
  /// `kl_hold_epochs`, then linear up to one over `kl_ramp_epochs`.
  int kl_hold_epochs = 0;
  int kl_ramp_epochs = 0;

  /// Weight on the assignment KL during `epoch` (1-based).
  double kl_z_weight(int epoch) const;
  void validate() const;
};

/// GRU over an embedding history with Gaussian output heads.
struct RecurrentPosterior {
  RecurrentPosterior() = default;
  RecurrentPosterior(const std::string& name, int embed_dim, int hidden_dim);

  void initialize(std::mt19937_64& rng);
  std::vector<Parameter*> parameters();

  GruCell gru;           // input L, hidden H
  LinearMap mean_head;   // H -> L
  LinearMap log_var_head;
};

struct VariationalParams {
  VariationalParams() = default;
  VariationalParams(int embed_dim, int hidden_dim);
  void initialize(std::mt19937_64& rng);
  std::vector<Parameter*> parameters();

  RecurrentPosterior node;
  RecurrentPosterior comm;
};

/// Generative and variational parameters plus the configuration they were
/// built with.
struct GradeModel {
  GradeModel() = default;
  GradeModel(std::size_t num_vertices, const TrainConfig& config);

  void initialize(std::mt19937_64& rng);
  std::vector<Parameter*> parameters();
  std::size_t num_vertices() const { return gen.num_vertices(); }
  int num_communities() const { return gen.num_communities; }

  GenerativeParams gen;
  VariationalParams var;
  TrainConfig config;
};

// ------------------------------------------------------------ posteriors

struct PosteriorOutput {
  GaussianParams gaussian;
  Vec hidden;
};

/// h' = GRU(x_prev, h_prev); mean = head_mu(h'); log_var = clamp(head_sigma(h')).
PosteriorOutput posterior_step(const RecurrentPosterior& post, const Vec& h_prev,
                               const Vec& x_prev);

struct PosteriorRows {
  Mat mean;
  Mat log_var;
  Mat hidden;
};
PosteriorRows posterior_rows(const RecurrentPosterior& post, const Mat& h_prev,
                             const Mat& x_prev);

struct PosteriorVars {
  Var mean;
  Var log_var;
  Var hidden;
};
PosteriorVars posterior_forward(Tape& tape, RecurrentPosterior& post, Var h_prev,
                                Var x_prev);

/// q(z | v, c) = pi_prev_row * rowsoftmax(psi((phi_v + phi_c) / 2)).
RowVec amortized_z_posterior(const RowVec& pi_prev_row, const Vec& phi_v,
                             const Vec& phi_c, const GenerativeParams& gen);

// ------------------------------------------------------------ trajectory

/// Detached state of all embeddings at one step. Step 0 holds the learnable
/// initial embeddings, zero hidden states and the uniform mixture.
struct StepState {
  int t = 0;
  Mat phi;   // N x L (sample, or mean for noise-free rollouts)
  Mat beta;  // K x L
  Mat phi_mean, phi_log_var;
  Mat beta_mean, beta_log_var;
  Mat h_node;  // N x H
  Mat h_comm;  // K x H
  Mat pi;      // N x K
};

/// Steps 0..T of a rollout; element i is step i.
using PosteriorTrajectory = std::vector<StepState>;

StepState initial_state(const GradeModel& model);

/// Standard-normal noise for one step's embedding samples.
struct StepNoise {
  Mat node;  // N x L
  Mat comm;  // K x L
};
StepNoise draw_step_noise(const GradeModel& model, std::mt19937_64& rng);

/// Advances one step. With `noise` the embeddings are reparameterized samples;
/// without, the posterior means are used.
StepState advance_state(const GradeModel& model, const StepState& prev,
                        const StepNoise* noise);

/// Quantities needed to score edges at a step.
struct StepView {
  Mat pi_prev;    // N x K, mixture at t - 1
  Mat phi;        // N x L
  Mat pi;         // N x K
  Mat log_theta;  // K x N
};
StepView make_view(const GradeModel& model, const StepState& prev, const StepState& cur);

// ------------------------------------------------------------ ELBO

/// Callback for distribution-invariant checks; receives a label ("pi",
/// "q_z", "A", "theta", ...) and a matrix whose rows must be distributions.
using SimplexObserver = std::function<void(const char* what, const Mat& rows)>;

struct ElboTerms {
  double reconstruction = 0.0;  // sum over batch of sum_k z~_k log theta_{k,c}
  double kl_z = 0.0;            // sum over batch of KL(q(z|v,c) || pi_v)
  double kl_comm = 0.0;         // full-step community KL (unscaled)
  double kl_node = 0.0;         // full-step node KL sum (before 1/|V|)
  double kl_weight = 0.0;       // |batch| / |E^t|
  double loss = 0.0;
};

/// Negative ELBO contribution of one batch of edges at the step following
/// `prev`. `gumbel_uniform` is |batch| x K uniform noise. The community and
/// node KLs are charged with weight |batch| / step_edge_count.
Var elbo_batch(Tape& tape, GradeModel& model, const StepState& prev,
               const StepNoise& noise, std::span<const Edge> batch,
               std::size_t step_edge_count, const Mat& gumbel_uniform,
               ElboTerms* terms = nullptr, const SimplexObserver* observer = nullptr,
               double kl_z_weight = 1.0);

/// Same loss with the chain from step 0 rebuilt on the tape, so gradients
/// reach earlier steps. `noises[i]` is the noise of step i + 1; the batch
/// belongs to step noises.size().
Var elbo_batch_unrolled(Tape& tape, GradeModel& model, std::span<const StepNoise> noises,
                        std::span<const Edge> batch, std::size_t step_edge_count,
                        const Mat& gumbel_uniform, ElboTerms* terms = nullptr,
                        const SimplexObserver* observer = nullptr, double kl_z_weight = 1.0);

/// Zero-variance edge term: sum_k q_k log theta_{k,c} - KL(q || pi_v).
double exact_edge_elbo(const Edge& edge, const StepView& view, const GenerativeParams& gen);
/// Expectation part of exact_edge_elbo.
double exact_reconstruction(const Edge& edge, const StepView& view, const GenerativeParams& gen);
/// One soft Gumbel-sample of the reconstruction term for an edge.
double soft_reconstruction_sample(const Edge& edge, const StepView& view,
                                  const GenerativeParams& gen, double tau,
                                  const Vec& uniform_noise);

// ------------------------------------------------------------ training

struct LossRecord {
  long iteration = 0;
  int step = 0;
  double loss = 0.0;  // negative ELBO of the batch at full KL weight
};

struct TrainResult {
  GradeModel model;        // parameters at the best validation MAR
  GradeModel final_model;  // parameters after the last epoch
  std::vector<LossRecord> history;
  std::vector<double> epoch_loss;      // summed loss per epoch
  std::vector<double> validation_mar;  // per evaluation, in order
  int best_epoch = 0;                  // 0 = initialization
  double best_validation_mar = 0.0;
};

struct TrainOptions {
  SimplexObserver observer;
  /// Log progress every n epochs to stderr (0 = silent).
  int log_every = 0;
};

TrainResult train(const DynamicGraph& graph, const TemporalSplit& split,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Noise-free rollout of the posterior means from step 0 through `last_step`.
PosteriorTrajectory mean_trajectory(const GradeModel& model, int last_step);

struct ProjectedStep {
  int t = 0;
  StepState state;
  Mat theta;      // K x N
  Mat pi_prev;    // N x K
};

/// Rolls the posterior forward `n_steps` beyond the trajectory's last step,
/// feeding posterior means back as inputs.
std::vector<ProjectedStep> project_future(const GradeModel& model,
                                          const PosteriorTrajectory& trajectory,
                                          int n_steps);

/// Neighbourhood membership: mean of q(z | v, c) over v's out-neighbours (with
/// multiplicity) in `snapshot`. Throws NoNeighboursError when v is isolated.
RowVec community_membership(VertexId v, const Snapshot& snapshot,
                            const ProjectedStep& step, const GenerativeParams& gen);

class NoNeighboursError : public Error {
 public:
  using Error::Error;
};

/// Argmax with ties to the lowest index.
int hard_assignment(const RowVec& membership);

}  // namespace grade
