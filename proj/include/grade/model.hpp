#pragma once

// Generative process over a dynamic graph.
//
// Node embeddings phi and community embeddings beta follow Gaussian random
// walks (identity mean dynamics, noise scales sigma and gamma). Each node's
// embedding is mapped through psi to a K x K row-stochastic transition
// matrix A that moves its community mixture pi forward (pi_t = pi_{t-1} A).
// Each community embedding is mapped through zeta and a softmax to a
// distribution theta over all N nodes. An edge (v, c) is drawn by sampling
// z ~ pi_v and then c ~ theta_z, so p(c | v) = sum_k pi[v, k] theta[k, c].

#include <random>
#include <vector>

#include "grade/dyngraph.hpp"
#include "grade/numerics.hpp"

namespace grade {

using RowVec = Eigen::RowVectorXd;

/// Simplex tolerance accepted on inputs to mixture updates.
inline constexpr double kSimplexTolerance = 1e-5;

struct GenerativeParams {
  GenerativeParams() = default;
  GenerativeParams(std::size_t num_vertices, int num_communities, int embed_dim,
                   double gamma, double sigma);

  /// phi0, beta0 ~ N(0, 0.1^2); psi, zeta use fan-in uniform init.
  void initialize(std::mt19937_64& rng);
  std::vector<Parameter*> parameters();

  std::size_t num_vertices() const { return static_cast<std::size_t>(phi0.rows()); }

  Parameter phi0;   // N x L
  Parameter beta0;  // K x L
  LinearMap psi;    // L -> K*K, row-major K x K, rows = source community
  LinearMap zeta;   // L -> N
  double gamma = 1.0;
  double sigma = 1.0;
  int num_communities = 1;
  int embed_dim = 1;
};

/// prev + smoothness * noise.
Vec evolve_embedding_prior(const Vec& prev, double smoothness, const Vec& noise);

/// K x K row-stochastic transition matrix for one embedding.
Mat transition_matrix(const Vec& phi, const GenerativeParams& params);
/// Batched: one flattened K*K transition matrix per row of `phi`.
Mat transition_rows(const Mat& phi, const GenerativeParams& params);

/// Row vector times row-stochastic matrix. Throws if `pi_prev` is off the
/// simplex or `a` is not row-stochastic beyond kSimplexTolerance.
RowVec update_mixture(const RowVec& pi_prev, const Mat& a);
/// Batched form over flattened transition rows (no validation).
Mat update_mixture_rows(const Mat& pi_prev, const Mat& transitions);

/// softmax(zeta(beta_k)) over the N nodes.
Vec node_distribution(const Vec& beta_k, const GenerativeParams& params);
/// K x N, row k = node distribution of community k.
Mat node_distributions(const Mat& beta, const GenerativeParams& params);

/// p(c | v) = sum_k pi[v, k] theta[k, c].
double edge_likelihood(VertexId v, VertexId c, const Mat& pi, const Mat& theta);

/// Sum over steps and edges of log p(c | v), each clamped at kLogFloor.
/// `pis` and `thetas` are indexed by step - 1.
double log_data_likelihood(const DynamicGraph& graph, const std::vector<Mat>& pis,
                           const std::vector<Mat>& thetas);

/// Latent state carried between generated steps.
struct GeneratorState {
  Mat phi;   // N x L
  Mat beta;  // K x L
  Mat pi;    // N x K
};

GeneratorState initial_generator_state(const GenerativeParams& params);

struct GeneratedSnapshot {
  Snapshot snapshot;
  std::vector<int> assignments;  // z per edge, aligned with snapshot.edges
  GeneratorState state;
  Mat theta;
};

/// Ancestral sampling of one step: beta, phi random walks, A and pi update,
/// theta, then for each node v `edge_counts[v]` draws of z ~ pi_v, c ~ theta_z.
GeneratedSnapshot generate_snapshot(const GenerativeParams& params,
                                    const GeneratorState& prev,
                                    const std::vector<int>& edge_counts,
                                    std::mt19937_64& rng);

/// Draws an index from a discrete distribution by inverse CDF.
int sample_categorical(const Eigen::Ref<const RowVec>& probs, std::mt19937_64& rng);

}  // namespace grade
