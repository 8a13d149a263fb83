#pragma once

// Dynamic stochastic block model with planted, drifting memberships.

#include <cstdint>
#include <vector>

#include "grade/dyngraph.hpp"

namespace grade {

struct SbmConfig {
  std::size_t num_vertices = 200;
  int num_communities = 4;
  int num_steps = 5;
  double p_in = 0.3;
  double p_out = 0.01;
  /// Per-step probability that a node resamples its community (uniformly
  /// over all K, so it may keep the same one).
  double drift = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  /// Expected directed edges per step (self-loops excluded), assuming
  /// exactly balanced communities.
  double expected_edges_per_step() const;
};

/// "sbm-easy": N=200, K=4, T=5, p_in=0.3, p_out=0.01, drift=0.05.
SbmConfig sbm_easy_preset();
/// "sbm-hard": as easy but p_in=0.1, p_out=0.03, drift=0.2.
SbmConfig sbm_hard_preset();

/// Independent Bernoulli per ordered pair (u != v) at every step; labels
/// are recorded for every (vertex, step) and named "c0".."c{K-1}".
DynamicGraph generate_dynamic_sbm(const SbmConfig& config);

/// Per-node majority label among out-neighbours' ground-truth labels at
/// `step` (ties to the smallest label); isolated nodes keep their own label.
std::vector<int> brute_force_membership(const DynamicGraph& graph, int step);

/// Token used for vertex v in exported synthetic data.
std::string synth_vertex_token(VertexId v);
/// Vocabulary "0".."N-1" in id order.
Vocabulary synth_vocabulary(std::size_t num_vertices);

}  // namespace grade
