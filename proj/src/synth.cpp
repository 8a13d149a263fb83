#include "grade/synth.hpp"

#include <map>
#include <random>
#include <string>

namespace grade {

void SbmConfig::validate() const {
  if (num_vertices < 2 || num_communities < 1 || num_steps < 1) {
    throw Error("SbmConfig: need N >= 2, K >= 1, T >= 1");
  }
  if (!(p_out >= 0.0 && p_out <= p_in && p_in <= 1.0)) {
    throw Error("SbmConfig: need 0 <= p_out <= p_in <= 1");
  }
  if (!(drift >= 0.0 && drift <= 1.0)) throw Error("SbmConfig: drift must be in [0, 1]");
  if (p_in <= 0.0 && p_out <= 0.0) throw Error("SbmConfig: parameters imply zero expected edges");
  if (p_out <= 0.0 && static_cast<std::size_t>(num_communities) >= num_vertices) {
    throw Error("SbmConfig: parameters imply zero expected edges");
  }
}

double SbmConfig::expected_edges_per_step() const {
  const double n = static_cast<double>(num_vertices);
  const double size = n / num_communities;
  const double intra = num_communities * size * (size - 1.0);
  const double inter = n * (n - 1.0) - intra;
  return intra * p_in + inter * p_out;
}

SbmConfig sbm_easy_preset() {
  SbmConfig c;
  c.num_vertices = 200;
  c.num_communities = 4;
  c.num_steps = 5;
  c.p_in = 0.3;
  c.p_out = 0.01;
  c.drift = 0.05;
  return c;
}

SbmConfig sbm_hard_preset() {
  SbmConfig c = sbm_easy_preset();
  c.p_in = 0.1;
  c.p_out = 0.03;
  c.drift = 0.2;
  return c;
}

DynamicGraph generate_dynamic_sbm(const SbmConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> pick(0, config.num_communities - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t n = config.num_vertices;

  std::vector<int> membership(n);
  for (auto& m : membership) m = pick(rng);

  LabelTable labels(n, config.num_steps);
  for (int k = 0; k < config.num_communities; ++k) labels.names.push_back("c" + std::to_string(k));

  std::vector<Snapshot> snapshots(static_cast<std::size_t>(config.num_steps));
  for (int t = 1; t <= config.num_steps; ++t) {
    if (t > 1) {
      for (auto& m : membership) {
        if (unif(rng) < config.drift) m = pick(rng);
      }
    }
    auto& edges = snapshots[static_cast<std::size_t>(t - 1)].edges;
    for (std::size_t u = 0; u < n; ++u) {
      labels.set(static_cast<VertexId>(u), t, membership[u]);
      for (std::size_t v = 0; v < n; ++v) {
        if (u == v) continue;
        const double p = membership[u] == membership[v] ? config.p_in : config.p_out;
        if (unif(rng) < p) edges.push_back({static_cast<VertexId>(u), static_cast<VertexId>(v)});
      }
    }
  }
  DynamicGraph graph(n, std::move(snapshots));
  if (graph.num_edges() == 0) throw Error("generate_dynamic_sbm: no edges were generated");
  graph.set_labels(std::move(labels));
  return graph;
}

std::vector<int> brute_force_membership(const DynamicGraph& graph, int step) {
  const auto& labels = graph.labels();
  if (labels.empty()) throw Error("brute_force_membership: graph has no labels");
  const auto n = graph.num_vertices();
  std::vector<std::map<int, int>> votes(n);
  for (const auto& e : graph.snapshot(step).edges) {
    if (auto l = labels.get(e.dst, step)) ++votes[static_cast<std::size_t>(e.src)][*l];
  }
  std::vector<int> out(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    if (votes[v].empty()) {
      out[v] = labels.get(static_cast<VertexId>(v), step).value_or(-1);
      continue;
    }
    int best = -1, best_count = -1;
    for (const auto& [label, count] : votes[v]) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    out[v] = best;
  }
  return out;
}

std::string synth_vertex_token(VertexId v) { return std::to_string(v); }

Vocabulary synth_vocabulary(std::size_t num_vertices) {
  Vocabulary vocab;
  for (std::size_t v = 0; v < num_vertices; ++v) vocab.intern(synth_vertex_token(static_cast<VertexId>(v)));
  return vocab;
}

}  // namespace grade
