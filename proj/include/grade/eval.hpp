#pragma once

// Evaluation protocols: dynamic link prediction (mean average rank),
// community detection (NMI, modularity) and community-scale dynamics
// (Spearman correlation of top-k node probabilities vs in-community degree).

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "grade/dyngraph.hpp"
#include "grade/numerics/tape.hpp"

namespace grade {

/// Candidates over the complete vertex set, by descending score; ties by
/// ascending id. Includes the source itself.
struct Ranking {
  VertexId source = 0;
  std::vector<VertexId> order;
};

Ranking make_ranking(VertexId source, const Vec& scores);
/// 1-based position of `target` in make_ranking(., scores), in O(N).
std::size_t rank_of(const Vec& scores, VertexId target);

/// p(c | v) = sum_k pi[v, k] theta[k, c] over all c.
Vec neighbor_distribution(VertexId v, const Mat& pi, const Mat& theta);

using SourceScorer = std::function<Vec(VertexId source)>;

/// Mean 1-based rank of each edge's target among the scores of its source.
double mean_average_rank(std::span<const Edge> edges, const SourceScorer& scorer);
double mean_average_rank(std::span<const Edge> edges, const Mat& pi, const Mat& theta);

/// Normalized mutual information I(P;G) / sqrt(H(P) H(G)).
double nmi(std::span<const int> predicted, std::span<const int> truth);

/// Symmetrized, weight-collapsed aggregate of a set of snapshots.
struct WeightedGraph {
  std::size_t num_vertices = 0;
  struct Link {
    VertexId u = 0;
    VertexId v = 0;
    double weight = 0.0;
  };
  std::vector<Link> links;  // u <= v, one entry per unordered pair
  double total_weight() const;
};

WeightedGraph aggregate_undirected(const DynamicGraph& graph, StepRange range,
                                   const std::vector<bool>* keep = nullptr);
WeightedGraph aggregate_undirected(std::span<const Snapshot> snapshots, std::size_t num_vertices);

/// Newman modularity of a hard assignment over a weighted undirected graph.
double modularity(const WeightedGraph& graph, std::span<const int> assignment);

/// Spearman rank correlation with average ranks for ties. Throws when either
/// vector is constant.
double spearman(std::span<const double> x, std::span<const double> y);

/// Community k: select the top_k nodes by theta[k, .]; correlate their
/// probabilities with the number of their links to nodes assigned to k.
double topk_spearman_community(int k, std::size_t top_k, const Mat& theta,
                               const WeightedGraph& graph, std::span<const int> assignment);
/// Mean of topk_spearman_community over communities where it is defined.
/// Throws when it is undefined for every community.
double topk_spearman(std::size_t top_k, const Mat& theta, const WeightedGraph& graph,
                     std::span<const int> assignment);

struct StepMetrics {
  int t = 0;
  std::size_t num_edges = 0;
  double mar = 0.0;
  std::optional<double> nmi;
};

struct MetricsReport {
  double mar = 0.0;
  std::optional<double> nmi;
  std::optional<double> modularity;
  std::optional<double> topk_spearman;
  std::vector<StepMetrics> per_step;
  std::vector<std::string> warnings;

  nlohmann::ordered_json to_json() const;
};

}  // namespace grade
