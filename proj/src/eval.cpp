#include "grade/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace grade {

Ranking make_ranking(VertexId source, const Vec& scores) {
  Ranking r;
  r.source = source;
  r.order.resize(static_cast<std::size_t>(scores.size()));
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](VertexId a, VertexId b) { return scores[a] > scores[b]; });
  return r;
}

std::size_t rank_of(const Vec& scores, VertexId target) {
  if (target < 0 || target >= scores.size()) throw Error("rank_of: target out of range");
  const double s = scores[target];
  std::size_t rank = 1;
  for (Eigen::Index c = 0; c < scores.size(); ++c) {
    if (scores[c] > s || (scores[c] == s && c < target)) ++rank;
  }
  return rank;
}

Vec neighbor_distribution(VertexId v, const Mat& pi, const Mat& theta) {
  if (v < 0 || v >= pi.rows()) throw Error("neighbor_distribution: vertex out of range");
  if (pi.cols() != theta.rows()) throw ShapeError("neighbor_distribution: K mismatch");
  return (pi.row(v) * theta).transpose();
}

double mean_average_rank(std::span<const Edge> edges, const SourceScorer& scorer) {
  if (edges.empty()) throw Error("mean_average_rank: no test edges");
  std::map<VertexId, std::vector<VertexId>> by_source;
  for (const auto& e : edges) by_source[e.src].push_back(e.dst);
  double total = 0.0;
  for (const auto& [v, targets] : by_source) {
    Vec scores = scorer(v);
    for (auto c : targets) total += static_cast<double>(rank_of(scores, c));
  }
  return total / static_cast<double>(edges.size());
}

double mean_average_rank(std::span<const Edge> edges, const Mat& pi, const Mat& theta) {
  return mean_average_rank(edges, [&](VertexId v) { return neighbor_distribution(v, pi, theta); });
}

// ---------------------------------------------------------------- NMI

namespace {

double entropy(const std::map<int, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    if (c > 0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

}  // namespace

double nmi(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw Error("nmi: partitions differ in size");
  if (predicted.empty()) throw Error("nmi: no labeled nodes");
  const double n = static_cast<double>(predicted.size());
  std::map<int, double> cp, cg;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    cp[predicted[i]] += 1;
    cg[truth[i]] += 1;
    joint[{predicted[i], truth[i]}] += 1;
  }
  const double hp = entropy(cp, n);
  const double hg = entropy(cg, n);
  if (cp.size() == 1 || cg.size() == 1) {
    return (cp.size() == 1 && cg.size() == 1) ? 1.0 : 0.0;
  }
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    mi += (c / n) * std::log(c * n / (cp[key.first] * cg[key.second]));
  }
  return std::clamp(mi / std::sqrt(hp * hg), 0.0, 1.0);
}

// ---------------------------------------------------------------- modularity

double WeightedGraph::total_weight() const {
  double w = 0.0;
  for (const auto& l : links) w += l.weight;
  return w;
}

WeightedGraph aggregate_undirected(std::span<const Snapshot> snapshots, std::size_t num_vertices) {
  std::map<std::pair<VertexId, VertexId>, double> weights;
  for (const auto& s : snapshots) {
    for (const auto& e : s.edges) {
      auto key = std::minmax(e.src, e.dst);
      weights[{key.first, key.second}] += 1.0;
    }
  }
  WeightedGraph g;
  g.num_vertices = num_vertices;
  for (const auto& [key, w] : weights) g.links.push_back({key.first, key.second, w});
  return g;
}

WeightedGraph aggregate_undirected(const DynamicGraph& graph, StepRange range,
                                   const std::vector<bool>* keep) {
  std::vector<Snapshot> snaps;
  for (int t = range.first; t <= range.last; ++t) {
    snaps.push_back(keep ? filter_seen(graph.snapshot(t), *keep) : graph.snapshot(t));
  }
  return aggregate_undirected(snaps, graph.num_vertices());
}

double modularity(const WeightedGraph& graph, std::span<const int> assignment) {
  if (assignment.size() != graph.num_vertices) throw Error("modularity: assignment size mismatch");
  // Symmetric adjacency: A_uv = A_vu = w for u != v, A_uu = 2w for loops.
  std::vector<double> degree(graph.num_vertices, 0.0);
  double two_m = 0.0;
  double inside = 0.0;
  for (const auto& l : graph.links) {
    const double a = 2.0 * l.weight;
    degree[static_cast<std::size_t>(l.u)] += l.weight;
    degree[static_cast<std::size_t>(l.v)] += l.weight;
    two_m += a;
    if (assignment[static_cast<std::size_t>(l.u)] == assignment[static_cast<std::size_t>(l.v)]) {
      inside += a;
    }
  }
  if (two_m <= 0.0) throw Error("modularity: graph has no edges");
  std::map<int, double> community_degree;
  for (std::size_t i = 0; i < degree.size(); ++i) community_degree[assignment[i]] += degree[i];
  double expected = 0.0;
  for (const auto& [_, d] : community_degree) expected += d * d;
  return inside / two_m - expected / (two_m * two_m);
}

// ---------------------------------------------------------------- Spearman

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[idx[m]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("spearman: length mismatch");
  if (x.size() < 2) throw Error("spearman: need at least two points");
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw Error("spearman: correlation undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

double topk_spearman_community(int k, std::size_t top_k, const Mat& theta,
                               const WeightedGraph& graph, std::span<const int> assignment) {
  if (k < 0 || k >= theta.rows()) throw Error("topk_spearman: community out of range");
  if (static_cast<std::size_t>(theta.cols()) != graph.num_vertices ||
      assignment.size() != graph.num_vertices) {
    throw ShapeError("topk_spearman: vertex count mismatch");
  }
  Ranking r = make_ranking(0, theta.row(k).transpose());
  const std::size_t m = std::min(top_k, r.order.size());

  std::vector<double> centrality(graph.num_vertices, 0.0);
  for (const auto& l : graph.links) {
    const auto u = static_cast<std::size_t>(l.u);
    const auto v = static_cast<std::size_t>(l.v);
    if (u == v) continue;
    if (assignment[v] == k) centrality[u] += l.weight;
    if (assignment[u] == k) centrality[v] += l.weight;
  }
  std::vector<double> probs(m), cent(m);
  for (std::size_t i = 0; i < m; ++i) {
    probs[i] = theta(k, r.order[i]);
    cent[i] = centrality[static_cast<std::size_t>(r.order[i])];
  }
  return spearman(probs, cent);
}

double topk_spearman(std::size_t top_k, const Mat& theta, const WeightedGraph& graph,
                     std::span<const int> assignment) {
  double total = 0.0;
  int defined = 0;
  for (int k = 0; k < theta.rows(); ++k) {
    try {
      total += topk_spearman_community(k, top_k, theta, graph, assignment);
      ++defined;
    } catch (const Error&) {
      // constant probabilities or centralities: undefined for this community
    }
  }
  if (defined == 0) throw Error("topk_spearman: undefined for every community");
  return total / defined;
}

// ---------------------------------------------------------------- report

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["mar"] = mar;
  if (nmi) j["nmi"] = *nmi;
  j["modularity"] = modularity ? nlohmann::ordered_json(*modularity) : nlohmann::ordered_json();
  j["topk_spearman"] =
      topk_spearman ? nlohmann::ordered_json(*topk_spearman) : nlohmann::ordered_json();
  auto steps = nlohmann::ordered_json::array();
  for (const auto& s : per_step) {
    nlohmann::ordered_json o;
    o["t"] = s.t;
    o["num_edges"] = s.num_edges;
    o["mar"] = s.mar;
    if (s.nmi) o["nmi"] = *s.nmi;
    steps.push_back(o);
  }
  j["per_step"] = steps;
  if (!warnings.empty()) j["warnings"] = warnings;
  return j;
}

}  // namespace grade
