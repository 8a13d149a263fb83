#pragma once

// Discrete-time dynamic graphs: ingestion, snapshot bucketing, temporal
// splits and descriptive statistics.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grade/error.hpp"

namespace grade {

using VertexId = std::int32_t;

struct EdgeEvent {
  VertexId src = 0;
  VertexId dst = 0;
  double timestamp = 0.0;
};

struct Edge {
  VertexId src = 0;
  VertexId dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// One time step's edges. Duplicates are distinct observations.
struct Snapshot {
  int t = 0;
  std::vector<Edge> edges;
};

/// Dense token <-> id map. Ids are assigned in insertion order.
class Vocabulary {
 public:
  VertexId intern(std::string_view token);
  std::optional<VertexId> find(std::string_view token) const;
  const std::string& token(VertexId id) const;
  std::size_t size() const noexcept { return tokens_.size(); }

  /// TSV: token <TAB> id, ordered by id.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, VertexId> ids_;
};

/// Column positions of the src, dst and timestamp fields in a record.
struct EdgeFormat {
  int src_field = 0;
  int dst_field = 1;
  int time_field = 2;

  /// Parses a descriptor such as "src,dst,t" or "t,src,dst".
  static EdgeFormat parse(std::string_view descriptor);
};

struct EdgeStream {
  std::vector<EdgeEvent> events;
  Vocabulary vocab;
};

/// Reads a TSV/CSV edge stream. Tokens are interned into `vocab` (which may
/// be pre-populated to fix the complete vertex set up front).
EdgeStream read_edge_stream(std::istream& in, const EdgeFormat& format,
                            Vocabulary vocab = {});
EdgeStream load_edge_stream(const std::string& path, const EdgeFormat& format,
                            Vocabulary vocab = {});

/// Per-(vertex, step) ground-truth community labels.
class LabelTable {
 public:
  LabelTable() = default;
  LabelTable(std::size_t num_vertices, int num_steps);

  void set(VertexId v, int t, int label);
  std::optional<int> get(VertexId v, int t) const;
  bool empty() const noexcept { return count_ == 0; }
  std::size_t count() const noexcept { return count_; }
  int num_steps() const noexcept { return num_steps_; }
  std::size_t num_vertices() const noexcept { return num_vertices_; }

  /// Label token names, indexed by label id.
  std::vector<std::string> names;

 private:
  std::size_t num_vertices_ = 0;
  int num_steps_ = 0;
  std::size_t count_ = 0;
  std::vector<int> cells_;  // t-major, -1 = unlabeled
};

/// Reads TSV (vertex_token, t, label_token). Unknown vertices or steps out
/// of range are parse errors.
LabelTable read_labels(std::istream& in, const Vocabulary& vocab,
                       std::size_t num_vertices, int num_steps);

class DynamicGraph {
 public:
  DynamicGraph() = default;
  /// `snapshots[i]` is step i + 1.
  DynamicGraph(std::size_t num_vertices, std::vector<Snapshot> snapshots);

  std::size_t num_vertices() const noexcept { return num_vertices_; }
  int num_steps() const noexcept { return static_cast<int>(snapshots_.size()); }
  /// 1-based step index.
  const Snapshot& snapshot(int t) const;
  const std::vector<Snapshot>& snapshots() const noexcept { return snapshots_; }
  std::size_t num_edges() const noexcept;

  const LabelTable& labels() const noexcept { return labels_; }
  void set_labels(LabelTable labels);

  friend bool operator==(const DynamicGraph& a, const DynamicGraph& b);

 private:
  std::size_t num_vertices_ = 0;
  std::vector<Snapshot> snapshots_;
  LabelTable labels_;
};

/// Buckets events into snapshots of width `window`; step index is
/// floor((ts - ts_min) / window) + 1. Undirected input contributes both
/// orientations of every event.
DynamicGraph bucket_snapshots(const std::vector<EdgeEvent>& events,
                              std::size_t num_vertices, double window,
                              bool undirected);

/// Inclusive 1-based step range. Empty when last < first.
struct StepRange {
  int first = 1;
  int last = 0;
  int size() const noexcept { return last >= first ? last - first + 1 : 0; }
  bool contains(int t) const noexcept { return t >= first && t <= last; }
  friend bool operator==(const StepRange&, const StepRange&) = default;
};

struct TemporalSplit {
  StepRange train;
  StepRange val;
  StepRange test;
};

TemporalSplit split_temporal(const DynamicGraph& graph, int n_train, int n_val,
                             int n_test);

/// Sorted vertices appearing as src or dst.
std::vector<VertexId> active_vertices(const Snapshot& snapshot);
/// Out-degree with multiplicity.
std::size_t degree(VertexId v, const Snapshot& snapshot);

double node_activity(const DynamicGraph& graph);
/// Mean Jaccard similarity of neighbour sets (in- and out-neighbours) between
/// consecutive steps, over vertices active in both.
double context_dynamics(const DynamicGraph& graph);

/// Membership mask of vertices active anywhere in `range`.
std::vector<bool> seen_vertices(const DynamicGraph& graph, StepRange range);
Snapshot filter_seen(const Snapshot& snapshot, const std::vector<bool>& seen);

/// Writes the graph back out as an edge stream (src, dst, t) using vocabulary
/// tokens; ingesting it with window 1, directed, reproduces the graph.
void write_edge_stream(std::ostream& out, const DynamicGraph& graph,
                       const Vocabulary& vocab);
void write_labels(std::ostream& out, const DynamicGraph& graph,
                  const Vocabulary& vocab);

}  // namespace grade
