#include "grade/dyngraph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace grade {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  auto is_sep = [](char c) { return c == '\t' || c == ',' || c == ' ' || c == '\r'; };
  while (i < line.size()) {
    while (i < line.size() && is_sep(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_sep(line[j])) ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

bool is_skippable(std::string_view line) {
  auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string_view::npos || line[pos] == '#';
}

std::optional<double> parse_real(std::string_view s) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

// ---------------------------------------------------------------- Vocabulary

VertexId Vocabulary::intern(std::string_view token) {
  auto it = ids_.find(std::string(token));
  if (it != ids_.end()) return it->second;
  auto id = static_cast<VertexId>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

std::optional<VertexId> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(VertexId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw Error("vertex id " + std::to_string(id) + " not in vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\t' << i << '\n';
  }
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_skippable(line)) continue;
    auto fields = split_fields(line);
    if (fields.size() < 2) throw ParseError(lineno, "expected token and id");
    auto id = parse_int(fields[1]);
    if (!id || *id != static_cast<int>(vocab.size())) {
      throw ParseError(lineno, "vocabulary ids must be dense and ordered");
    }
    if (vocab.find(fields[0])) throw ParseError(lineno, "duplicate token");
    vocab.intern(fields[0]);
  }
  return vocab;
}

// ---------------------------------------------------------------- ingestion

EdgeFormat EdgeFormat::parse(std::string_view descriptor) {
  EdgeFormat format{-1, -1, -1};
  auto names = split_fields(descriptor);
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto n = names[i];
    int idx = static_cast<int>(i);
    if (n == "src" || n == "source" || n == "u") {
      format.src_field = idx;
    } else if (n == "dst" || n == "target" || n == "v") {
      format.dst_field = idx;
    } else if (n == "t" || n == "time" || n == "timestamp" || n == "ts") {
      format.time_field = idx;
    } else if (n != "_") {
      throw Error("unknown field name in edge format: " + std::string(n));
    }
  }
  if (format.src_field < 0 || format.dst_field < 0 || format.time_field < 0) {
    throw Error("edge format must name src, dst and t fields: " +
                std::string(descriptor));
  }
  return format;
}

EdgeStream read_edge_stream(std::istream& in, const EdgeFormat& format,
                            Vocabulary vocab) {
  EdgeStream stream;
  stream.vocab = std::move(vocab);
  const auto needed = static_cast<std::size_t>(
      std::max({format.src_field, format.dst_field, format.time_field}) + 1);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_skippable(line)) continue;
    auto fields = split_fields(line);
    if (fields.size() < needed) {
      throw ParseError(lineno, "expected " + std::to_string(needed) +
                                   " fields, got " + std::to_string(fields.size()));
    }
    auto ts = parse_real(fields[static_cast<std::size_t>(format.time_field)]);
    if (!ts) throw ParseError(lineno, "bad timestamp");
    EdgeEvent ev;
    ev.src = stream.vocab.intern(fields[static_cast<std::size_t>(format.src_field)]);
    ev.dst = stream.vocab.intern(fields[static_cast<std::size_t>(format.dst_field)]);
    ev.timestamp = *ts;
    stream.events.push_back(ev);
  }
  if (stream.events.empty()) throw Error("empty edge stream");
  return stream;
}

EdgeStream load_edge_stream(const std::string& path, const EdgeFormat& format,
                            Vocabulary vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edge stream: " + path);
  return read_edge_stream(in, format, std::move(vocab));
}

// ---------------------------------------------------------------- labels

LabelTable::LabelTable(std::size_t num_vertices, int num_steps)
    : num_vertices_(num_vertices),
      num_steps_(num_steps),
      cells_(num_vertices * static_cast<std::size_t>(std::max(num_steps, 0)), -1) {}

void LabelTable::set(VertexId v, int t, int label) {
  if (v < 0 || static_cast<std::size_t>(v) >= num_vertices_ || t < 1 ||
      t > num_steps_ || label < 0) {
    throw Error("label cell out of range");
  }
  auto& cell = cells_[static_cast<std::size_t>(t - 1) * num_vertices_ +
                      static_cast<std::size_t>(v)];
  if (cell < 0) ++count_;
  cell = label;
}

std::optional<int> LabelTable::get(VertexId v, int t) const {
  if (v < 0 || static_cast<std::size_t>(v) >= num_vertices_ || t < 1 ||
      t > num_steps_) {
    return std::nullopt;
  }
  int cell = cells_[static_cast<std::size_t>(t - 1) * num_vertices_ +
                    static_cast<std::size_t>(v)];
  if (cell < 0) return std::nullopt;
  return cell;
}

LabelTable read_labels(std::istream& in, const Vocabulary& vocab,
                       std::size_t num_vertices, int num_steps) {
  LabelTable table(num_vertices, num_steps);
  std::unordered_map<std::string, int> label_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_skippable(line)) continue;
    auto fields = split_fields(line);
    if (fields.size() < 3) throw ParseError(lineno, "expected vertex, t, label");
    auto v = vocab.find(fields[0]);
    if (!v) throw ParseError(lineno, "unknown vertex " + std::string(fields[0]));
    auto t = parse_int(fields[1]);
    if (!t || *t < 1 || *t > num_steps) throw ParseError(lineno, "bad step index");
    std::string name(fields[2]);
    auto [it, inserted] =
        label_ids.emplace(name, static_cast<int>(table.names.size()));
    if (inserted) table.names.push_back(name);
    table.set(*v, *t, it->second);
  }
  return table;
}

// ---------------------------------------------------------------- graph

DynamicGraph::DynamicGraph(std::size_t num_vertices, std::vector<Snapshot> snapshots)
    : num_vertices_(num_vertices), snapshots_(std::move(snapshots)) {
  for (std::size_t i = 0; i < snapshots_.size(); ++i) {
    snapshots_[i].t = static_cast<int>(i) + 1;
    for (const auto& e : snapshots_[i].edges) {
      if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= num_vertices_ ||
          static_cast<std::size_t>(e.dst) >= num_vertices_) {
        throw Error("edge endpoint out of range in snapshot " + std::to_string(i + 1));
      }
    }
  }
}

const Snapshot& DynamicGraph::snapshot(int t) const {
  if (t < 1 || t > num_steps()) {
    throw Error("snapshot index " + std::to_string(t) + " out of range 1.." +
                std::to_string(num_steps()));
  }
  return snapshots_[static_cast<std::size_t>(t - 1)];
}

std::size_t DynamicGraph::num_edges() const noexcept {
  std::size_t n = 0;
  for (const auto& s : snapshots_) n += s.edges.size();
  return n;
}

void DynamicGraph::set_labels(LabelTable labels) {
  if (!labels.empty() && (labels.num_vertices() != num_vertices_ ||
                          labels.num_steps() != num_steps())) {
    throw Error("label table shape does not match graph");
  }
  labels_ = std::move(labels);
}

bool operator==(const DynamicGraph& a, const DynamicGraph& b) {
  if (a.num_vertices_ != b.num_vertices_ || a.snapshots_.size() != b.snapshots_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.snapshots_.size(); ++i) {
    if (a.snapshots_[i].edges != b.snapshots_[i].edges) return false;
  }
  return true;
}

DynamicGraph bucket_snapshots(const std::vector<EdgeEvent>& events,
                              std::size_t num_vertices, double window,
                              bool undirected) {
  if (!(window > 0.0)) throw Error("snapshot window must be positive");
  if (events.empty()) throw Error("no events to bucket");
  double t_min = events.front().timestamp;
  for (const auto& e : events) t_min = std::min(t_min, e.timestamp);

  std::vector<Snapshot> snapshots;
  for (const auto& e : events) {
    auto idx = static_cast<std::size_t>(std::floor((e.timestamp - t_min) / window));
    if (idx >= snapshots.size()) snapshots.resize(idx + 1);
    snapshots[idx].edges.push_back({e.src, e.dst});
    if (undirected) snapshots[idx].edges.push_back({e.dst, e.src});
  }
  return DynamicGraph(num_vertices, std::move(snapshots));
}

TemporalSplit split_temporal(const DynamicGraph& graph, int n_train, int n_val,
                             int n_test) {
  if (n_train < 0 || n_val < 0 || n_test < 0 ||
      n_train + n_val + n_test != graph.num_steps()) {
    throw Error("split counts " + std::to_string(n_train) + "/" +
                std::to_string(n_val) + "/" + std::to_string(n_test) +
                " do not sum to T=" + std::to_string(graph.num_steps()));
  }
  TemporalSplit split;
  split.train = {1, n_train};
  split.val = {n_train + 1, n_train + n_val};
  split.test = {n_train + n_val + 1, n_train + n_val + n_test};
  return split;
}

// ---------------------------------------------------------------- statistics

std::vector<VertexId> active_vertices(const Snapshot& snapshot) {
  std::vector<VertexId> out;
  out.reserve(snapshot.edges.size() * 2);
  for (const auto& e : snapshot.edges) {
    out.push_back(e.src);
    out.push_back(e.dst);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t degree(VertexId v, const Snapshot& snapshot) {
  return static_cast<std::size_t>(std::count_if(
      snapshot.edges.begin(), snapshot.edges.end(),
      [v](const Edge& e) { return e.src == v; }));
}

double node_activity(const DynamicGraph& graph) {
  const auto n = graph.num_vertices();
  if (n == 0 || graph.num_steps() == 0) throw Error("node activity of an empty graph");
  std::vector<int> steps_active(n, 0);
  for (const auto& s : graph.snapshots()) {
    for (auto v : active_vertices(s)) ++steps_active[static_cast<std::size_t>(v)];
  }
  double total = 0.0;
  for (int c : steps_active) total += static_cast<double>(c) / graph.num_steps();
  return total / static_cast<double>(n);
}

namespace {

std::vector<std::set<VertexId>> neighbour_sets(const Snapshot& s, std::size_t n) {
  std::vector<std::set<VertexId>> nb(n);
  for (const auto& e : s.edges) {
    nb[static_cast<std::size_t>(e.src)].insert(e.dst);
    nb[static_cast<std::size_t>(e.dst)].insert(e.src);
  }
  return nb;
}

}  // namespace

double context_dynamics(const DynamicGraph& graph) {
  if (graph.num_steps() < 2) throw Error("context dynamics needs at least 2 steps");
  const auto n = graph.num_vertices();
  double total = 0.0;
  std::size_t pairs = 0;
  auto prev = neighbour_sets(graph.snapshot(1), n);
  for (int t = 2; t <= graph.num_steps(); ++t) {
    auto cur = neighbour_sets(graph.snapshot(t), n);
    for (std::size_t v = 0; v < n; ++v) {
      if (prev[v].empty() || cur[v].empty()) continue;
      std::size_t inter = 0;
      for (auto u : prev[v]) inter += cur[v].count(u);
      std::size_t uni = prev[v].size() + cur[v].size() - inter;
      total += static_cast<double>(inter) / static_cast<double>(uni);
      ++pairs;
    }
    prev = std::move(cur);
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

std::vector<bool> seen_vertices(const DynamicGraph& graph, StepRange range) {
  std::vector<bool> seen(graph.num_vertices(), false);
  for (int t = range.first; t <= range.last; ++t) {
    for (const auto& e : graph.snapshot(t).edges) {
      seen[static_cast<std::size_t>(e.src)] = true;
      seen[static_cast<std::size_t>(e.dst)] = true;
    }
  }
  return seen;
}

Snapshot filter_seen(const Snapshot& snapshot, const std::vector<bool>& seen) {
  Snapshot out;
  out.t = snapshot.t;
  auto ok = [&](VertexId v) {
    return v >= 0 && static_cast<std::size_t>(v) < seen.size() &&
           seen[static_cast<std::size_t>(v)];
  };
  for (const auto& e : snapshot.edges) {
    if (ok(e.src) && ok(e.dst)) out.edges.push_back(e);
  }
  return out;
}

void write_edge_stream(std::ostream& out, const DynamicGraph& graph,
                       const Vocabulary& vocab) {
  for (const auto& s : graph.snapshots()) {
    for (const auto& e : s.edges) {
      out << vocab.token(e.src) << '\t' << vocab.token(e.dst) << '\t' << s.t << '\n';
    }
  }
}

void write_labels(std::ostream& out, const DynamicGraph& graph,
                  const Vocabulary& vocab) {
  const auto& labels = graph.labels();
  for (int t = 1; t <= labels.num_steps(); ++t) {
    for (std::size_t v = 0; v < labels.num_vertices(); ++v) {
      if (auto l = labels.get(static_cast<VertexId>(v), t)) {
        out << vocab.token(static_cast<VertexId>(v)) << '\t' << t << '\t'
            << labels.names.at(static_cast<std::size_t>(*l)) << '\n';
      }
    }
  }
}

}  // namespace grade
