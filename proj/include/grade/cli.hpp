#pragma once

// Command implementations behind the `grade` executable. Each command is a
// plain function so tests can drive it without spawning processes.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "grade/dyngraph.hpp"
#include "grade/eval.hpp"
#include "grade/inference.hpp"
#include "grade/synth.hpp"

namespace grade::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr int kCheckpointVersion = 1;

// ------------------------------------------------------------ configuration

struct DatasetConfig {
  std::string edges;
  std::string format = "src,dst,t";
  double window = 1.0;
  bool undirected = false;
  std::string labels;
  std::string vocab;
  int n_train = 0, n_val = 0, n_test = 0;
  bool has_split() const { return n_train + n_val + n_test > 0; }
};

struct RunConfig {
  std::string preset;
  DatasetConfig dataset;
  TrainConfig train;
  SbmConfig sbm;
  std::string out = "out";
  std::size_t top_k = 250;
  /// Fields with no built-in default; must come from a preset, the config
  /// file or flags before training.
  bool has_communities = false, has_gamma = false, has_sigma = false;
};

/// Built-in defaults: L=128, H=128, lr 0.005 decayed by 0.99 every 100
/// updates, tau 0.5.
RunConfig default_run_config();
/// Applies "sbm-easy" or "sbm-hard" (synthetic data, K, gamma, sigma, split).
void apply_preset(RunConfig& config, const std::string& name);
/// Overlays keys present in a JSON config document.
void apply_config_json(RunConfig& config, const nlohmann::json& doc);
void apply_config_file(RunConfig& config, const std::string& path);
/// Throws unless K, gamma and sigma have been provided.
void require_train_fields(const RunConfig& config);

json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// ------------------------------------------------------------ graph files

/// graph.tsv (t, src, dst by id), vocab.tsv and optional labels.tsv in `dir`.
void save_graph_dir(const fs::path& dir, const DynamicGraph& graph, const Vocabulary& vocab);
struct LoadedGraph {
  DynamicGraph graph;
  Vocabulary vocab;
};
LoadedGraph load_graph_dir(const fs::path& dir);

json graph_stats(const DynamicGraph& graph);

// ------------------------------------------------------------ checkpoints

struct Checkpoint {
  GradeModel model;
  TemporalSplit split;
  /// Noise-free state at the last training step.
  StepState last_state;
};

/// Binary layout: "GRADECKP", u64 little-endian header length, JSON header
/// (format_version, dimensions, config, split, array names and shapes), then
/// every array as row-major little-endian float64 in header order.
void save_checkpoint(const fs::path& path, const GradeModel& model, const TemporalSplit& split);
Checkpoint load_checkpoint(const fs::path& path);

// ------------------------------------------------------------ evaluation

struct EvalOptions {
  std::size_t top_k = 250;
  /// Score test steps with the last training step's pi/theta instead of
  /// projecting forward (ablation).
  bool frozen = false;
  /// Test hook replacing the model's neighbour scores.
  std::function<Vec(VertexId v, int t)> scorer;
};

MetricsReport evaluate(const GradeModel& model, const DynamicGraph& graph,
                       const TemporalSplit& split, const EvalOptions& options = {});

// ------------------------------------------------------------ commands

struct IngestArgs {
  DatasetConfig dataset;
  fs::path out;
};
json cmd_ingest(const IngestArgs& args);

void cmd_synth(const SbmConfig& config, const fs::path& out);

struct TrainArgs {
  fs::path graph_dir;
  RunConfig config;
  fs::path out;
  int log_every = 0;
};
TrainResult cmd_train(const TrainArgs& args);

struct EvalArgs {
  fs::path checkpoint;
  fs::path graph_dir;
  fs::path out;
  EvalOptions options;
  std::optional<TemporalSplit> split;
};
MetricsReport cmd_eval(const EvalArgs& args);

struct ProjectArgs {
  fs::path checkpoint;
  int n_steps = 1;
  fs::path out;
};
void cmd_project(const ProjectArgs& args);

struct TopNodesArgs {
  fs::path checkpoint;
  fs::path graph_dir;
  int step = 0;
  int k = 10;
  fs::path out;
};
void cmd_top_nodes(const TopNodesArgs& args);

/// Entry point used by the executable; returns the process exit code.
int run(int argc, char** argv);

}  // namespace grade::cli
