#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "grade/cli.hpp"

namespace grade::cli {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_json(const fs::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

TemporalSplit resolve_split(const DynamicGraph& graph, const DatasetConfig& d) {
  if (d.has_split()) return split_temporal(graph, d.n_train, d.n_val, d.n_test);
  const int t = graph.num_steps();
  if (t < 3) throw Error("need at least 3 steps for the default train/val/test split");
  return split_temporal(graph, t - 2, 1, 1);
}

// Neighbour-averaged membership, or the prior mixture for isolated nodes.
RowVec membership_or_prior(VertexId v, const Snapshot& snap, const ProjectedStep& step,
                           const GenerativeParams& gen) {
  try {
    return community_membership(v, snap, step, gen);
  } catch (const NoNeighboursError&) {
    return step.state.pi.row(v);
  }
}

}  // namespace

// ------------------------------------------------------------ graph files

void save_graph_dir(const fs::path& dir, const DynamicGraph& graph, const Vocabulary& vocab) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "graph.tsv");
    out << "# vertices " << graph.num_vertices() << " steps " << graph.num_steps() << '\n';
    for (const auto& s : graph.snapshots()) {
      for (const auto& e : s.edges) out << s.t << '\t' << e.src << '\t' << e.dst << '\n';
    }
  }
  {
    auto out = open_out(dir / "vocab.tsv");
    vocab.save(out);
  }
  const fs::path labels = dir / "labels.tsv";
  if (!graph.labels().empty()) {
    auto out = open_out(labels);
    write_labels(out, graph, vocab);
  } else if (fs::exists(labels)) {
    fs::remove(labels);
  }
}

LoadedGraph load_graph_dir(const fs::path& dir) {
  LoadedGraph loaded;
  {
    auto in = open_in(dir / "vocab.tsv");
    loaded.vocab = Vocabulary::load(in);
  }
  auto in = open_in(dir / "graph.tsv");
  std::string line;
  std::size_t n = 0;
  int steps = 0;
  {
    if (!std::getline(in, line)) throw ParseError(1, "empty graph file");
    std::istringstream head(line);
    std::string hash, kv, ks;
    if (!(head >> hash >> kv >> n >> ks >> steps) || hash != "#" || kv != "vertices" ||
        ks != "steps") {
      throw ParseError(1, "expected '# vertices N steps T'");
    }
  }
  if (n != loaded.vocab.size()) throw Error("graph.tsv and vocab.tsv disagree on vertex count");
  std::vector<Snapshot> snaps(static_cast<std::size_t>(steps));
  for (int t = 1; t <= steps; ++t) snaps[static_cast<std::size_t>(t - 1)].t = t;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    long t = 0, u = 0, v = 0;
    if (!(fields >> t >> u >> v)) throw ParseError(lineno, "expected t, src, dst");
    if (t < 1 || t > steps) throw ParseError(lineno, "step out of range");
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n) {
      throw ParseError(lineno, "vertex id out of range");
    }
    snaps[static_cast<std::size_t>(t - 1)].edges.push_back(
        {static_cast<VertexId>(u), static_cast<VertexId>(v)});
  }
  loaded.graph = DynamicGraph(n, std::move(snaps));
  if (fs::exists(dir / "labels.tsv")) {
    auto lin = open_in(dir / "labels.tsv");
    loaded.graph.set_labels(read_labels(lin, loaded.vocab, n, steps));
  }
  return loaded;
}

json graph_stats(const DynamicGraph& graph) {
  json j;
  j["nodes"] = graph.num_vertices();
  j["links"] = graph.num_edges();
  j["steps"] = graph.num_steps();
  j["node_activity"] = node_activity(graph);
  if (graph.num_steps() >= 2) {
    j["context_dynamics"] = context_dynamics(graph);
  } else {
    j["context_dynamics"] = nullptr;
  }
  return j;
}

// ------------------------------------------------------------ evaluation

MetricsReport evaluate(const GradeModel& model, const DynamicGraph& graph,
                       const TemporalSplit& split, const EvalOptions& options) {
  if (split.test.size() == 0) throw Error("evaluate: no test steps");
  if (split.test.last > graph.num_steps()) throw Error("evaluate: test steps beyond the graph");
  if (static_cast<std::size_t>(model.num_vertices()) != graph.num_vertices()) {
    throw Error("evaluate: model and graph vertex counts differ");
  }
  const auto& gen = model.gen;
  const auto seen = seen_vertices(graph, split.train);
  const auto traj = mean_trajectory(model, split.train.last);

  // One scoring state per test step.
  std::vector<ProjectedStep> steps;
  if (options.frozen) {
    ProjectedStep frozen;
    frozen.state = traj.back();
    frozen.pi_prev = traj.size() > 1 ? traj[traj.size() - 2].pi : traj.back().pi;
    frozen.theta = node_distributions(frozen.state.beta, gen);
    for (int t = split.test.first; t <= split.test.last; ++t) {
      frozen.t = t;
      steps.push_back(frozen);
    }
  } else {
    auto projected = project_future(model, traj, split.test.last - split.train.last);
    for (auto& p : projected) {
      if (split.test.contains(p.t)) steps.push_back(std::move(p));
    }
  }

  MetricsReport report;
  const auto& labels = graph.labels();
  const std::size_t n = graph.num_vertices();
  const Eigen::Index k = model.num_communities();
  Mat pooled = Mat::Zero(static_cast<Eigen::Index>(n), k);
  Mat mean_theta = Mat::Zero(k, static_cast<Eigen::Index>(n));
  double nmi_total = 0.0;
  int nmi_steps = 0;

  double rank_total = 0.0;
  std::size_t rank_count = 0;
  for (const auto& step : steps) {
    const Snapshot snap = filter_seen(graph.snapshot(step.t), seen);
    StepMetrics m;
    m.t = step.t;
    m.num_edges = snap.edges.size();
    if (!snap.edges.empty()) {
      if (options.scorer) {
        const int t = step.t;
        m.mar = mean_average_rank(snap.edges,
                                  [&](VertexId v) { return options.scorer(v, t); });
      } else {
        m.mar = mean_average_rank(snap.edges, step.state.pi, step.theta);
      }
      rank_total += m.mar * static_cast<double>(snap.edges.size());
      rank_count += snap.edges.size();
    }
    mean_theta += step.theta / static_cast<double>(steps.size());

    std::vector<int> pred, truth;
    for (std::size_t v = 0; v < n; ++v) {
      if (!seen[v]) continue;
      const RowVec mem = membership_or_prior(static_cast<VertexId>(v), snap, step, gen);
      pooled.row(static_cast<Eigen::Index>(v)) += mem;
      if (auto l = labels.empty() ? std::nullopt : labels.get(static_cast<VertexId>(v), step.t)) {
        pred.push_back(hard_assignment(mem));
        truth.push_back(*l);
      }
    }
    if (!pred.empty()) {
      m.nmi = nmi(pred, truth);
      nmi_total += *m.nmi;
      ++nmi_steps;
    }
    report.per_step.push_back(m);
  }
  if (rank_count == 0) throw Error("evaluate: no test edges between vertices seen in training");
  report.mar = rank_total / static_cast<double>(rank_count);

  if (labels.empty()) {
    report.warnings.push_back("dataset has no labels; nmi omitted");
  } else if (nmi_steps == 0) {
    report.warnings.push_back("no labeled test vertices; nmi omitted");
  } else {
    report.nmi = nmi_total / nmi_steps;
  }

  std::vector<int> assignment(n, -1);
  for (std::size_t v = 0; v < n; ++v) {
    if (seen[v]) assignment[v] = hard_assignment(pooled.row(static_cast<Eigen::Index>(v)));
  }
  const WeightedGraph agg = aggregate_undirected(graph, split.test, &seen);
  try {
    report.modularity = modularity(agg, assignment);
  } catch (const Error& e) {
    report.warnings.push_back(std::string("modularity undefined: ") + e.what());
  }
  try {
    report.topk_spearman = topk_spearman(options.top_k, mean_theta, agg, assignment);
  } catch (const Error& e) {
    report.warnings.push_back(std::string("topk_spearman undefined: ") + e.what());
  }
  return report;
}

// ------------------------------------------------------------ commands

json cmd_ingest(const IngestArgs& args) {
  const auto& d = args.dataset;
  if (d.edges.empty()) throw Error("ingest: no edge file given");
  Vocabulary vocab;
  if (!d.vocab.empty()) {
    auto in = open_in(d.vocab);
    vocab = Vocabulary::load(in);
  }
  auto stream = load_edge_stream(d.edges, EdgeFormat::parse(d.format), std::move(vocab));
  DynamicGraph graph =
      bucket_snapshots(stream.events, stream.vocab.size(), d.window, d.undirected);
  if (!d.labels.empty()) {
    auto in = open_in(d.labels);
    graph.set_labels(read_labels(in, stream.vocab, graph.num_vertices(), graph.num_steps()));
  }
  save_graph_dir(args.out, graph, stream.vocab);
  json stats = graph_stats(graph);
  write_json(args.out / "stats.json", stats);
  return stats;
}

void cmd_synth(const SbmConfig& config, const fs::path& out) {
  const DynamicGraph graph = generate_dynamic_sbm(config);
  const Vocabulary vocab = synth_vocabulary(graph.num_vertices());
  fs::create_directories(out);
  {
    auto f = open_out(out / "edges.tsv");
    write_edge_stream(f, graph, vocab);
  }
  {
    auto f = open_out(out / "labels.tsv");
    write_labels(f, graph, vocab);
  }
  {
    auto f = open_out(out / "vocab.tsv");
    vocab.save(f);
  }
}

TrainResult cmd_train(const TrainArgs& args) {
  require_train_fields(args.config);
  const auto loaded = load_graph_dir(args.graph_dir);
  const TemporalSplit split = resolve_split(loaded.graph, args.config.dataset);

  TrainOptions options;
  options.log_every = args.log_every;
  TrainResult result = train(loaded.graph, split, args.config.train, options);

  fs::create_directories(args.out);
  {
    auto out = open_out(args.out / "loss.csv");
    out << "iteration,step_t,loss\n";
    for (const auto& r : result.history) {
      out << r.iteration << ',' << r.step << ',' << fmt_double(r.loss) << '\n';
    }
  }
  save_checkpoint(args.out / "checkpoint_best.bin", result.model, split);
  save_checkpoint(args.out / "checkpoint_final.bin", result.final_model, split);

  json summary;
  summary["best_epoch"] = result.best_epoch;
  summary["best_validation_mar"] = result.best_validation_mar;
  summary["validation_mar"] = result.validation_mar;
  summary["epoch_loss"] = result.epoch_loss;
  summary["config"] = train_config_to_json(args.config.train);
  write_json(args.out / "train_summary.json", summary);
  return result;
}

MetricsReport cmd_eval(const EvalArgs& args) {
  const Checkpoint ckp = load_checkpoint(args.checkpoint);
  const auto loaded = load_graph_dir(args.graph_dir);
  const TemporalSplit split = args.split.value_or(ckp.split);
  MetricsReport report = evaluate(ckp.model, loaded.graph, split, args.options);
  write_json(args.out / "metrics.json", report.to_json());
  return report;
}

void cmd_project(const ProjectArgs& args) {
  const Checkpoint ckp = load_checkpoint(args.checkpoint);
  const PosteriorTrajectory traj{ckp.last_state};
  const auto projected = project_future(ckp.model, traj, args.n_steps);
  json doc;
  doc["from_step"] = ckp.last_state.t;
  json steps = json::array();
  for (const auto& p : projected) {
    json s;
    s["t"] = p.t;
    json pi = json::array();
    for (Eigen::Index r = 0; r < p.state.pi.rows(); ++r) {
      pi.push_back(std::vector<double>(p.state.pi.row(r).begin(), p.state.pi.row(r).end()));
    }
    json theta = json::array();
    for (Eigen::Index r = 0; r < p.theta.rows(); ++r) {
      theta.push_back(std::vector<double>(p.theta.row(r).begin(), p.theta.row(r).end()));
    }
    s["pi"] = std::move(pi);
    s["theta"] = std::move(theta);
    steps.push_back(std::move(s));
  }
  doc["steps"] = std::move(steps);
  write_json(args.out / "projection.json", doc);
}

void cmd_top_nodes(const TopNodesArgs& args) {
  if (args.k < 1) throw Error("top-nodes: k must be positive");
  const Checkpoint ckp = load_checkpoint(args.checkpoint);
  const int limit = std::max(ckp.split.test.last, ckp.split.train.last);
  if (args.step < 1 || args.step > limit) {
    throw Error("top-nodes: step " + std::to_string(args.step) + " outside projectable range 1.." +
                std::to_string(limit));
  }
  Mat beta;
  if (args.step <= ckp.last_state.t) {
    beta = mean_trajectory(ckp.model, args.step).back().beta;
  } else {
    const PosteriorTrajectory traj{ckp.last_state};
    beta = project_future(ckp.model, traj, args.step - ckp.last_state.t).back().state.beta;
  }
  const Mat theta = node_distributions(beta, ckp.model.gen);

  Vocabulary vocab;
  if (!args.graph_dir.empty()) {
    auto in = open_in(args.graph_dir / "vocab.tsv");
    vocab = Vocabulary::load(in);
  } else {
    vocab = synth_vocabulary(ckp.model.num_vertices());
  }
  if (vocab.size() != ckp.model.num_vertices()) throw Error("top-nodes: vocabulary size mismatch");

  auto out = open_out(args.out / "top_nodes.tsv");
  out << "community\trank\ttoken\tprobability\n";
  const auto n = static_cast<std::size_t>(theta.cols());
  const std::size_t k = std::min(static_cast<std::size_t>(args.k), n);
  for (Eigen::Index c = 0; c < theta.rows(); ++c) {
    std::vector<VertexId> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](VertexId a, VertexId b) { return theta(c, a) > theta(c, b); });
    for (std::size_t r = 0; r < k; ++r) {
      out << c << '\t' << r + 1 << '\t' << vocab.token(order[r]) << '\t'
          << fmt_double(theta(c, order[r])) << '\n';
    }
  }
}

// ------------------------------------------------------------ entry point

namespace {

struct Flags {
  std::string config, preset, out;
  std::uint64_t seed = 0;
};

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Dynamic graph generative model: training, projection and evaluation"};
  app.require_subcommand(1);
  Flags flags;
  RunConfig overrides = default_run_config();
  std::vector<int> split;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON config file");
    sub->add_option("--seed", flags.seed, "random seed");
    sub->add_option("--out", flags.out, "output directory");
  };

  auto* ingest = app.add_subcommand("ingest", "ingest an edge stream into a graph directory");
  add_common(ingest);
  ingest->add_option("--edges", overrides.dataset.edges, "edge stream file");
  ingest->add_option("--format", overrides.dataset.format, "field order, e.g. src,dst,t");
  ingest->add_option("--window", overrides.dataset.window, "snapshot width in time units");
  ingest->add_flag("--undirected", overrides.dataset.undirected, "add both orientations");
  ingest->add_option("--labels", overrides.dataset.labels, "labels TSV (vertex, t, label)");
  ingest->add_option("--vocab", overrides.dataset.vocab, "vocabulary TSV fixing the vertex set");

  std::string graph_dir;
  auto* synth = app.add_subcommand("synth", "generate a dynamic stochastic block model");
  add_common(synth);
  synth->add_option("--preset", flags.preset, "sbm-easy or sbm-hard");
  synth->add_option("--nodes", overrides.sbm.num_vertices, "number of vertices");
  synth->add_option("--communities", overrides.sbm.num_communities, "number of communities");
  synth->add_option("--steps", overrides.sbm.num_steps, "number of steps");
  synth->add_option("--p-in", overrides.sbm.p_in, "intra-community edge probability");
  synth->add_option("--p-out", overrides.sbm.p_out, "inter-community edge probability");
  synth->add_option("--drift", overrides.sbm.drift, "per-step resampling probability");

  auto* trainc = app.add_subcommand("train", "train a model on a graph directory");
  add_common(trainc);
  int log_every = 0;
  trainc->add_option("--graph", graph_dir, "graph directory from ingest")->required();
  trainc->add_option("--preset", flags.preset, "sbm-easy or sbm-hard");
  trainc->add_option("--epochs", overrides.train.epochs, "training epochs");
  trainc->add_option("--batch-edges", overrides.train.batch_edges, "edges per batch");
  trainc->add_option("--lr", overrides.train.learning_rate, "learning rate");
  trainc->add_option("--lr-decay", overrides.train.lr_decay, "learning rate decay factor");
  trainc->add_option("--decay-every", overrides.train.decay_every, "updates per decay");
  trainc->add_option("--tau", overrides.train.tau, "Gumbel-softmax temperature");
  trainc->add_option("--gamma", overrides.train.gamma, "community random-walk scale");
  trainc->add_option("--sigma", overrides.train.sigma, "node random-walk scale");
  trainc->add_option("-K,--communities", overrides.train.num_communities, "communities");
  trainc->add_option("--embed-dim", overrides.train.embed_dim, "embedding dimension L");
  trainc->add_option("--hidden-dim", overrides.train.hidden_dim, "GRU hidden size H");
  trainc->add_option("--eval-every", overrides.train.eval_every, "epochs per validation");
  trainc->add_option("--kl-hold", overrides.train.kl_hold_epochs,
                     "epochs with the assignment KL switched off");
  trainc->add_option("--kl-ramp", overrides.train.kl_ramp_epochs,
                     "epochs to ramp the assignment KL back to full weight");
  trainc->add_option("--split", split, "train val test step counts")->expected(3);
  trainc->add_option("--log-every", log_every, "progress log interval in epochs");

  std::string checkpoint;
  std::size_t top_k = 250;
  bool frozen = false;
  auto* evalc = app.add_subcommand("eval", "evaluate a checkpoint on the test steps");
  add_common(evalc);
  evalc->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  evalc->add_option("--graph", graph_dir, "graph directory")->required();
  evalc->add_option("--top-k", top_k, "nodes per community for the Spearman metric");
  evalc->add_flag("--frozen", frozen, "score with the last training step (no projection)");
  evalc->add_option("--split", split, "train val test step counts")->expected(3);

  int n_steps = 1;
  auto* project = app.add_subcommand("project", "project mixtures beyond the training steps");
  add_common(project);
  project->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  project->add_option("--steps", n_steps, "steps to project");

  int step = 0, k = 10;
  auto* top = app.add_subcommand("top-nodes", "most probable nodes per community");
  add_common(top);
  top->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  top->add_option("--graph", graph_dir, "graph directory (for vertex tokens)");
  top->add_option("--step", step, "time step")->required();
  top->add_option("-k", k, "nodes per community");

  auto* stats = app.add_subcommand("stats", "descriptive statistics of a graph directory");
  add_common(stats);
  stats->add_option("--graph", graph_dir, "graph directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    auto given = [&](const std::string& name) { return sub->count(name) > 0; };

    // Defaults, then preset, then config file, then explicit flags.
    RunConfig config = default_run_config();
    if (!flags.preset.empty()) apply_preset(config, flags.preset);
    if (!flags.config.empty()) apply_config_file(config, flags.config);
    if (given("--out")) config.out = flags.out;
    if (given("--seed")) {
      config.train.seed = flags.seed;
      config.sbm.seed = flags.seed;
    }
    const fs::path out = config.out;

    if (sub == ingest) {
      for (const char* f : {"--edges", "--format", "--window", "--labels", "--vocab"}) {
        if (!given(f)) continue;
        const std::string name = f;
        if (name == "--edges") config.dataset.edges = overrides.dataset.edges;
        if (name == "--format") config.dataset.format = overrides.dataset.format;
        if (name == "--window") config.dataset.window = overrides.dataset.window;
        if (name == "--labels") config.dataset.labels = overrides.dataset.labels;
        if (name == "--vocab") config.dataset.vocab = overrides.dataset.vocab;
      }
      if (given("--undirected")) config.dataset.undirected = true;
      std::cout << cmd_ingest({config.dataset, out}).dump(2) << '\n';
    } else if (sub == synth) {
      auto& s = config.sbm;
      if (given("--nodes")) s.num_vertices = overrides.sbm.num_vertices;
      if (given("--communities")) s.num_communities = overrides.sbm.num_communities;
      if (given("--steps")) s.num_steps = overrides.sbm.num_steps;
      if (given("--p-in")) s.p_in = overrides.sbm.p_in;
      if (given("--p-out")) s.p_out = overrides.sbm.p_out;
      if (given("--drift")) s.drift = overrides.sbm.drift;
      cmd_synth(s, out);
    } else if (sub == trainc) {
      auto& t = config.train;
      const auto& o = overrides.train;
      if (given("--epochs")) t.epochs = o.epochs;
      if (given("--batch-edges")) t.batch_edges = o.batch_edges;
      if (given("--lr")) t.learning_rate = o.learning_rate;
      if (given("--lr-decay")) t.lr_decay = o.lr_decay;
      if (given("--decay-every")) t.decay_every = o.decay_every;
      if (given("--tau")) t.tau = o.tau;
      if (given("--embed-dim")) t.embed_dim = o.embed_dim;
      if (given("--hidden-dim")) t.hidden_dim = o.hidden_dim;
      if (given("--eval-every")) t.eval_every = o.eval_every;
      if (given("--kl-hold")) t.kl_hold_epochs = o.kl_hold_epochs;
      if (given("--kl-ramp")) t.kl_ramp_epochs = o.kl_ramp_epochs;
      if (given("--gamma")) {
        t.gamma = o.gamma;
        config.has_gamma = true;
      }
      if (given("--sigma")) {
        t.sigma = o.sigma;
        config.has_sigma = true;
      }
      if (given("--communities")) {
        t.num_communities = o.num_communities;
        config.has_communities = true;
      }
      if (!split.empty()) {
        config.dataset.n_train = split[0];
        config.dataset.n_val = split[1];
        config.dataset.n_test = split[2];
      }
      TrainArgs args{graph_dir, config, out, log_every};
      const auto result = cmd_train(args);
      std::cout << "best epoch " << result.best_epoch << ", checkpoints in " << out.string()
                << '\n';
    } else if (sub == evalc) {
      EvalArgs args;
      args.checkpoint = checkpoint;
      args.graph_dir = graph_dir;
      args.out = out;
      args.options.top_k = given("--top-k") ? top_k : config.top_k;
      args.options.frozen = frozen;
      if (!split.empty()) {
        const auto loaded = load_graph_dir(graph_dir);
        args.split = split_temporal(loaded.graph, split[0], split[1], split[2]);
      }
      std::cout << cmd_eval(args).to_json().dump(2) << '\n';
    } else if (sub == project) {
      cmd_project({checkpoint, n_steps, out});
    } else if (sub == top) {
      cmd_top_nodes({checkpoint, graph_dir, step, k, out});
    } else if (sub == stats) {
      const json s = graph_stats(load_graph_dir(graph_dir).graph);
      std::cout << s.dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace grade::cli
