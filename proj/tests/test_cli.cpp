#include <doctest.h>

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "grade/cli.hpp"

using namespace grade;
using namespace grade::cli;

namespace {

struct TempDir {
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("grade_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& rel) const { return path / rel; }
  fs::path path;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "grade");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::istringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

// Small synthetic graph directory shared by several tests.
fs::path make_graph(const TempDir& dir, SbmConfig sbm, bool labels = true) {
  cmd_synth(sbm, dir / "synth");
  DatasetConfig d;
  d.edges = (dir / "synth" / "edges.tsv").string();
  if (labels) d.labels = (dir / "synth" / "labels.tsv").string();
  d.vocab = (dir / "synth" / "vocab.tsv").string();
  cmd_ingest({d, dir / "graph"});
  return dir / "graph";
}

SbmConfig small_sbm(std::uint64_t seed = 1) {
  SbmConfig s;
  s.num_vertices = 40;
  s.num_communities = 2;
  s.num_steps = 4;
  s.p_in = 0.3;
  s.p_out = 0.02;
  s.seed = seed;
  return s;
}

RunConfig small_run(int epochs) {
  RunConfig c = default_run_config();
  c.train.num_communities = 2;
  c.train.gamma = c.train.sigma = 0.1;
  c.train.embed_dim = c.train.hidden_dim = 6;
  c.train.epochs = epochs;
  c.train.batch_edges = 128;
  c.train.seed = 5;
  c.has_communities = c.has_gamma = c.has_sigma = true;
  return c;
}

bool same_parameters(GradeModel& a, GradeModel& b) {
  auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->name() != pb[i]->name() || pa[i]->value != pb[i]->value) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("built-in defaults and presets") {
  auto c = default_run_config();
  CHECK(c.train.embed_dim == 128);
  CHECK(c.train.hidden_dim == 128);
  CHECK(c.train.learning_rate == 0.005);
  CHECK(c.train.lr_decay == 0.99);
  CHECK(c.train.decay_every == 100);
  CHECK(c.train.tau == 0.5);
  CHECK_THROWS_WITH_AS(require_train_fields(c), doctest::Contains("K gamma sigma"), Error);

  apply_preset(c, "sbm-easy");
  CHECK(c.sbm.num_vertices == 200);
  CHECK(c.train.num_communities == 4);
  CHECK(c.dataset.n_train == 3);
  CHECK(c.dataset.n_val == 1);
  CHECK(c.dataset.n_test == 1);
  CHECK(c.train.epochs == 500);
  CHECK(c.train.kl_hold_epochs == 150);
  CHECK(c.train.kl_ramp_epochs == 150);
  CHECK_NOTHROW(require_train_fields(c));
  CHECK_THROWS_AS(apply_preset(c, "sbm-medium"), Error);
}

TEST_CASE("config documents overlay defaults") {
  auto c = default_run_config();
  apply_config_json(c, nlohmann::json::parse(R"({
    "dataset": {"edges": "e.tsv", "window": 4, "undirected": true, "split": [6, 2, 2]},
    "train": {"K": 8, "gamma": 0.2, "L": 16, "epochs": 7, "kl_ramp_epochs": 20},
    "out": "runs/a"
  })"));
  CHECK(c.dataset.edges == "e.tsv");
  CHECK(c.dataset.window == 4.0);
  CHECK(c.dataset.undirected);
  CHECK(c.dataset.n_val == 2);
  CHECK(c.train.num_communities == 8);
  CHECK(c.train.embed_dim == 16);
  CHECK(c.train.hidden_dim == 128);
  CHECK(c.train.epochs == 7);
  CHECK(c.train.kl_ramp_epochs == 20);
  CHECK(c.train.kl_hold_epochs == 0);
  CHECK(c.out == "runs/a");
  CHECK_THROWS_WITH_AS(require_train_fields(c), doctest::Contains("sigma"), Error);

  CHECK_THROWS_AS(apply_config_json(c, nlohmann::json::parse(R"({"dataset": {"split": [1, 2]}})")),
                  Error);
  CHECK_THROWS_AS(apply_config_json(c, nlohmann::json::parse("[1]")), Error);
  CHECK_THROWS_AS(apply_config_file(c, "/nonexistent/grade.json"), Error);
}

TEST_CASE("train config JSON round trip") {
  TrainConfig t;
  t.epochs = 3;
  t.num_communities = 6;
  t.gamma = 0.25;
  t.seed = 123456789012345ULL;
  t.kl_hold_epochs = 11;
  t.kl_ramp_epochs = 12;
  auto back = train_config_from_json(nlohmann::json::parse(train_config_to_json(t).dump()));
  CHECK(back.epochs == 3);
  CHECK(back.num_communities == 6);
  CHECK(back.gamma == 0.25);
  CHECK(back.seed == t.seed);
  CHECK(back.embed_dim == t.embed_dim);
  CHECK(back.kl_hold_epochs == 11);
  CHECK(back.kl_ramp_epochs == 12);
}

TEST_CASE("flags override config file over defaults") {
  TempDir dir("precedence");
  write_file(dir / "cfg.json", R"({"sbm": {"N": 30, "K": 3, "T": 3, "seed": 4}})");
  REQUIRE(run_args({"synth", "--config", (dir / "cfg.json").string(), "--nodes", "20", "--out",
                    (dir / "s").string()}) == 0);
  std::ifstream vin(dir / "s" / "vocab.tsv");
  auto vocab = Vocabulary::load(vin);
  CHECK(vocab.size() == 20);
  std::ifstream lin(dir / "s" / "labels.tsv");
  auto labels = read_labels(lin, vocab, 20, 3);
  CHECK(labels.count() == 20 * 3);
  CHECK(labels.names.size() <= 3);
}

TEST_CASE("ingest writes the graph and statistics") {
  TempDir dir("ingest");
  write_file(dir / "toy.tsv", "a\tb\t1\nb\tc\t1\na\tc\t2\n");
  DatasetConfig d;
  d.edges = (dir / "toy.tsv").string();
  auto stats = cmd_ingest({d, dir / "g"});
  CHECK(stats["nodes"] == 3);
  CHECK(stats["links"] == 3);
  CHECK(stats["steps"] == 2);
  CHECK(stats["node_activity"].get<double>() >= 0.0);
  CHECK(stats["node_activity"].get<double>() <= 1.0);
  CHECK(fs::exists(dir / "g" / "stats.json"));

  auto loaded = load_graph_dir(dir / "g");
  CHECK(loaded.graph.num_vertices() == 3);
  CHECK(loaded.vocab.token(2) == "c");
  CHECK(loaded.graph.snapshot(2).edges == std::vector<Edge>{{0, 2}});
  CHECK(loaded.graph.labels().empty());

  write_file(dir / "bad.tsv", "a\tb\t1\na\n");
  d.edges = (dir / "bad.tsv").string();
  CHECK_THROWS_WITH_AS(cmd_ingest({d, dir / "g2"}), doctest::Contains("line 2"), ParseError);
  CHECK(run_args({"ingest", "--edges", (dir / "bad.tsv").string(), "--out",
                  (dir / "g3").string()}) != 0);
}

TEST_CASE("synth output is reproducible and matches the edge expectation") {
  TempDir dir("synth");
  SbmConfig s = sbm_easy_preset();
  s.seed = 9;
  cmd_synth(s, dir / "a");
  cmd_synth(s, dir / "b");
  for (const char* f : {"edges.tsv", "labels.tsv", "vocab.tsv"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  DatasetConfig d;
  d.edges = (dir / "a" / "edges.tsv").string();
  d.vocab = (dir / "a" / "vocab.tsv").string();
  d.labels = (dir / "a" / "labels.tsv").string();
  auto stats = cmd_ingest({d, dir / "g"});
  const double expected = s.expected_edges_per_step() * s.num_steps;
  CHECK(std::abs(stats["links"].get<double>() / expected - 1.0) < 0.1);
  CHECK(stats["nodes"] == 200);

  s.drift = 0.0;
  cmd_synth(s, dir / "still");
  std::ifstream in(dir / "still" / "labels.tsv");
  std::map<std::string, std::string> first;
  std::string v, t, label;
  bool constant = true;
  while (in >> v >> t >> label) {
    auto [it, fresh] = first.emplace(v, label);
    if (!fresh && it->second != label) constant = false;
  }
  CHECK(first.size() == 200);
  CHECK(constant);

  SbmConfig bad = s;
  bad.p_out = 0.9;
  CHECK_THROWS_AS(cmd_synth(bad, dir / "bad"), Error);
}

TEST_CASE("checkpoints round trip and reject other versions") {
  TempDir dir("checkpoint");
  TrainConfig t;
  t.num_communities = 3;
  t.embed_dim = 4;
  t.hidden_dim = 5;
  t.seed = 2;
  GradeModel m(12, t);
  std::mt19937_64 rng(3);
  m.initialize(rng);
  TemporalSplit split{{1, 4}, {5, 5}, {6, 7}};
  save_checkpoint(dir / "m.bin", m, split);

  auto ckp = load_checkpoint(dir / "m.bin");
  CHECK(same_parameters(ckp.model, m));
  CHECK(ckp.model.config.hidden_dim == 5);
  CHECK(ckp.model.config.seed == 2);
  CHECK(ckp.split.train == StepRange{1, 4});
  CHECK(ckp.split.test == StepRange{6, 7});
  auto expected = mean_trajectory(m, 4).back();
  CHECK(ckp.last_state.t == 4);
  CHECK(ckp.last_state.pi == expected.pi);
  CHECK(ckp.last_state.h_node == expected.h_node);
  CHECK(ckp.last_state.beta_mean == expected.beta_mean);

  // Header names every array with its shape.
  const std::string bytes = slurp(dir / "m.bin");
  CHECK(bytes.substr(0, 8) == "GRADECKP");
  CHECK(bytes.find("\"psi.weight\"") != std::string::npos);
  CHECK(bytes.find("\"state.pi\",\"shape\":[12,3]") != std::string::npos);

  std::string other = bytes;
  const auto pos = other.find("\"format_version\":1");
  REQUIRE(pos != std::string::npos);
  other[pos + 17] = '2';
  write_file(dir / "v2.bin", other);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "v2.bin"), doctest::Contains("version 2"), Error);

  write_file(dir / "short.bin", bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.bin"), Error);
  write_file(dir / "long.bin", bytes + "x");
  CHECK_THROWS_AS(load_checkpoint(dir / "long.bin"), Error);
  write_file(dir / "junk.bin", "not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.bin"), Error);
}

TEST_CASE("training with zero epochs checkpoints the initialization") {
  TempDir dir("epochs0");
  auto graph = make_graph(dir, small_sbm());
  auto config = small_run(0);
  cmd_train({graph, config, dir / "run"});
  auto ckp = load_checkpoint(dir / "run" / "checkpoint_best.bin");
  GradeModel init(40, config.train);
  std::mt19937_64 rng(config.train.seed);
  init.initialize(rng);
  CHECK(same_parameters(ckp.model, init));
  CHECK(slurp(dir / "run" / "loss.csv") == "iteration,step_t,loss\n");

  config.has_sigma = false;
  CHECK_THROWS_AS(cmd_train({graph, config, dir / "run2"}), Error);
  CHECK(run_args({"train", "--graph", graph.string(), "--out", (dir / "run3").string()}) == 1);
}

TEST_CASE("train and eval are reproducible") {
  TempDir dir("determinism");
  auto graph = make_graph(dir, small_sbm());
  auto config = small_run(4);
  for (const char* name : {"a", "b"}) {
    cmd_train({graph, config, dir / name});
    EvalArgs e;
    e.checkpoint = dir / name / "checkpoint_best.bin";
    e.graph_dir = graph;
    e.out = dir / name;
    cmd_eval(e);
  }
  const std::string loss = slurp(dir / "a" / "loss.csv");
  CHECK(loss.rfind("iteration,step_t,loss\n1,1,", 0) == 0);
  CHECK(loss == slurp(dir / "b" / "loss.csv"));
  CHECK(slurp(dir / "a" / "metrics.json") == slurp(dir / "b" / "metrics.json"));
  CHECK(slurp(dir / "a" / "checkpoint_final.bin") == slurp(dir / "b" / "checkpoint_final.bin"));

  EvalArgs e;
  e.checkpoint = dir / "a" / "checkpoint_best.bin";
  e.graph_dir = graph;
  e.out = dir / "again";
  cmd_eval(e);
  CHECK(slurp(dir / "again" / "metrics.json") == slurp(dir / "a" / "metrics.json"));
}

TEST_CASE("eval reports") {
  TempDir dir("eval");
  auto graph = make_graph(dir, small_sbm());
  cmd_train({graph, small_run(2), dir / "run"});

  EvalArgs e;
  e.checkpoint = dir / "run" / "checkpoint_best.bin";
  e.graph_dir = graph;
  e.out = dir / "run";
  auto report = cmd_eval(e);
  auto doc = nlohmann::json::parse(slurp(dir / "run" / "metrics.json"));
  for (const char* key : {"mar", "nmi", "modularity", "topk_spearman", "per_step"}) {
    CHECK(doc.contains(key));
  }
  CHECK(doc["per_step"].size() == 1);
  CHECK(doc["per_step"][0]["t"] == 4);
  CHECK(report.mar >= 1.0);
  CHECK(report.mar <= 40.0);
  REQUIRE(report.nmi.has_value());
  CHECK(*report.nmi >= 0.0);
  CHECK(*report.nmi <= 1.0);

  // Perfect oracle through the scorer hook, on a test step with one target per source.
  auto loaded = load_graph_dir(graph);
  auto snaps = loaded.graph.snapshots();
  snaps.back().edges.clear();
  for (VertexId v = 0; v < 40; ++v) snaps.back().edges.push_back({v, (v + 7) % 40});
  DynamicGraph ring(40, snaps);
  ring.set_labels(loaded.graph.labels());
  save_graph_dir(dir / "ring", ring, loaded.vocab);
  e.graph_dir = dir / "ring";
  e.options.scorer = [](VertexId v, int) {
    Vec s = Vec::Zero(40);
    s((v + 7) % 40) = 1.0;
    return s;
  };
  CHECK(cmd_eval(e).mar == 1.0);
}

TEST_CASE("eval on an unlabeled dataset omits nmi with a warning") {
  TempDir dir("unlabeled");
  auto graph = make_graph(dir, small_sbm(), false);
  cmd_train({graph, small_run(1), dir / "run"});
  REQUIRE(run_args({"eval", "--checkpoint", (dir / "run" / "checkpoint_best.bin").string(),
                    "--graph", graph.string(), "--out", (dir / "run").string()}) == 0);
  auto doc = nlohmann::json::parse(slurp(dir / "run" / "metrics.json"));
  CHECK_FALSE(doc.contains("nmi"));
  REQUIRE(doc.contains("warnings"));
  CHECK(doc["warnings"][0].get<std::string>().find("no labels") != std::string::npos);
}

TEST_CASE("top nodes") {
  TempDir dir("topnodes");
  auto graph = make_graph(dir, small_sbm());
  cmd_train({graph, small_run(2), dir / "run"});
  const auto ckp = dir / "run" / "checkpoint_best.bin";

  cmd_top_nodes({ckp, graph, 4, 1, dir / "k1"});
  auto rows = read_tsv(dir / "k1" / "top_nodes.tsv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][0] == "0");
  CHECK(rows[1][0] == "1");
  CHECK(rows[0][1] == "1");

  cmd_top_nodes({ckp, graph, 2, 15, dir / "k15"});
  rows = read_tsv(dir / "k15" / "top_nodes.tsv");
  REQUIRE(rows.size() == 30);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][0] != rows[i - 1][0]) continue;
    CHECK(std::stod(rows[i][3]) <= std::stod(rows[i - 1][3]));
    CHECK(std::stoi(rows[i][1]) == std::stoi(rows[i - 1][1]) + 1);
  }

  CHECK_THROWS_AS(cmd_top_nodes({ckp, graph, 0, 3, dir / "bad"}), Error);
  CHECK_THROWS_AS(cmd_top_nodes({ckp, graph, 5, 3, dir / "bad"}), Error);
  CHECK(run_args({"top-nodes", "--checkpoint", ckp.string(), "--step", "9", "--out",
                  (dir / "bad").string()}) == 1);
}

TEST_CASE("projection command") {
  TempDir dir("project");
  auto graph = make_graph(dir, small_sbm());
  cmd_train({graph, small_run(1), dir / "run"});
  REQUIRE(run_args({"project", "--checkpoint", (dir / "run" / "checkpoint_best.bin").string(),
                    "--steps", "2", "--out", (dir / "proj").string()}) == 0);
  auto doc = nlohmann::json::parse(slurp(dir / "proj" / "projection.json"));
  CHECK(doc["from_step"] == 2);
  REQUIRE(doc["steps"].size() == 2);
  CHECK(doc["steps"][1]["t"] == 4);
  CHECK(doc["steps"][0]["pi"].size() == 40);
  CHECK(doc["steps"][0]["theta"].size() == 2);

  // Same as rolling the checkpointed model forward from scratch.
  auto ckp = load_checkpoint(dir / "run" / "checkpoint_best.bin");
  auto direct = project_future(ckp.model, mean_trajectory(ckp.model, 2), 2);
  CHECK(doc["steps"][1]["pi"][7][1].get<double>() == doctest::Approx(direct[1].state.pi(7, 1)));
}

TEST_CASE("stats command and argument errors") {
  TempDir dir("stats");
  auto graph = make_graph(dir, small_sbm());
  CHECK(run_args({"stats", "--graph", graph.string()}) == 0);
  CHECK(run_args({"stats", "--graph", (dir / "missing").string()}) == 1);
  CHECK(run_args({"bogus"}) != 0);
  CHECK(run_args({}) != 0);
}

TEST_CASE("loss curve falls on the easy synthetic instance" * doctest::may_fail()) {
  TempDir dir("losscurve");
  SbmConfig s = sbm_easy_preset();
  auto graph = make_graph(dir, s);
  RunConfig c = default_run_config();
  apply_preset(c, "sbm-easy");
  c.train.epochs = 200;
  c.train.eval_every = 0;
  cmd_train({graph, c, dir / "run"});
  std::ifstream in(dir / "run" / "loss.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> loss;
  while (std::getline(in, line)) loss.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  REQUIRE(loss.size() >= 100);
  // Smoothed over a window of 50 iterations.
  auto mean = [&](std::size_t first) {
    double sum = 0.0;
    for (std::size_t i = first; i < first + 50; ++i) sum += loss[i];
    return sum / 50.0;
  };
  const double start = mean(0), end = mean(loss.size() - 50);
  INFO("start ", start, " end ", end);
  CHECK(end < start);
  CHECK(end <= 0.7 * start);
}

TEST_CASE("top node of each community sits in its planted community" * doctest::may_fail()) {
  TempDir dir("planted");
  SbmConfig s = sbm_easy_preset();
  s.p_out = 0.0;
  s.drift = 0.0;
  auto graph = make_graph(dir, s);
  RunConfig c = default_run_config();
  apply_preset(c, "sbm-easy");
  cmd_train({graph, c, dir / "run"});
  const auto ckp_path = dir / "run" / "checkpoint_best.bin";
  cmd_top_nodes({ckp_path, graph, 3, 1, dir / "top"});

  auto loaded = load_graph_dir(graph);
  auto ckp = load_checkpoint(ckp_path);
  const Mat theta = node_distributions(mean_trajectory(ckp.model, 3).back().beta, ckp.model.gen);
  // Each model community corresponds to the planted community holding most of its mass.
  std::vector<int> match;
  for (Eigen::Index k = 0; k < theta.rows(); ++k) {
    std::vector<double> mass(4, 0.0);
    for (VertexId v = 0; v < 200; ++v) mass[*loaded.graph.labels().get(v, 3)] += theta(k, v);
    match.push_back(static_cast<int>(std::max_element(mass.begin(), mass.end()) - mass.begin()));
  }
  auto rows = read_tsv(dir / "top" / "top_nodes.tsv");
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    const int k = std::stoi(r[0]);
    const auto v = loaded.vocab.find(r[2]);
    REQUIRE(v.has_value());
    CHECK(*loaded.graph.labels().get(*v, 3) == match[k]);
  }
  std::sort(match.begin(), match.end());
  CHECK(std::unique(match.begin(), match.end()) == match.end());
}
