#include <fstream>

#include "grade/cli.hpp"

namespace grade::cli {

RunConfig default_run_config() {
  RunConfig c;
  c.train.embed_dim = 128;
  c.train.hidden_dim = 128;
  c.train.learning_rate = 0.005;
  c.train.lr_decay = 0.99;
  c.train.decay_every = 100;
  c.train.tau = 0.5;
  return c;
}

void apply_preset(RunConfig& config, const std::string& name) {
  if (name == "sbm-easy") {
    config.sbm = sbm_easy_preset();
  } else if (name == "sbm-hard") {
    config.sbm = sbm_hard_preset();
  } else {
    throw Error("unknown preset: " + name);
  }
  config.preset = name;
  config.train.num_communities = config.sbm.num_communities;
  config.train.gamma = 0.1;
  config.train.sigma = 0.1;
  config.train.tau = 0.5;
  config.train.embed_dim = 32;
  config.train.hidden_dim = 32;
  config.train.batch_edges = 1024;
  config.train.epochs = 500;
  config.train.kl_hold_epochs = 150;
  config.train.kl_ramp_epochs = 150;
  config.has_communities = config.has_gamma = config.has_sigma = true;
  config.dataset.n_train = config.sbm.num_steps - 2;
  config.dataset.n_val = 1;
  config.dataset.n_test = 1;
}

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void apply_config_json(RunConfig& config, const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error("config document must be a JSON object");
  if (doc.contains("preset")) apply_preset(config, doc.at("preset").get<std::string>());
  if (doc.contains("dataset")) {
    const auto& d = doc.at("dataset");
    read_key(d, "edges", config.dataset.edges);
    read_key(d, "format", config.dataset.format);
    read_key(d, "window", config.dataset.window);
    read_key(d, "undirected", config.dataset.undirected);
    read_key(d, "labels", config.dataset.labels);
    read_key(d, "vocab", config.dataset.vocab);
    if (d.contains("split")) {
      auto s = d.at("split").get<std::vector<int>>();
      if (s.size() != 3) throw Error("dataset.split must list train, val and test counts");
      config.dataset.n_train = s[0];
      config.dataset.n_val = s[1];
      config.dataset.n_test = s[2];
    }
  }
  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    auto& c = config.train;
    read_key(t, "epochs", c.epochs);
    read_key(t, "batch_edges", c.batch_edges);
    read_key(t, "learning_rate", c.learning_rate);
    read_key(t, "lr_decay", c.lr_decay);
    read_key(t, "decay_every", c.decay_every);
    read_key(t, "tau", c.tau);
    read_key(t, "L", c.embed_dim);
    read_key(t, "H", c.hidden_dim);
    read_key(t, "seed", c.seed);
    read_key(t, "eval_every", c.eval_every);
    read_key(t, "kl_hold_epochs", c.kl_hold_epochs);
    read_key(t, "kl_ramp_epochs", c.kl_ramp_epochs);
    if (t.contains("K")) {
      c.num_communities = t.at("K").get<int>();
      config.has_communities = true;
    }
    if (t.contains("gamma")) {
      c.gamma = t.at("gamma").get<double>();
      config.has_gamma = true;
    }
    if (t.contains("sigma")) {
      c.sigma = t.at("sigma").get<double>();
      config.has_sigma = true;
    }
  }
  if (doc.contains("sbm")) {
    const auto& s = doc.at("sbm");
    read_key(s, "N", config.sbm.num_vertices);
    read_key(s, "K", config.sbm.num_communities);
    read_key(s, "T", config.sbm.num_steps);
    read_key(s, "p_in", config.sbm.p_in);
    read_key(s, "p_out", config.sbm.p_out);
    read_key(s, "drift", config.sbm.drift);
    read_key(s, "seed", config.sbm.seed);
  }
  read_key(doc, "out", config.out);
  read_key(doc, "top_k", config.top_k);
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("config file " + path + ": " + e.what());
  }
  apply_config_json(config, doc);
}

void require_train_fields(const RunConfig& config) {
  std::string missing;
  if (!config.has_communities) missing += " K";
  if (!config.has_gamma) missing += " gamma";
  if (!config.has_sigma) missing += " sigma";
  if (!missing.empty()) {
    throw Error("missing required training settings:" + missing +
                " (set them via --preset, --config or flags)");
  }
}

json train_config_to_json(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_edges"] = c.batch_edges;
  j["learning_rate"] = c.learning_rate;
  j["lr_decay"] = c.lr_decay;
  j["decay_every"] = c.decay_every;
  j["tau"] = c.tau;
  j["gamma"] = c.gamma;
  j["sigma"] = c.sigma;
  j["K"] = c.num_communities;
  j["L"] = c.embed_dim;
  j["H"] = c.hidden_dim;
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["kl_hold_epochs"] = c.kl_hold_epochs;
  j["kl_ramp_epochs"] = c.kl_ramp_epochs;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_edges = j.at("batch_edges").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lr_decay = j.at("lr_decay").get<double>();
  c.decay_every = j.at("decay_every").get<long>();
  c.tau = j.at("tau").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.sigma = j.at("sigma").get<double>();
  c.num_communities = j.at("K").get<int>();
  c.embed_dim = j.at("L").get<int>();
  c.hidden_dim = j.at("H").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.eval_every = j.at("eval_every").get<int>();
  c.kl_hold_epochs = j.at("kl_hold_epochs").get<int>();
  c.kl_ramp_epochs = j.at("kl_ramp_epochs").get<int>();
  return c;
}

}  // namespace grade::cli
