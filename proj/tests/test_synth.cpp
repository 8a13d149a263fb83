#include <doctest.h>

#include <cmath>
#include <sstream>

#include "grade/eval.hpp"
#include "grade/synth.hpp"

using namespace grade;

namespace {

std::vector<int> labels_at(const DynamicGraph& g, int t) {
  std::vector<int> out;
  for (std::size_t v = 0; v < g.num_vertices(); ++v) {
    out.push_back(*g.labels().get(static_cast<VertexId>(v), t));
  }
  return out;
}

std::vector<std::string> label_names_at(const DynamicGraph& g, int t) {
  std::vector<std::string> out;
  for (int l : labels_at(g, t)) out.push_back(g.labels().names.at(static_cast<std::size_t>(l)));
  return out;
}

}  // namespace

TEST_CASE("presets") {
  auto e = sbm_easy_preset();
  CHECK(e.num_vertices == 200);
  CHECK(e.num_communities == 4);
  CHECK(e.num_steps == 5);
  CHECK(e.p_in == 0.3);
  CHECK(e.p_out == 0.01);
  CHECK(e.drift == 0.05);
  auto h = sbm_hard_preset();
  CHECK(h.p_in == 0.1);
  CHECK(h.p_out == 0.03);
  CHECK(h.drift == 0.2);
  CHECK(e.expected_edges_per_step() == doctest::Approx(4 * 50 * 49 * 0.3 + 200 * 150 * 0.01));
}

TEST_CASE("config validation") {
  SbmConfig c;
  c.p_out = 0.5;
  c.p_in = 0.2;
  CHECK_THROWS_AS(generate_dynamic_sbm(c), Error);
  c = SbmConfig{};
  c.drift = 1.5;
  CHECK_THROWS_AS(generate_dynamic_sbm(c), Error);
  c = SbmConfig{};
  c.p_in = c.p_out = 0.0;
  CHECK_THROWS_AS(generate_dynamic_sbm(c), Error);
}

TEST_CASE("no inter-community edges when p_out is zero") {
  SbmConfig c;
  c.p_out = 0.0;
  c.drift = 0.3;
  auto g = generate_dynamic_sbm(c);
  for (int t = 1; t <= g.num_steps(); ++t) {
    for (const auto& e : g.snapshot(t).edges) {
      CHECK(e.src != e.dst);
      CHECK(g.labels().get(e.src, t) == g.labels().get(e.dst, t));
    }
    CHECK(nmi(brute_force_membership(g, t), labels_at(g, t)) == doctest::Approx(1.0));
  }
}

TEST_CASE("labels are constant without drift") {
  SbmConfig c;
  c.drift = 0.0;
  auto g = generate_dynamic_sbm(c);
  CHECK(g.labels().count() == 200 * 5);
  for (int t = 2; t <= 5; ++t) CHECK(labels_at(g, t) == labels_at(g, 1));
  CHECK(g.labels().names == std::vector<std::string>{"c0", "c1", "c2", "c3"});
}

TEST_CASE("intra-community edge count matches its expectation") {
  SbmConfig c = sbm_easy_preset();
  c.num_steps = 1;
  auto g = generate_dynamic_sbm(c);
  std::size_t intra = 0;
  for (const auto& e : g.snapshot(1).edges) intra += g.labels().get(e.src, 1) == g.labels().get(e.dst, 1);
  const double expected = 4.0 * 50.0 * 49.0 * 0.3;
  CHECK(std::abs(intra / expected - 1.0) < 0.1);
}

TEST_CASE("majority-neighbour oracle") {
  auto g = generate_dynamic_sbm(sbm_easy_preset());
  for (int t = 1; t <= 5; ++t) CHECK(nmi(brute_force_membership(g, t), labels_at(g, t)) > 0.9);

  DynamicGraph isolated(3, {Snapshot{1, {{0, 1}}}});
  LabelTable labels(3, 1);
  labels.set(0, 1, 0);
  labels.set(1, 1, 1);
  labels.set(2, 1, 2);
  isolated.set_labels(labels);
  CHECK(brute_force_membership(isolated, 1) == std::vector<int>{1, 1, 2});
}

TEST_CASE("generation is reproducible") {
  SbmConfig c = sbm_hard_preset();
  c.seed = 17;
  auto a = generate_dynamic_sbm(c), b = generate_dynamic_sbm(c);
  CHECK(a == b);
  for (int t = 1; t <= 5; ++t) CHECK(labels_at(a, t) == labels_at(b, t));
  c.seed = 18;
  CHECK_FALSE(generate_dynamic_sbm(c) == a);
}

TEST_CASE("label marginal stays uniform under drift") {
  SbmConfig c;
  c.num_vertices = 2000;
  c.num_steps = 5;
  c.p_in = 0.002;
  c.p_out = 0.0;
  // Full resampling keeps the N*T draws independent.
  c.drift = 1.0;
  c.seed = 3;
  auto g = generate_dynamic_sbm(c);
  std::vector<int> counts(4, 0);
  for (int t = 1; t <= 5; ++t)
    for (int l : labels_at(g, t)) ++counts[l];
  const double n = 10000.0, p = 0.25;
  for (int k = 0; k < 4; ++k) CHECK(std::abs(counts[k] - n * p) <= 3.0 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("synthetic data round-trips through ingestion") {
  SbmConfig c = sbm_easy_preset();
  c.num_vertices = 40;
  c.seed = 4;
  auto g = generate_dynamic_sbm(c);
  auto vocab = synth_vocabulary(40);
  CHECK(vocab.token(7) == synth_vertex_token(7));

  std::stringstream edges, labels;
  write_edge_stream(edges, g, vocab);
  write_labels(labels, g, vocab);
  auto stream = read_edge_stream(edges, EdgeFormat{}, vocab);
  auto back = bucket_snapshots(stream.events, 40, 1.0, false);
  back.set_labels(read_labels(labels, vocab, 40, back.num_steps()));
  CHECK(back == g);
  for (int t = 1; t <= 5; ++t) CHECK(label_names_at(back, t) == label_names_at(g, t));
}
