#include "grade/model.hpp"

#include <cmath>
#include <string>

namespace grade {

GenerativeParams::GenerativeParams(std::size_t num_vertices, int num_communities,
                                   int embed_dim, double gamma_, double sigma_)
    : phi0("phi0", Mat::Zero(static_cast<Eigen::Index>(num_vertices), embed_dim)),
      beta0("beta0", Mat::Zero(num_communities, embed_dim)),
      psi("psi", embed_dim, static_cast<Eigen::Index>(num_communities) * num_communities),
      zeta("zeta", embed_dim, static_cast<Eigen::Index>(num_vertices)),
      gamma(gamma_),
      sigma(sigma_),
      num_communities(num_communities),
      embed_dim(embed_dim) {
  if (num_vertices < 1 || num_communities < 1 || embed_dim < 1) {
    throw Error("GenerativeParams: N, K and L must be positive");
  }
  if (gamma < 0.0 || sigma < 0.0) throw Error("GenerativeParams: negative smoothness");
}

void GenerativeParams::initialize(std::mt19937_64& rng) {
  init_normal({&phi0, &beta0}, 0.1, rng);
  init_linear(psi, rng);
  init_linear(zeta, rng);
}

std::vector<Parameter*> GenerativeParams::parameters() {
  return {&phi0, &beta0, &psi.weight, &psi.bias, &zeta.weight, &zeta.bias};
}

Vec evolve_embedding_prior(const Vec& prev, double smoothness, const Vec& noise) {
  if (smoothness < 0.0) throw Error("evolve_embedding_prior: negative smoothness");
  if (prev.size() != noise.size()) throw ShapeError("evolve_embedding_prior: shape mismatch");
  return prev + smoothness * noise;
}

Mat transition_rows(const Mat& phi, const GenerativeParams& params) {
  const Eigen::Index k = params.num_communities;
  Mat logits = params.psi.apply_rows(phi);
  require_finite(logits, "transition logits");
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index n = 0; n < logits.rows(); ++n) {
    for (Eigen::Index i = 0; i < k; ++i) {
      out.row(n).segment(i * k, k) =
          softmax(logits.row(n).segment(i * k, k).transpose()).transpose();
    }
  }
  return out;
}

Mat transition_matrix(const Vec& phi, const GenerativeParams& params) {
  const Eigen::Index k = params.num_communities;
  RowVec flat = transition_rows(phi.transpose(), params).row(0);
  Mat a(k, k);
  for (Eigen::Index i = 0; i < k; ++i) a.row(i) = flat.segment(i * k, k);
  return a;
}

RowVec update_mixture(const RowVec& pi_prev, const Mat& a) {
  const Eigen::Index k = pi_prev.size();
  if (a.rows() != k || a.cols() != k) throw ShapeError("update_mixture: A must be K x K");
  if ((pi_prev.array() < -kSimplexTolerance).any() ||
      std::abs(pi_prev.sum() - 1.0) > kSimplexTolerance) {
    throw Error("update_mixture: pi is off the simplex");
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    if ((a.row(i).array() < -kSimplexTolerance).any() ||
        std::abs(a.row(i).sum() - 1.0) > kSimplexTolerance) {
      throw Error("update_mixture: A is not row-stochastic");
    }
  }
  return pi_prev * a;
}

Mat update_mixture_rows(const Mat& pi_prev, const Mat& transitions) {
  const Eigen::Index k = pi_prev.cols();
  if (transitions.rows() != pi_prev.rows() || transitions.cols() != k * k) {
    throw ShapeError("update_mixture_rows: shape mismatch");
  }
  Mat out = Mat::Zero(pi_prev.rows(), k);
  for (Eigen::Index n = 0; n < pi_prev.rows(); ++n) {
    for (Eigen::Index i = 0; i < k; ++i) {
      out.row(n) += pi_prev(n, i) * transitions.row(n).segment(i * k, k);
    }
  }
  return out;
}

Vec node_distribution(const Vec& beta_k, const GenerativeParams& params) {
  return softmax(params.zeta.apply(beta_k));
}

Mat node_distributions(const Mat& beta, const GenerativeParams& params) {
  return row_softmax(params.zeta.apply_rows(beta));
}

double edge_likelihood(VertexId v, VertexId c, const Mat& pi, const Mat& theta) {
  if (pi.cols() != theta.rows()) throw ShapeError("edge_likelihood: K mismatch");
  if (v < 0 || v >= pi.rows() || c < 0 || c >= theta.cols()) {
    throw Error("edge_likelihood: vertex id out of range");
  }
  return pi.row(v).dot(theta.col(c));
}

double log_data_likelihood(const DynamicGraph& graph, const std::vector<Mat>& pis,
                           const std::vector<Mat>& thetas) {
  const auto steps = static_cast<std::size_t>(graph.num_steps());
  if (pis.size() < steps || thetas.size() < steps) {
    throw Error("log_data_likelihood: missing parameters for some steps");
  }
  double total = 0.0;
  for (const auto& s : graph.snapshots()) {
    const auto& pi = pis[static_cast<std::size_t>(s.t - 1)];
    const auto& theta = thetas[static_cast<std::size_t>(s.t - 1)];
    for (const auto& e : s.edges) {
      total += std::log(std::max(edge_likelihood(e.src, e.dst, pi, theta), kLogFloor));
    }
  }
  return total;
}

GeneratorState initial_generator_state(const GenerativeParams& params) {
  GeneratorState s;
  s.phi = params.phi0.value;
  s.beta = params.beta0.value;
  s.pi = Mat::Constant(static_cast<Eigen::Index>(params.num_vertices()),
                       params.num_communities, 1.0 / params.num_communities);
  return s;
}

int sample_categorical(const Eigen::Ref<const RowVec>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng) * probs.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  for (Eigen::Index i = probs.size() - 1; i >= 0; --i) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

GeneratedSnapshot generate_snapshot(const GenerativeParams& params,
                                    const GeneratorState& prev,
                                    const std::vector<int>& edge_counts,
                                    std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(params.num_vertices());
  if (prev.phi.rows() != n || prev.beta.rows() != params.num_communities ||
      prev.pi.rows() != n || static_cast<Eigen::Index>(edge_counts.size()) != n) {
    throw ShapeError("generate_snapshot: state does not match parameters");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  auto noise_like = [&](const Mat& m) {
    Mat z(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    return z;
  };

  GeneratedSnapshot out;
  out.state.beta = prev.beta + params.gamma * noise_like(prev.beta);
  out.state.phi = prev.phi + params.sigma * noise_like(prev.phi);
  out.state.pi = update_mixture_rows(prev.pi, transition_rows(out.state.phi, params));
  out.theta = node_distributions(out.state.beta, params);

  for (Eigen::Index v = 0; v < n; ++v) {
    for (int m = 0; m < edge_counts[static_cast<std::size_t>(v)]; ++m) {
      int z = sample_categorical(out.state.pi.row(v), rng);
      int c = sample_categorical(out.theta.row(z), rng);
      out.snapshot.edges.push_back({static_cast<VertexId>(v), static_cast<VertexId>(c)});
      out.assignments.push_back(z);
    }
  }
  return out;
}

}  // namespace grade
