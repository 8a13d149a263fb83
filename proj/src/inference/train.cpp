#include <algorithm>
#include <iostream>
#include <limits>
#include <numeric>

#include "grade/eval.hpp"
#include "grade/inference.hpp"

namespace grade {

namespace {

/// MAR over the validation steps, projecting from the last train step.
std::optional<double> validation_mar(const GradeModel& model, const DynamicGraph& graph,
                                     const TemporalSplit& split, const std::vector<bool>& seen) {
  if (split.val.size() == 0) return std::nullopt;
  auto traj = mean_trajectory(model, split.train.last);
  auto projected = project_future(model, traj, split.val.size());
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& step : projected) {
    auto snap = filter_seen(graph.snapshot(step.t), seen);
    if (snap.edges.empty()) continue;
    total += mean_average_rank(snap.edges, step.state.pi, step.theta) *
             static_cast<double>(snap.edges.size());
    count += snap.edges.size();
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unif(rng);
  return m;
}

}  // namespace

TrainResult train(const DynamicGraph& graph, const TemporalSplit& split,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (split.train.size() == 0) throw Error("train: no training steps");
  std::size_t train_edges = 0;
  for (int t = split.train.first; t <= split.train.last; ++t) {
    train_edges += graph.snapshot(t).edges.size();
  }
  if (train_edges == 0) throw Error("train: no training edges");

  std::mt19937_64 rng(config.seed);
  TrainResult result;
  result.model = GradeModel(graph.num_vertices(), config);
  GradeModel& model = result.model;
  model.initialize(rng);

  const auto seen = seen_vertices(graph, split.train);
  const bool select = config.eval_every > 0;
  GradeModel best = model;
  double best_mar = std::numeric_limits<double>::infinity();
  if (select) {
    if (auto mar = validation_mar(model, graph, split, seen)) {
      best_mar = *mar;
      result.validation_mar.push_back(*mar);
    }
  }

  Adam adam(model.parameters(), AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8,
                                           config.lr_decay, config.decay_every});
  const SimplexObserver* observer = options.observer ? &options.observer : nullptr;
  const Eigen::Index k = config.num_communities;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    const double kl_z_weight = config.kl_z_weight(epoch);
    StepState prev = initial_state(model);
    std::vector<StepNoise> noises;
    for (int t = split.train.first; t <= split.train.last; ++t) {
      const auto& edges = graph.snapshot(t).edges;
      noises.push_back(draw_step_noise(model, rng));
      if (observer) {
        prev = advance_state(model, prev, &noises.back());
        (*observer)("pi", prev.pi);
      }

      std::vector<std::size_t> order(edges.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(config.batch_edges)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(config.batch_edges));
        std::vector<Edge> batch;
        batch.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) batch.push_back(edges[order[i]]);
        Mat gumbel = uniform_matrix(static_cast<Eigen::Index>(batch.size()), k, rng);

        Tape tape;
        ElboTerms terms;
        Var loss = elbo_batch_unrolled(tape, model, noises, batch, edges.size(), gumbel, &terms,
                                       observer, kl_z_weight);
        tape.backward(loss);
        adam.step();
        // Report the negative ELBO itself, whatever the KL weight.
        const double neg_elbo = terms.loss + (1.0 - kl_z_weight) * terms.kl_z;
        result.history.push_back({adam.iterations(), t, neg_elbo});
        epoch_loss += neg_elbo;
      }
    }
    result.epoch_loss.push_back(epoch_loss);

    if (select && epoch % config.eval_every == 0) {
      if (auto mar = validation_mar(model, graph, split, seen)) {
        result.validation_mar.push_back(*mar);
        if (*mar < best_mar) {
          best_mar = *mar;
          best = model;
          result.best_epoch = epoch;
        }
      }
    }
    if (options.log_every > 0 && epoch % options.log_every == 0) {
      std::cerr << "epoch " << epoch << " loss " << epoch_loss;
      if (!result.validation_mar.empty()) std::cerr << " val_mar " << result.validation_mar.back();
      std::cerr << '\n';
    }
  }

  result.final_model = model;
  if (select && std::isfinite(best_mar)) {
    result.best_validation_mar = best_mar;
    result.model = std::move(best);
  } else {
    result.best_epoch = config.epochs;
  }
  return result;
}

}  // namespace grade
