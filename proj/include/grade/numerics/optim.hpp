#pragma once

#include <functional>
#include <string>
#include <vector>

#include "grade/numerics/tape.hpp"

namespace grade {

struct AdamConfig {
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Step size is multiplied by `decay` every `decay_every` updates.
  double decay = 0.99;
  long decay_every = 100;
};

/// Adaptive moment estimation with a stepwise exponential schedule.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  /// Applies one update from the accumulated gradients, then zeroes them.
  void step();
  void zero_grad();
  double current_learning_rate() const;
  long iterations() const noexcept { return iterations_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Mat> m_, v_;
  long iterations_ = 0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares analytic gradients of a scalar computation against central
/// differences. `f` must build its graph from the given parameters on the
/// tape it receives and return a 1x1 Var. Relative error per entry is
/// |a - n| / max(|a|, |n|, 1e-8).
GradientCheckResult check_gradients(const std::function<Var(Tape&)>& f,
                                    const std::vector<Parameter*>& params,
                                    double step = 1e-5);

}  // namespace grade
