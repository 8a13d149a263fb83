#include "grade/inference.hpp"

namespace grade {

PosteriorTrajectory mean_trajectory(const GradeModel& model, int last_step) {
  if (last_step < 0) throw Error("mean_trajectory: negative step");
  PosteriorTrajectory traj;
  traj.reserve(static_cast<std::size_t>(last_step) + 1);
  traj.push_back(initial_state(model));
  for (int t = 1; t <= last_step; ++t) traj.push_back(advance_state(model, traj.back(), nullptr));
  return traj;
}

std::vector<ProjectedStep> project_future(const GradeModel& model,
                                          const PosteriorTrajectory& trajectory, int n_steps) {
  if (n_steps < 1) throw Error("project_future: n_steps must be at least 1");
  if (trajectory.empty()) throw Error("project_future: empty trajectory");
  std::vector<ProjectedStep> out;
  out.reserve(static_cast<std::size_t>(n_steps));
  const StepState* prev = &trajectory.back();
  for (int i = 0; i < n_steps; ++i) {
    ProjectedStep step;
    step.state = advance_state(model, *prev, nullptr);
    step.t = step.state.t;
    step.pi_prev = prev->pi;
    step.theta = node_distributions(step.state.beta, model.gen);
    out.push_back(std::move(step));
    prev = &out.back().state;
  }
  return out;
}

RowVec community_membership(VertexId v, const Snapshot& snapshot, const ProjectedStep& step,
                            const GenerativeParams& gen) {
  if (v < 0 || v >= step.state.phi.rows()) throw Error("community_membership: vertex out of range");
  RowVec acc = RowVec::Zero(gen.num_communities);
  std::size_t count = 0;
  const Vec phi_v = step.state.phi.row(v).transpose();
  for (const auto& e : snapshot.edges) {
    if (e.src != v) continue;
    acc += amortized_z_posterior(step.pi_prev.row(v), phi_v, step.state.phi.row(e.dst).transpose(),
                                 gen);
    ++count;
  }
  if (count == 0) {
    throw NoNeighboursError("vertex " + std::to_string(v) +
                            " has no neighbours; fall back to prior pi_v");
  }
  return acc / static_cast<double>(count);
}

}  // namespace grade
