#pragma once

#include <optional>

#include "jdfilter/noise.hpp"
#include "jdfilter/operators.hpp"

namespace jdf {

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SchemeConfig {
  // Insert jump times as sub-step nodes: the jump coefficient then sees the
  // state at the start of the sub-step containing the atom instead of the
  // state at the step start.
  bool jump_adapted = false;
  // When set, a path whose |z| exits this ball is frozen at the exit state
  // and reported through SamplePath::clipped.
  std::optional<double> clip_radius;
};

// Explicit Euler step for the full system under the physical measure:
//   dX = b dt + sigma dW + rho dV + jumps(eta, xi) - compensators dt
//   dY = B dt + dV + marks - dt * mean(nu1)
// Coefficients are evaluated at the step start; jump coefficients use the
// pre-jump state.
SamplePath simulate_system(const ModelSpec& spec, const TimeGrid& grid,
                           const NoiseRecord& noise, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& y0,
                           const SchemeConfig& scheme = {});

// Signal dynamics under the reference measure, driven by the observed
// (V~ increments, N1 atoms) and the particle's own (W, N0):
//   dX = (b - rho B) dt + sigma dW_own + rho dV~_obs
//        + xi(observed atoms) + eta(own atoms) - compensators dt.
// The observed y path enters every coefficient.
Eigen::MatrixXd simulate_signal_under_Q(const ModelSpec& spec,
                                        const TimeGrid& grid,
                                        const ObservationDecomposition& obs,
                                        const Eigen::MatrixXd& y_path,
                                        const NoiseRecord& particle_noise,
                                        const Eigen::VectorXd& x0,
                                        const SchemeConfig& scheme = {});

struct TaggedJump {
  double time;
  const Eigen::VectorXd* mark;
  JumpKind kind;
};

// Single Euler step of the reference-measure dynamics; the particle filter
// advances each particle through this same kernel. `jumps` must be sorted by
// time within the step.
Eigen::VectorXd q_signal_euler_step(const ModelSpec& spec, double t, double dt,
                                    const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& dVtilde,
                                    const Eigen::VectorXd& dW,
                                    const std::vector<TaggedJump>& jumps,
                                    bool jump_adapted);

struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n_rejected = 0;
};

// Monte-Carlo estimate of E sup_{t<=T} |Z_t|^p for p in [1,2].
MomentEstimate estimate_moment_bound(const ModelSpec& spec,
                                     const TimeGrid& grid, double p,
                                     int n_paths, std::uint64_t seed);

}  // namespace jdf
