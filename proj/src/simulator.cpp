#include "jdfilter/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jdf {

namespace {

std::vector<TaggedJump> atoms_in_step(const NoiseRecord& noise, int step) {
  std::vector<TaggedJump> out;
  for (const auto& a : noise.atoms0)
    if (a.step == step) out.push_back({a.time, &a.mark, JumpKind::Eta});
  for (const auto& a : noise.atoms1)
    if (a.step == step) out.push_back({a.time, &a.mark, JumpKind::Xi});
  std::sort(out.begin(), out.end(),
            [](const TaggedJump& a, const TaggedJump& b) { return a.time < b.time; });
  return out;
}

void require_state_finite(const Eigen::VectorXd& x, double t) {
  if (!x.allFinite()) {
    std::ostringstream os;
    os << "state overflow/NaN at t=" << t << "; path rejected";
    throw SimulationError(os.str());
  }
}

// Total jump displacement of X over one step. With jump_adapted the jump
// coefficient sees the state at the start of the sub-step containing the
// atom: the continuous increments (cont_x, dy_cont) accrued proportionally
// plus the earlier in-step jumps in full. Otherwise it sees the step-start
// state.
Eigen::VectorXd step_jump_displacement(const ModelSpec& spec,
                                       const std::vector<TaggedJump>& jumps,
                                       double t_start, double dt,
                                       const Eigen::VectorXd& x_start,
                                       const Eigen::VectorXd& y_start,
                                       const Eigen::VectorXd& cont_x,
                                       const Eigen::VectorXd& dy_cont,
                                       bool jump_adapted) {
  Eigen::VectorXd disp = Eigen::VectorXd::Zero(spec.dim_x);
  Eigen::VectorXd y_disp = Eigen::VectorXd::Zero(spec.dim_y);
  for (const auto& j : jumps) {
    Eigen::VectorXd x_pre = x_start;
    Eigen::VectorXd y_pre = y_start;
    if (jump_adapted) {
      const double frac = std::clamp((j.time - t_start) / dt, 0.0, 1.0);
      x_pre += frac * cont_x + disp;
      y_pre += frac * dy_cont + y_disp;
    }
    const Eigen::VectorXd z_pre = spec.make_z(x_pre, y_pre);
    const Eigen::VectorXd d = j.kind == JumpKind::Xi
                                  ? spec.jump_xi(j.time, z_pre, *j.mark)
                                  : spec.jump_eta(j.time, z_pre, *j.mark);
    if (!d.allFinite())
      throw SimulationError("non-finite jump displacement; path rejected");
    disp += d;
    if (j.kind == JumpKind::Xi) y_disp += *j.mark;
  }
  return disp;
}

}  // namespace

SamplePath simulate_system(const ModelSpec& spec, const TimeGrid& grid,
                           const NoiseRecord& noise, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& y0,
                           const SchemeConfig& scheme) {
  if (noise.dW.rows() != grid.n_steps || noise.dV.rows() != grid.n_steps)
    throw SimulationError("noise record does not match the grid");

  SamplePath path;
  path.grid = grid;
  path.noise = noise;
  path.x.resize(grid.n_nodes(), spec.dim_x);
  path.y.resize(grid.n_nodes(), spec.dim_y);
  path.x.row(0) = x0.transpose();
  path.y.row(0) = y0.transpose();

  const double dt = grid.dt();
  const Eigen::VectorXd y_comp = spec.levy_nu1.mean_mark();

  bool frozen = false;
  for (int i = 0; i < grid.n_steps; ++i) {
    const double t = grid.node(i);
    const Eigen::VectorXd x = path.x.row(i).transpose();
    const Eigen::VectorXd y = path.y.row(i).transpose();
    if (frozen) {
      path.x.row(i + 1) = x.transpose();
      path.y.row(i + 1) = y.transpose();
      continue;
    }
    const Eigen::VectorXd z = spec.make_z(x, y);
    const auto cv = evaluate_coefficients(spec, t, z);
    const Eigen::VectorXd comp_x = jump_compensator(spec, JumpKind::Eta, t, z) +
                                   jump_compensator(spec, JumpKind::Xi, t, z);

    const Eigen::VectorXd cont_x = cv.b * dt +
                                   cv.sigma * noise.dW.row(i).transpose() +
                                   cv.rho * noise.dV.row(i).transpose();
    const Eigen::VectorXd cont_y = cv.B * dt + noise.dV.row(i).transpose();

    const auto jumps = atoms_in_step(noise, i);
    Eigen::VectorXd marks = Eigen::VectorXd::Zero(spec.dim_y);
    for (const auto& j : jumps)
      if (j.kind == JumpKind::Xi) marks += *j.mark;
    const Eigen::VectorXd dy_cont = cont_y - dt * y_comp;

    const Eigen::VectorXd jump_x = step_jump_displacement(
        spec, jumps, t, dt, x, y, cont_x, dy_cont, scheme.jump_adapted);

    const Eigen::VectorXd x_next = x + cont_x + jump_x - dt * comp_x;
    const Eigen::VectorXd y_next = y + dy_cont + marks;
    require_state_finite(x_next, t);
    require_state_finite(y_next, t);
    path.x.row(i + 1) = x_next.transpose();
    path.y.row(i + 1) = y_next.transpose();

    if (scheme.clip_radius &&
        spec.make_z(x_next, y_next).norm() > *scheme.clip_radius) {
      path.clipped = true;
      frozen = true;
    }
  }
  return path;
}

Eigen::VectorXd q_signal_euler_step(const ModelSpec& spec, double t, double dt,
                                    const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& dVtilde,
                                    const Eigen::VectorXd& dW,
                                    const std::vector<TaggedJump>& jumps,
                                    bool jump_adapted) {
  const Eigen::VectorXd z = spec.make_z(x, y);
  const auto cv = evaluate_coefficients(spec, t, z);
  const Eigen::VectorXd comp_x = jump_compensator(spec, JumpKind::Eta, t, z) +
                                 jump_compensator(spec, JumpKind::Xi, t, z);

  // dV = dV~ - B dt substituted into the state equation. The continuous part
  // of the observed increment is dV~ - dt * mean(nu1).
  const Eigen::VectorXd cont_x =
      (cv.b - cv.rho * cv.B) * dt + cv.sigma * dW + cv.rho * dVtilde;
  const Eigen::VectorXd dy_cont = dVtilde - dt * spec.levy_nu1.mean_mark();
  const Eigen::VectorXd jump_x = step_jump_displacement(
      spec, jumps, t, dt, x, y, cont_x, dy_cont, jump_adapted);

  const Eigen::VectorXd x_next = x + cont_x + jump_x - dt * comp_x;
  require_state_finite(x_next, t);
  return x_next;
}

Eigen::MatrixXd simulate_signal_under_Q(const ModelSpec& spec,
                                        const TimeGrid& grid,
                                        const ObservationDecomposition& obs,
                                        const Eigen::MatrixXd& y_path,
                                        const NoiseRecord& particle_noise,
                                        const Eigen::VectorXd& x0,
                                        const SchemeConfig& scheme) {
  if (y_path.rows() != grid.n_nodes())
    throw SimulationError("y_path does not match the grid");
  if (obs.dVtilde.rows() != grid.n_steps)
    throw SimulationError("observation decomposition does not match the grid");

  Eigen::MatrixXd x(grid.n_nodes(), spec.dim_x);
  x.row(0) = x0.transpose();
  const double dt = grid.dt();

  // Shared N1 atoms come from the observation; N0 atoms are the particle's.
  std::vector<std::vector<TaggedJump>> per_step(grid.n_steps);
  for (const auto& a : obs.atoms1)
    per_step[a.step].push_back({a.time, &a.mark, JumpKind::Xi});
  for (const auto& a : particle_noise.atoms0)
    per_step[a.step].push_back({a.time, &a.mark, JumpKind::Eta});
  for (auto& v : per_step)
    std::sort(v.begin(), v.end(), [](const TaggedJump& a, const TaggedJump& b) {
      return a.time < b.time;
    });

  for (int i = 0; i < grid.n_steps; ++i) {
    x.row(i + 1) = q_signal_euler_step(
                       spec, grid.node(i), dt, x.row(i).transpose(),
                       y_path.row(i).transpose(),
                       obs.dVtilde.row(i).transpose(),
                       particle_noise.dW.row(i).transpose(), per_step[i],
                       scheme.jump_adapted)
                       .transpose();
  }
  return x;
}

MomentEstimate estimate_moment_bound(const ModelSpec& spec,
                                     const TimeGrid& grid, double p,
                                     int n_paths, std::uint64_t seed) {
  if (p < 1.0 || p > 2.0)
    throw std::invalid_argument("estimate_moment_bound: p outside [1,2]");
  if (n_paths < 1)
    throw std::invalid_argument("estimate_moment_bound: n_paths < 1");

  MomentEstimate est;
  double sum = 0.0, sum2 = 0.0;
  long used = 0;
  for (int k = 0; k < n_paths; ++k) {
    const std::uint64_t path_stream = substream(1, static_cast<std::uint64_t>(k));
    RngStream x0_rng(seed, substream(path_stream, 0));
    const NoiseRecord noise =
        sample_noise(spec, grid, seed, substream(path_stream, 1));
    try {
      const SamplePath path = simulate_system(
          spec, grid, noise, spec.sample_x0(x0_rng), spec.y0);
      double sup = 0.0;
      for (int i = 0; i < grid.n_nodes(); ++i) {
        Eigen::VectorXd z = spec.make_z(path.x.row(i).transpose(),
                                        path.y.row(i).transpose());
        sup = std::max(sup, std::pow(z.norm(), p));
      }
      sum += sup;
      sum2 += sup * sup;
      used += 1;
    } catch (const SimulationError&) {
      est.n_rejected += 1;  // divergence is reported, not fatal
    }
  }
  if (used == 0) throw SimulationError("estimate_moment_bound: all paths rejected");
  est.value = sum / used;
  const double var = std::max(0.0, sum2 / used - est.value * est.value);
  est.std_error = std::sqrt(var / used);
  return est;
}

}  // namespace jdf
