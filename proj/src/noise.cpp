#include "jdfilter/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jdf {

namespace {

std::vector<JumpAtom> sample_atoms(const LevyMeasureSpec& nu,
                                   const TimeGrid& grid, RngStream& rng) {
  std::vector<JumpAtom> atoms;
  if (nu.is_zero()) return atoms;
  const long count = rng.poisson(nu.total_mass() * grid.T);
  atoms.reserve(count);
  for (long i = 0; i < count; ++i) {
    JumpAtom a;
    a.time = rng.uniform() * grid.T;  // uniform() is in (0,1), so time > 0
    a.mark = nu.sample_mark(rng);
    a.step = std::min(static_cast<int>(a.time / grid.dt()), grid.n_steps - 1);
    atoms.push_back(std::move(a));
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const JumpAtom& a, const JumpAtom& b) { return a.time < b.time; });
  return atoms;
}

}  // namespace

NoiseRecord sample_noise(const ModelSpec& spec, const TimeGrid& grid,
                         std::uint64_t seed, std::uint64_t stream) {
  if (grid.n_steps < 1) throw std::invalid_argument("sample_noise: n_steps < 1");
  NoiseRecord rec;
  rec.seed = seed;
  rec.stream = stream;
  RngStream rng(seed, stream);
  const double sdt = std::sqrt(grid.dt());
  rec.dW.resize(grid.n_steps, spec.dim_w);
  rec.dV.resize(grid.n_steps, spec.dim_y);
  for (int i = 0; i < grid.n_steps; ++i) {
    for (int j = 0; j < spec.dim_w; ++j) rec.dW(i, j) = sdt * rng.normal();
    for (int j = 0; j < spec.dim_y; ++j) rec.dV(i, j) = sdt * rng.normal();
  }
  rec.atoms0 = sample_atoms(spec.levy_nu0, grid, rng);
  rec.atoms1 = sample_atoms(spec.levy_nu1, grid, rng);
  return rec;
}

ObservationDecomposition decompose_observation(
    const ModelSpec& spec, const TimeGrid& grid, const Eigen::MatrixXd& y_path,
    DecompositionMode mode, const NoiseRecord* recorded, double threshold) {
  if (y_path.rows() != grid.n_nodes() || y_path.cols() != spec.dim_y)
    throw std::invalid_argument("decompose_observation: y_path shape");

  const double dt = grid.dt();
  const Eigen::VectorXd compensator = spec.levy_nu1.mean_mark();

  ObservationDecomposition out;
  out.dVtilde.resize(grid.n_steps, spec.dim_y);

  // Recovered jump marks bucketed per step.
  std::vector<std::vector<JumpAtom>> per_step(grid.n_steps);
  if (mode == DecompositionMode::Oracle) {
    if (recorded == nullptr)
      throw std::invalid_argument(
          "decompose_observation: oracle mode needs the noise record");
    for (const auto& a : recorded->atoms1) per_step[a.step].push_back(a);
  } else {
    if (threshold <= 0.0) threshold = 6.0 * std::sqrt(spec.dim_y * dt);
    const bool atomic =
        spec.levy_nu1.kind() == LevyMeasureSpec::Kind::Atomic &&
        !spec.levy_nu1.is_zero();
    for (int i = 0; i < grid.n_steps; ++i) {
      const Eigen::VectorXd dy = y_path.row(i + 1) - y_path.row(i);
      if (dy.norm() <= threshold) continue;
      Eigen::VectorXd mark = dy;  // raw increment when no atom list exists
      if (atomic) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& a : spec.levy_nu1.atoms()) {
          const double dist = (dy - a.mark).norm();
          if (dist < best) {
            best = dist;
            mark = a.mark;
          }
        }
      }
      JumpAtom a;
      a.time = grid.node(i) + 0.5 * dt;  // true time is unobservable at grid resolution
      a.mark = mark;
      a.step = i;
      per_step[i].push_back(std::move(a));
    }
  }

  for (int i = 0; i < grid.n_steps; ++i) {
    Eigen::VectorXd marks = Eigen::VectorXd::Zero(spec.dim_y);
    for (const auto& a : per_step[i]) marks += a.mark;
    if (per_step[i].size() > 1) ++out.ambiguous_steps;
    out.dVtilde.row(i) = (y_path.row(i + 1) - y_path.row(i)).transpose() -
                         marks + dt * compensator;
    for (auto& a : per_step[i]) out.atoms1.push_back(std::move(a));
  }
  return out;
}

}  // namespace jdf
