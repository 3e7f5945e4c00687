#include <doctest.h>

#include <cmath>

#include "jdfilter/girsanov.hpp"
#include "jdfilter/simulator.hpp"

using namespace jdf;
using Eigen::VectorXd;

TEST_CASE("noise is bit-identical for the same keys") {
  const ModelSpec s = make_model("ou_jump");
  const TimeGrid grid{1.0, 64};
  const NoiseRecord a = sample_noise(s, grid, 99, 5);
  const NoiseRecord b = sample_noise(s, grid, 99, 5);
  CHECK(a.dW == b.dW);
  CHECK(a.dV == b.dV);
  REQUIRE(a.atoms1.size() == b.atoms1.size());
  for (std::size_t i = 0; i < a.atoms1.size(); ++i) {
    CHECK(a.atoms1[i].time == b.atoms1[i].time);
    CHECK(a.atoms1[i].mark == b.atoms1[i].mark);
  }
  const NoiseRecord c = sample_noise(s, grid, 99, 6);
  CHECK(a.dW != c.dW);
}

TEST_CASE("zero-mass measure never produces atoms") {
  const ModelSpec s = make_model("linear_gaussian");
  const TimeGrid grid{1.0, 16};
  for (int k = 0; k < 50; ++k) {
    const NoiseRecord rec = sample_noise(s, grid, 7, k);
    CHECK(rec.atoms0.empty());
    CHECK(rec.atoms1.empty());
  }
}

TEST_CASE("atom times stay inside (0, T] and are sorted with step indices") {
  const ModelSpec s = make_model("ou_jump");
  const TimeGrid grid{0.5, 25};
  for (int k = 0; k < 200; ++k) {
    const NoiseRecord rec = sample_noise(s, grid, 53, k);
    double prev = 0.0;
    for (const auto& a : rec.atoms1) {
      CHECK(a.time > 0.0);
      CHECK(a.time <= grid.T);
      CHECK(a.time >= prev);
      CHECK(a.step == std::min(static_cast<int>(a.time / grid.dt()),
                               grid.n_steps - 1));
      prev = a.time;
    }
  }
}

TEST_CASE("atom count matches the Poisson mean over many draws") {
  ModelSpec s = make_model("ou_jump", {{"mass_up", 1.2}, {"mass_down", 0.8}});
  const TimeGrid grid{0.5, 4};  // total mass 2, horizon 0.5: mean count 1
  const int n = 100000;
  double total = 0.0;
  for (int k = 0; k < n; ++k)
    total += sample_noise(s, grid, 31, k).atoms1.size();
  const double mean = total / n;
  const double se = std::sqrt(1.0 / n);
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}

TEST_CASE("gaussian increments have variance dt") {
  const ModelSpec s = make_model("linear_gaussian");
  const TimeGrid grid{1.0, 100000};
  const NoiseRecord rec = sample_noise(s, grid, 41, 0);
  const double dt = grid.dt();
  const double var = rec.dW.col(0).squaredNorm() / grid.n_steps;
  CHECK(var >= dt * 0.95);
  CHECK(var <= dt * 1.05);
}

TEST_CASE("poisson window counts pass a chi-square goodness-of-fit test") {
  // 10^4 windows at rate 0.3 per window, bins {0, 1, 2, >=3}; the 0.99
  // quantile of chi-square with 3 degrees of freedom is 11.345
  ModelSpec s = make_model("ou_jump", {{"mass_up", 2.0},
                                       {"mass_down", 1.0},
                                       {"T", 1.0}});
  const int n_windows = 10000;
  const TimeGrid grid{1.0, 10};  // 10 windows of rate 0.3 per record
  long obs[4] = {0, 0, 0, 0};
  for (int k = 0; k < n_windows / 10; ++k) {
    const NoiseRecord rec = sample_noise(s, grid, 43, k);
    long per_step[10] = {0};
    for (const auto& a : rec.atoms1) per_step[a.step] += 1;
    for (long c : per_step) obs[std::min<long>(c, 3)] += 1;
  }
  const double lam = 0.3;
  const double p0 = std::exp(-lam);
  const double p1 = p0 * lam;
  const double p2 = p1 * lam / 2.0;
  const double p3 = 1.0 - p0 - p1 - p2;
  const double exp_counts[4] = {n_windows * p0, n_windows * p1,
                                n_windows * p2, n_windows * p3};
  double chi2 = 0.0;
  for (int b = 0; b < 4; ++b) {
    const double d = obs[b] - exp_counts[b];
    chi2 += d * d / exp_counts[b];
  }
  CHECK(chi2 < 11.345);
}

TEST_CASE("oracle decomposition reproduces the continuous increments exactly") {
  const ModelSpec s = make_model("ou_jump");
  const TimeGrid grid{0.5, 500};
  RngStream x0(71, 1);
  const NoiseRecord noise = sample_noise(s, grid, 71, 2);
  const SamplePath path =
      simulate_system(s, grid, noise, s.sample_x0(x0), s.y0);
  const ObservationDecomposition obs = decompose_observation(
      s, grid, path.y, DecompositionMode::Oracle, &path.noise);

  // dV~ = B dt + dV with B at the step start
  for (int i = 0; i < grid.n_steps; ++i) {
    const VectorXd z = s.make_z(path.x.row(i).transpose(),
                                path.y.row(i).transpose());
    const double expect =
        s.obs_drift_B(grid.node(i), z)[0] * grid.dt() + noise.dV(i, 0);
    CHECK(obs.dVtilde(i, 0) == doctest::Approx(expect).epsilon(1e-12));
  }
  REQUIRE(obs.atoms1.size() == noise.atoms1.size());

  // reconstruction identity at every node
  const double compensator = s.levy_nu1.mean_mark()[0];
  double acc = 0.0;
  std::size_t aidx = 0;
  for (int i = 0; i < grid.n_steps; ++i) {
    acc += obs.dVtilde(i, 0);
    while (aidx < obs.atoms1.size() && obs.atoms1[aidx].step <= i)
      acc += obs.atoms1[aidx++].mark[0];
    const double lhs = path.y(i + 1, 0) - path.y(0, 0);
    const double rhs = acc - grid.node(i + 1) * compensator;
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("no jumps and zero drift make dV~ equal dV") {
  const ModelSpec s = make_model("linear_gaussian", {{"h", 0.0}});
  const TimeGrid grid{1.0, 64};
  RngStream x0(73, 1);
  const NoiseRecord noise = sample_noise(s, grid, 73, 2);
  const SamplePath path =
      simulate_system(s, grid, noise, s.sample_x0(x0), s.y0);
  const ObservationDecomposition obs = decompose_observation(
      s, grid, path.y, DecompositionMode::Oracle, &path.noise);
  CHECK((obs.dVtilde - noise.dV).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("detect mode recovers an injected jump and snaps its mark") {
  ModelSpec s = make_model("ou_jump", {{"sigma", 0.0}, {"theta", 0.0},
                                       {"h", 0.0}, {"mass0", 0.0}});
  const TimeGrid grid{1.0, 10};
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(grid.n_nodes(), 1);
  // single +0.5 jump inside step 3, visible from node 4 onward
  for (int i = 4; i < grid.n_nodes(); ++i) y(i, 0) = 0.5;
  const ObservationDecomposition obs = decompose_observation(
      s, grid, y, DecompositionMode::Detect, nullptr, 0.1);
  REQUIRE(obs.atoms1.size() == 1);
  CHECK(obs.atoms1[0].step == 3);
  CHECK(obs.atoms1[0].mark[0] == doctest::Approx(0.5));
}

TEST_CASE("compensator-only effect when no jump lands") {
  // nu1 = single atom (mark 1, mass 1); a path with no realized jumps obeys
  // dV~ = dY + dt
  ModelSpec s = make_model("ou_jump", {{"jump_size", 1.0}, {"mass_up", 1.0},
                                       {"mass_down", 0.0}, {"mass0", 0.0}});
  const TimeGrid grid{1.0, 8};
  Eigen::MatrixXd y(grid.n_nodes(), 1);
  RngStream r(79, 1);
  y(0, 0) = 0.0;
  for (int i = 1; i < grid.n_nodes(); ++i)
    y(i, 0) = y(i - 1, 0) + 0.05 * r.normal();
  const ObservationDecomposition obs =
      decompose_observation(s, grid, y, DecompositionMode::Detect);
  CHECK(obs.atoms1.empty());
  for (int i = 0; i < grid.n_steps; ++i)
    CHECK(obs.dVtilde(i, 0) ==
          doctest::Approx(y(i + 1, 0) - y(i, 0) + grid.dt()).epsilon(1e-12));
}

TEST_CASE("detect mode misclassification is rare on the shipped jump model") {
  const ModelSpec s = make_model("ou_jump");
  const TimeGrid grid{0.5, 500};
  long steps_checked = 0, misclassified = 0;
  for (int k = 0; k < 40; ++k) {
    RngStream x0(83, substream(100, k));
    const NoiseRecord noise = sample_noise(s, grid, 83, substream(200, k));
    const SamplePath path =
        simulate_system(s, grid, noise, s.sample_x0(x0), s.y0);
    const ObservationDecomposition det =
        decompose_observation(s, grid, path.y, DecompositionMode::Detect);
    std::vector<int> truth(grid.n_steps, 0), found(grid.n_steps, 0);
    for (const auto& a : noise.atoms1) truth[a.step] += 1;
    for (const auto& a : det.atoms1) found[a.step] += 1;
    for (int i = 0; i < grid.n_steps; ++i) {
      ++steps_checked;
      if ((truth[i] > 0) != (found[i] > 0)) ++misclassified;
    }
  }
  CHECK(static_cast<double>(misclassified) / steps_checked < 1e-3);
}

TEST_CASE("two jumps in one step are reported as ambiguous") {
  const ModelSpec s = make_model("ou_jump");
  const TimeGrid grid{1.0, 4};
  NoiseRecord noise = sample_noise(s, grid, 89, 1);
  noise.atoms1.clear();
  JumpAtom a1{0.30, VectorXd::Constant(1, 0.5), 1};
  JumpAtom a2{0.40, VectorXd::Constant(1, -0.5), 1};
  noise.atoms1 = {a1, a2};
  RngStream x0(89, 2);
  const SamplePath path =
      simulate_system(s, grid, noise, s.sample_x0(x0), s.y0);
  const ObservationDecomposition obs = decompose_observation(
      s, grid, path.y, DecompositionMode::Oracle, &noise);
  CHECK(obs.ambiguous_steps == 1);
}
