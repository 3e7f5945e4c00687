#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "jdfilter/model.hpp"

namespace jdf {

// Uniform grid on [0, T].
struct TimeGrid {
  double T = 1.0;
  int n_steps = 1;

  double dt() const { return T / n_steps; }
  double node(int i) const { return T * i / n_steps; }
  int n_nodes() const { return n_steps + 1; }
};

struct JumpAtom {
  double time;            // in (0, T]
  Eigen::VectorXd mark;
  int step;               // index of the step (time in (node(step), node(step+1)])
};

// Driving noises of one path realization on a grid: Gaussian increments with
// variance dt per component and the Poisson atoms of both jump measures.
// Deterministic given (seed, stream).
struct NoiseRecord {
  Eigen::MatrixXd dW;  // n_steps x d1
  Eigen::MatrixXd dV;  // n_steps x d'
  std::vector<JumpAtom> atoms0;
  std::vector<JumpAtom> atoms1;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

NoiseRecord sample_noise(const ModelSpec& spec, const TimeGrid& grid,
                         std::uint64_t seed, std::uint64_t stream);

// Discretized trajectory of Z = (X, Y) together with its noise record.
struct SamplePath {
  TimeGrid grid;
  Eigen::MatrixXd x;  // (n_steps+1) x d
  Eigen::MatrixXd y;  // (n_steps+1) x d'
  NoiseRecord noise;
  bool clipped = false;  // exited the clip radius (when configured)
};

// The pair (V~ increments, N1 atoms) recovered from an observed Y path.
// Reconstruction identity at every node k:
//   Y_k - Y_0 = sum dV~ + sum marks - t_k * mean(nu1).
struct ObservationDecomposition {
  Eigen::MatrixXd dVtilde;  // n_steps x d'
  std::vector<JumpAtom> atoms1;
  int ambiguous_steps = 0;  // steps holding more than one recovered jump
};

enum class DecompositionMode { Oracle, Detect };

// Splits an observed path into its continuous and jump parts. Oracle mode
// reads the recorded atoms (verification experiments); detect mode
// thresholds step increments at `threshold` (<= 0 selects the default
// 6 sqrt(d' dt)) and snaps detected marks to the nearest atom of nu1 when
// the measure is atomic. Steps with two or more jumps are counted in
// ambiguous_steps; refine the grid if that matters.
ObservationDecomposition decompose_observation(
    const ModelSpec& spec, const TimeGrid& grid, const Eigen::MatrixXd& y_path,
    DecompositionMode mode, const NoiseRecord* recorded = nullptr,
    double threshold = 0.0);

}  // namespace jdf
