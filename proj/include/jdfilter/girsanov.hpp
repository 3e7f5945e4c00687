#pragma once

#include "jdfilter/simulator.hpp"

namespace jdf {

// Likelihood process along one path. The log is the primary representation:
// gamma values are only materialized when their log is finite, so positivity
// is structural.
struct LikelihoodPath {
  Eigen::VectorXd log_gamma;  // per node, log_gamma[0] = 0
  bool overflow_flagged = false;

  Eigen::VectorXd gamma() const;
  Eigen::VectorXd gamma_inv() const;
};

// Accumulates log gamma_t = -sum B dV - 1/2 sum |B|^2 dt with B at the step
// start, reading dV from the path's noise record.
LikelihoodPath compute_gamma(const ModelSpec& spec, const SamplePath& path);

// log of the inverse likelihood along a signal path, driven by the observed
// V~ increments: per step  d log(gamma^-1) = B dV~ - 1/2 |B|^2 dt
// (exponential-Euler step of the linear equation for gamma^-1).
Eigen::VectorXd evolve_gamma_inv_log(const ModelSpec& spec,
                                     const TimeGrid& grid,
                                     const Eigen::MatrixXd& x_path,
                                     const Eigen::MatrixXd& y_path,
                                     const ObservationDecomposition& obs);

struct GirsanovReport {
  double mean_gamma_T = 0.0;
  double std_error = 0.0;
  double kurtosis = 0.0;
  int n_paths = 0;
  bool pass = false;               // |mean - 1| <= 3 SE
  bool heavy_tail_warning = false; // sample kurtosis > 100
};

// Monte-Carlo check that E gamma_T = 1 under the physical measure.
GirsanovReport verify_girsanov(const ModelSpec& spec, const TimeGrid& grid,
                               int n_paths, std::uint64_t seed,
                               std::uint64_t stream_base = 0,
                               int worker_count = 1);

}  // namespace jdf
