#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "jdfilter/noise.hpp"

namespace jdf {

// Linear-Gaussian no-jump special case: b(t,z) = A x, B(t,z) = H x,
// constant sigma and rho, Gaussian prior N(m0, P0).
struct LinearModel {
  Eigen::MatrixXd A;      // d x d
  Eigen::MatrixXd H;      // d' x d
  Eigen::MatrixXd sigma;  // d x d1
  Eigen::MatrixXd rho;    // d x d'
  Eigen::VectorXd m0;
  Eigen::MatrixXd P0;
};

// Extracts the linear model from a zoo spec that declares one.
LinearModel linear_model_from(const ModelSpec& spec);

struct KalmanResult {
  Eigen::MatrixXd mean;                 // (n_steps+1) x d
  std::vector<Eigen::MatrixXd> cov;     // per node, d x d
  double min_eigenvalue = 0.0;          // most negative eigenvalue seen
};

// Correlated-noise Kalman-Bucy filter, explicit Euler on the same grid as
// the particle runs. Observation noise is the V of the state equation, so
// the cross covariance equals rho and the gain is (P H^T + rho):
//   dm = A m dt + (P H^T + rho)(dY - H m dt)
//   dP/dt = A P + P A^T + sigma sigma^T + rho rho^T
//           - (P H^T + rho)(P H^T + rho)^T.
// The covariance is symmetrized every step; losing positive
// semidefiniteness beyond tolerance raises a numerical-failure error.
KalmanResult kalman_bucy(const LinearModel& model, const TimeGrid& grid,
                         const Eigen::MatrixXd& dY, double psd_tol = 1e-10);

}  // namespace jdf
