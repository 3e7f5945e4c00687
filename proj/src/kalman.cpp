#include "jdfilter/kalman.hpp"

#include <Eigen/Eigenvalues>

namespace jdf {

LinearModel linear_model_from(const ModelSpec& spec) {
  // Probe the declared coefficient functions at basis points; the zoo's
  // linear entries are exactly linear so this reconstruction is lossless.
  const int d = spec.dim_x, dy = spec.dim_y;
  LinearModel lm;
  lm.A.resize(d, d);
  lm.H.resize(dy, d);
  const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(d + dy);
  const Eigen::VectorXd b0 = spec.drift_b(0.0, z0);
  const Eigen::VectorXd B0 = spec.obs_drift_B(0.0, z0);
  if (b0.norm() > 0.0 || B0.norm() > 0.0)
    throw std::invalid_argument("linear_model_from: affine offset present");
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd z = z0;
    z[j] = 1.0;
    lm.A.col(j) = spec.drift_b(0.0, z);
    lm.H.col(j) = spec.obs_drift_B(0.0, z);
  }
  lm.sigma = spec.diffusion_sigma(0.0, z0);
  lm.rho = spec.diffusion_rho(0.0, z0);
  lm.m0 = spec.x0_mean;
  lm.P0 = spec.x0_var.asDiagonal();
  if (!spec.levy_nu0.is_zero() || !spec.levy_nu1.is_zero())
    throw std::invalid_argument("linear_model_from: jump terms present");
  return lm;
}

KalmanResult kalman_bucy(const LinearModel& model, const TimeGrid& grid,
                         const Eigen::MatrixXd& dY, double psd_tol) {
  const int d = static_cast<int>(model.A.rows());
  if (dY.rows() != grid.n_steps)
    throw std::invalid_argument("kalman_bucy: dY does not match the grid");
  const double dt = grid.dt();

  KalmanResult res;
  res.mean.setZero(grid.n_nodes(), d);
  res.cov.assign(grid.n_nodes(), Eigen::MatrixXd());
  res.mean.row(0) = model.m0.transpose();
  res.cov[0] = model.P0;

  const Eigen::MatrixXd Qc = model.sigma * model.sigma.transpose() +
                             model.rho * model.rho.transpose();

  Eigen::VectorXd m = model.m0;
  Eigen::MatrixXd P = model.P0;
  res.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.n_steps; ++i) {
    const Eigen::MatrixXd gain = P * model.H.transpose() + model.rho;
    const Eigen::VectorXd innov = dY.row(i).transpose() - model.H * m * dt;
    m += model.A * m * dt + gain * innov;
    P += dt * (model.A * P + P * model.A.transpose() + Qc -
               gain * gain.transpose());
    P = 0.5 * (P + P.transpose());

    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P).eigenvalues()
            .minCoeff();
    res.min_eigenvalue = std::min(res.min_eigenvalue, min_eig);
    if (min_eig < -psd_tol)
      throw std::runtime_error(
          "kalman_bucy: covariance lost positive semidefiniteness");

    res.mean.row(i + 1) = m.transpose();
    res.cov[i + 1] = P;
  }
  return res;
}

}  // namespace jdf
