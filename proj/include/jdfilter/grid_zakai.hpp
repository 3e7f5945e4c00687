#pragma once

#include "jdfilter/noise.hpp"

namespace jdf {

class GridConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MeshSpec {
  double x_min = -5.0;
  double x_max = 5.0;
  int n_cells = 400;  // nodes = n_cells + 1, uniform

  double dx() const { return (x_max - x_min) / n_cells; }
  int n_nodes() const { return n_cells + 1; }
  double node(int j) const { return x_min + j * dx(); }
};

struct GridZakaiResult {
  Eigen::VectorXd mesh;     // base node coordinates
  Eigen::MatrixXd density;  // (n_steps+1) x n_nodes, unnormalized
  // The rho dV~ transport is realized by translating the coordinate frame,
  // which keeps the shift exact: the density row at time node i lives on
  // coordinates mesh + mesh_offset[i] (identically zero when rho == 0).
  Eigen::VectorXd mesh_offset;
  Eigen::VectorXd mass;     // per time node
  Eigen::VectorXd mean;     // normalized first moment per time node
  Eigen::VectorXd moment1;  // unnormalized first moment per time node
  // Max relative per-step mass change over the conservative sub-steps
  // (transport, jump convolution, atom shifts); the multiplicative
  // observation correction legitimately changes mass and is excluded.
  double max_step_mass_drift = 0.0;
  int interpolated_shifts = 0;  // displacements that were not mesh multiples
};

// Finite-difference solver for the unnormalized conditional density of a
// one-dimensional model with x-independent jump displacements. Splitting per
// step: (1) conservative flux-form transport/diffusion with upwinded drift;
// the substep carries the reduced generator (sigma sigma^T / 2 diffusion,
// drift b - rho B minus the jump compensators) because the rho dV~ shift of
// step (3) already realizes the rho rho^T / 2 diffusion; (2) explicit jump
// convolution for the nu0 term; (3) multiplicative correction
// exp(B dV~ - |B|^2 dt / 2), with the rho dV~ transport applied as an exact
// translation of the coordinate frame; (4) shift by the xi displacement at
// each observed atom. Reflecting far boundaries (zero flux); mass is
// tracked, not renormalized.
GridZakaiResult grid_zakai_1d(const ModelSpec& spec, const TimeGrid& grid,
                              const ObservationDecomposition& obs,
                              const Eigen::MatrixXd& y_path,
                              const MeshSpec& mesh,
                              const Eigen::VectorXd& pi0);

// Gaussian initial density evaluated on the mesh and normalized so that the
// discrete mass (sum * dx) is exactly one.
Eigen::VectorXd gaussian_density_on_mesh(const MeshSpec& mesh, double mean,
                                         double var);

}  // namespace jdf
