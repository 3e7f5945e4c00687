#pragma once

#include "jdfilter/girsanov.hpp"
#include "jdfilter/test_function.hpp"

namespace jdf {

class FilterDegeneracyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ResamplingKind { None, Systematic, Multinomial };
enum class FilterMode { Zakai, Fkk };

struct FilterConfig {
  int n_particles = 1000;
  ResamplingKind resampling = ResamplingKind::Systematic;
  double resample_threshold = 0.5;  // effective-sample-size fraction
  FilterMode mode = FilterMode::Zakai;  // zakai: never resample
  bool jump_adapted = false;
  bool store_paths = false;  // keep per-particle paths (small runs only)
  int worker_count = 1;
};

// Particle cloud snapshot: mu(phi) = (1/M) sum w_i phi(x_i), P = mu/mu(1).
// Weights live in log space.
struct WeightedEmpiricalMeasure {
  Eigen::MatrixXd particles;    // M x d
  Eigen::VectorXd log_weights;  // M
  double time = 0.0;

  double integrate(const TestFunction& phi) const;   // mu(phi)
  double normalized(const TestFunction& phi) const;  // P(phi)
  double total_mass() const;                         // mu(1)
  double ess_fraction() const;
};

struct InnovationPath {
  Eigen::MatrixXd dVbar;  // n_steps x d'
};

struct InnovationReport {
  Eigen::VectorXd qv_ratio;  // realized quadratic variation over T, per component
  Eigen::VectorXd autocorr1;
  int n_steps = 0;
  bool pass = false;
};

// Everything the residual checks need, accumulated while the filter runs:
// node series of mu/P against the test-function set, left-endpoint operator
// integrals per step, the per-atom first-difference terms, and the
// innovation increments.
struct FilterRunStats {
  TimeGrid grid;
  std::vector<std::string> phi_names;

  // node series, (n_steps+1) rows
  Eigen::MatrixXd mu_phi, P_phi;         // x n_phi
  Eigen::VectorXd mu_one;
  Eigen::VectorXd ess_fraction;
  std::vector<char> resampled;
  Eigen::MatrixXd post_mean, post_var;   // x d (normalized mean / marginal variance)
  Eigen::MatrixXd mu_moment1;            // x d (unnormalized first moment)

  // step series, n_steps rows, evaluated at the step start (predictable)
  Eigen::MatrixXd mu_L, P_L;                       // x n_phi
  std::vector<Eigen::MatrixXd> mu_M, P_M;          // d' of (n_steps x n_phi)
  Eigen::MatrixXd mu_Jeta, mu_Jxi, mu_Ixi;         // nu-integrals, x n_phi
  Eigen::MatrixXd P_Jeta, P_Jxi, P_Ixi;
  Eigen::MatrixXd mu_B, P_B;                       // n_steps x d'
  Eigen::MatrixXd dVtilde;                         // copy of the driving increments

  // observed-atom terms, row-aligned with atom_step
  std::vector<int> atom_step;
  Eigen::MatrixXd atom_mu_I, atom_P_I;  // n_atoms x n_phi

  InnovationPath innovation;

  Eigen::MatrixXd final_particles;
  Eigen::VectorXd final_log_weights;

  // populated only when FilterConfig::store_paths is set
  std::vector<Eigen::MatrixXd> particle_paths;  // M of (n_nodes x d)
  Eigen::MatrixXd log_weight_paths;             // M x n_nodes
};

// Reference-measure particle filter: every particle carries its own (W, N0)
// streams, is advanced by the reference-measure signal dynamics driven by
// the shared observed (V~, N1), and its log-weight follows the inverse
// likelihood update B dV~ - |B|^2 dt / 2. In fkk mode the cloud is resampled
// when the effective sample size drops below threshold * M; weights are
// reset to their mean so mu_t(1) is preserved across the resample.
FilterRunStats run_filter(const ModelSpec& spec, const TimeGrid& grid,
                          const ObservationDecomposition& obs,
                          const Eigen::MatrixXd& y_path,
                          const FilterConfig& cfg,
                          const std::vector<TestFunction>& phis,
                          std::uint64_t seed, std::uint64_t stream_base = 0);

// Residual of the unnormalized measure equation along a run:
//   R_t = mu_t(phi) - mu_0(phi)
//         - sum_steps [ mu(L phi) dt + mu(M^k phi) dV~^k
//                       + mu(J^eta phi)nu0 dt + mu(J^xi phi)nu1 dt ]
//         - sum_atoms mu_-(I^xi phi) + sum_steps mu(I^xi phi)nu1 dt.
// Requires a run without resampling.
struct ResidualStats {
  Eigen::VectorXd residual;  // per node
  double max_abs = 0.0;
  // cumulated magnitudes of the pieces, for the report
  double drift_total = 0.0, martingale_total = 0.0, jump_total = 0.0;
};

ResidualStats zakai_residual(const FilterRunStats& stats, int phi_index);

// Residual of the normalized equation driven by the innovation increments,
// with the gain P(M^k phi) - P(phi) P(B^k).
ResidualStats fkk_residual(const FilterRunStats& stats, int phi_index);

// Wiener-ness checks of the innovation: realized quadratic variation close
// to T and small lag-1 increment autocorrelation.
InnovationReport innovation_diagnostics(const InnovationPath& innovation,
                                        double T);

// Unbiased resampling over normalized weights (systematic or multinomial);
// exposed for the resampling-invariance property tests.
std::vector<int> resample_indices(ResamplingKind kind,
                                  const Eigen::VectorXd& normalized_weights,
                                  RngStream& rng);

}  // namespace jdf
