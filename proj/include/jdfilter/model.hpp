#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jdfilter/levy.hpp"
#include "jdfilter/rng.hpp"

namespace jdf {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Nonnegative constants of the growth conditions declared by a model:
//   |b(t,z)|^2                         <= K0 + K1 |z|^2
//   |sigma|^2 + |rho|^2 + |B|^2        <= K0 + K2 |z|^2
//   |eta|^2_{L2(nu0)} + |xi|^2_{L2(nu1)} <= K0 + K2 |z|^2
//   second moment of nu1               <= K0
//   -x^i rho^{ik} B^k                  <= K  (1 + |z|^2)
struct GrowthConstants {
  double K0 = 0.0, K1 = 0.0, K2 = 0.0, K = 0.0;
};

// Complete description of the partially observed system
//   dX = b dt + sigma dW + rho dV + eta dN0~ + xi dN1~
//   dY = B dt + dV + z dN1~
// with z = (x, y) stacked, compensated jump measures N~ = N - nu dt, and
// finite characteristic measures nu0 (marks in R^m) and nu1 (marks in R^d').
// Coefficients are pure functions; instances are immutable after
// construction and safe to share across workers.
struct ModelSpec {
  std::string name;
  int dim_x = 1;   // d
  int dim_y = 1;   // d'
  int dim_w = 1;   // d1
  double horizon_T = 1.0;
  GrowthConstants growth;

  LevyMeasureSpec levy_nu0 = LevyMeasureSpec::zero(1);
  LevyMeasureSpec levy_nu1 = LevyMeasureSpec::zero(1);

  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> drift_b;
  std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> diffusion_sigma;
  std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> diffusion_rho;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> obs_drift_B;
  // (t, z, mark) -> displacement of X
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      jump_eta;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&,
                                const Eigen::VectorXd&)>
      jump_xi;

  // Initial law: Y0 is fixed, X0 given Y0 is drawn by x0_sampler (default:
  // independent Gaussian with mean x0_mean and diagonal variances x0_var).
  Eigen::VectorXd y0;
  Eigen::VectorXd x0_mean;
  Eigen::VectorXd x0_var;
  std::function<Eigen::VectorXd(RngStream&, const Eigen::VectorXd&)> x0_sampler;

  Eigen::VectorXd sample_x0(RngStream& rng) const;
  Eigen::VectorXd make_z(const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y) const;
};

struct CoefficientValues {
  Eigen::VectorXd b;      // d
  Eigen::MatrixXd sigma;  // d x d1
  Eigen::MatrixXd rho;    // d x d'
  Eigen::VectorXd B;      // d'
};

// Bundled evaluation for the simulator's inner loop. Verifies output shapes
// and finiteness; throws ModelError naming the offending coefficient.
CoefficientValues evaluate_coefficients(const ModelSpec& spec, double t,
                                        const Eigen::VectorXd& z);

// Statistical check of the declared growth inequalities on quasi-random
// points (t, z) with |z| <= radius. Not a proof: sampling only.
struct AssumptionReport {
  struct Entry {
    std::string inequality;
    double max_ratio;  // max over samples of LHS / RHS
    double witness_t;
    Eigen::VectorXd witness_z;
    bool pass;
  };
  std::vector<Entry> entries;
  bool pass = false;
};

AssumptionReport check_assumptions(const ModelSpec& spec, int n_samples,
                                   double radius);

// Model zoo: named parametric families buildable from a flat parameter map,
// so experiment configs stay serializable.
using ParamMap = std::map<std::string, double>;

ModelSpec make_model(const std::string& name, const ParamMap& params = {});
std::vector<std::string> model_names();
// Parameter names (with defaults) accepted by a zoo entry.
ParamMap model_defaults(const std::string& name);

}  // namespace jdf
