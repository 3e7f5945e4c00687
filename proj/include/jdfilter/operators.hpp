#pragma once

#include <Eigen/Dense>

#include "jdfilter/model.hpp"
#include "jdfilter/test_function.hpp"

namespace jdf {

// Coefficients of the measure-evolution equations are random through the
// observation state: a context freezes (t, y) so operators act on functions
// of x alone.
struct OperatorContext {
  const ModelSpec* spec;
  double t;
  Eigen::VectorXd y;

  Eigen::VectorXd z_of(const Eigen::VectorXd& x) const {
    return spec->make_z(x, y);
  }
};

enum class JumpKind { Xi, Eta };
enum class JumpOp { I, J };

// Formula kernels shared with the particle filter's accumulation loop,
// which precomputes coefficients and derivatives once per particle.
inline double generator_apply(const Eigen::MatrixXd& a,
                              const Eigen::VectorXd& b,
                              const Eigen::VectorXd& grad,
                              const Eigen::MatrixXd& hess) {
  return a.cwiseProduct(hess).sum() + b.dot(grad);
}

inline double obs_operator_apply(const Eigen::VectorXd& rho_col, double B_k,
                                 double value, const Eigen::VectorXd& grad) {
  return rho_col.dot(grad) + B_k * value;
}

// Second-order generator part: a^{ij} D_ij phi + b^i D_i phi with
// a = (sigma sigma^T + rho rho^T)/2 evaluated at (t, x, y).
double apply_L(const OperatorContext& ctx, const TestFunction& phi,
               const Eigen::VectorXd& x);

// First-order observation operator: rho^{ik} D_i phi + B^k phi, 1 <= k <= d'.
double apply_M(const OperatorContext& ctx, const TestFunction& phi,
               const Eigen::VectorXd& x, int k);

// First difference under the jump map: phi(x + jump) - phi(x).
double apply_I(const OperatorContext& ctx, const TestFunction& phi,
               const Eigen::VectorXd& x, const Eigen::VectorXd& mark,
               JumpKind which);

// Compensated difference: apply_I - jump^i D_i phi; vanishes for linear phi.
double apply_J(const OperatorContext& ctx, const TestFunction& phi,
               const Eigen::VectorXd& x, const Eigen::VectorXd& mark,
               JumpKind which);

// Integral of I or J against the jump measure, pointwise in x. Exact sum for
// atomic measures; quasi-Monte-Carlo with a batch-split standard error for
// density measures (std_error == 0 for exact sums).
struct QuadratureResult {
  double value = 0.0;
  double std_error = 0.0;
};
QuadratureResult integrate_jump_operator(const OperatorContext& ctx,
                                         const TestFunction& phi,
                                         const Eigen::VectorXd& x,
                                         JumpKind which, JumpOp op);

// Integral of the jump coefficient itself against its measure at (t, z):
// the compensator drift of the X equation. Same quadrature path as above.
Eigen::VectorXd jump_compensator(const ModelSpec& spec, JumpKind which,
                                 double t, const Eigen::VectorXd& z);

}  // namespace jdf
