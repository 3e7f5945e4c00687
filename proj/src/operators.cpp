#include "jdfilter/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace jdf {

namespace {

class OperatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw OperatorError(std::string(what) + ": non-finite result");
}

Eigen::VectorXd jump_displacement(const OperatorContext& ctx,
                                  const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& mark, JumpKind which) {
  const Eigen::VectorXd z = ctx.z_of(x);
  const Eigen::VectorXd d = which == JumpKind::Xi
                                ? ctx.spec->jump_xi(ctx.t, z, mark)
                                : ctx.spec->jump_eta(ctx.t, z, mark);
  if (!d.allFinite()) throw OperatorError("jump coefficient: non-finite");
  return d;
}

}  // namespace

double apply_L(const OperatorContext& ctx, const TestFunction& phi,
               const Eigen::VectorXd& x) {
  const auto cv = evaluate_coefficients(*ctx.spec, ctx.t, ctx.z_of(x));
  const Eigen::MatrixXd a =
      0.5 * (cv.sigma * cv.sigma.transpose() + cv.rho * cv.rho.transpose());
  const double out = generator_apply(a, cv.b, phi.gradient(x), phi.hessian(x));
  require_finite(out, "apply_L");
  return out;
}

double apply_M(const OperatorContext& ctx, const TestFunction& phi,
               const Eigen::VectorXd& x, int k) {
  if (k < 0 || k >= ctx.spec->dim_y)
    throw OperatorError("apply_M: component index out of range");
  const auto cv = evaluate_coefficients(*ctx.spec, ctx.t, ctx.z_of(x));
  const double out =
      obs_operator_apply(cv.rho.col(k), cv.B[k], phi.value(x), phi.gradient(x));
  require_finite(out, "apply_M");
  return out;
}

double apply_I(const OperatorContext& ctx, const TestFunction& phi,
               const Eigen::VectorXd& x, const Eigen::VectorXd& mark,
               JumpKind which) {
  const Eigen::VectorXd d = jump_displacement(ctx, x, mark, which);
  const double out = phi.value(x + d) - phi.value(x);
  require_finite(out, "apply_I");
  return out;
}

double apply_J(const OperatorContext& ctx, const TestFunction& phi,
               const Eigen::VectorXd& x, const Eigen::VectorXd& mark,
               JumpKind which) {
  const Eigen::VectorXd d = jump_displacement(ctx, x, mark, which);
  const double out =
      phi.value(x + d) - phi.value(x) - d.dot(phi.gradient(x));
  require_finite(out, "apply_J");
  return out;
}

QuadratureResult integrate_jump_operator(const OperatorContext& ctx,
                                         const TestFunction& phi,
                                         const Eigen::VectorXd& x,
                                         JumpKind which, JumpOp op) {
  const LevyMeasureSpec& nu = which == JumpKind::Xi ? ctx.spec->levy_nu1
                                                    : ctx.spec->levy_nu0;
  QuadratureResult res;
  if (nu.is_zero()) return res;

  // Shared pieces: phi(x) and the gradient term do not depend on the mark.
  const double phi_x = phi.value(x);
  const Eigen::VectorXd grad_x =
      op == JumpOp::J ? phi.gradient(x) : Eigen::VectorXd();

  const auto& nodes = nu.quadrature();
  const Eigen::VectorXd z = ctx.z_of(x);
  std::vector<double> terms;
  terms.reserve(nodes.size());
  for (const auto& q : nodes) {
    const Eigen::VectorXd d = which == JumpKind::Xi
                                  ? ctx.spec->jump_xi(ctx.t, z, q.mark)
                                  : ctx.spec->jump_eta(ctx.t, z, q.mark);
    if (!d.allFinite()) throw std::runtime_error("jump coefficient: non-finite");
    double v = phi.value(x + d) - phi_x;
    if (op == JumpOp::J) v -= d.dot(grad_x);
    terms.push_back(q.weight * v);
    res.value += q.weight * v;
  }
  require_finite(res.value, "integrate_jump_operator");

  if (!nu.quadrature_is_exact() && terms.size() >= 16) {
    // Batch-split error estimate for the QMC rule.
    const int n_batches = 8;
    const std::size_t per = terms.size() / n_batches;
    std::vector<double> batch(n_batches, 0.0);
    for (int b = 0; b < n_batches; ++b)
      for (std::size_t i = b * per; i < (b + 1) * per; ++i)
        batch[b] += terms[i] * n_batches;
    double mean = 0.0;
    for (double v : batch) mean += v / n_batches;
    double var = 0.0;
    for (double v : batch) var += (v - mean) * (v - mean);
    var /= (n_batches - 1.0);
    res.std_error = std::sqrt(var / n_batches);
  }
  return res;
}

Eigen::VectorXd jump_compensator(const ModelSpec& spec, JumpKind which,
                                 double t, const Eigen::VectorXd& z) {
  const LevyMeasureSpec& nu =
      which == JumpKind::Xi ? spec.levy_nu1 : spec.levy_nu0;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(spec.dim_x);
  for (const auto& q : nu.quadrature()) {
    out += q.weight * (which == JumpKind::Xi ? spec.jump_xi(t, z, q.mark)
                                             : spec.jump_eta(t, z, q.mark));
  }
  return out;
}

}  // namespace jdf
