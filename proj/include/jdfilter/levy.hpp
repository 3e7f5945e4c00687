#pragma once

#include <Eigen/Dense>
#include <vector>

#include "jdfilter/rng.hpp"

namespace jdf {

struct LevyAtom {
  Eigen::VectorXd mark;
  double mass;
};

// Finite Levy measure on R^m. Sigma-finite measures are represented only
// after truncation to finite total mass; the simulator draws a Poisson number
// of atoms per horizon from the normalized measure.
//
// Two representations: a finite atomic list, or a Gaussian density with
// independent components scaled to a given total mass. Quadrature against the
// measure is exact over atoms and quasi-Monte-Carlo (fixed 2048-point rule)
// for the density case.
class LevyMeasureSpec {
 public:
  enum class Kind { Atomic, GaussianDensity };

  static LevyMeasureSpec zero(int mark_dim);
  static LevyMeasureSpec atomic(std::vector<LevyAtom> atoms);
  static LevyMeasureSpec gaussian(double total_mass, Eigen::VectorXd mean,
                                  Eigen::VectorXd sigma);

  Kind kind() const { return kind_; }
  int mark_dim() const { return mark_dim_; }
  double total_mass() const { return total_mass_; }
  bool is_zero() const { return total_mass_ == 0.0; }

  // Exact for atomic specs, closed form for the Gaussian density.
  double second_moment() const;       // integral of |z|^2 against the measure
  Eigen::VectorXd mean_mark() const;  // integral of z against the measure

  // Draw from the normalized (probability) measure.
  Eigen::VectorXd sample_mark(RngStream& rng) const;

  // Density of the normalized measure (GaussianDensity only).
  double normalized_density(const Eigen::VectorXd& mark) const;

  const std::vector<LevyAtom>& atoms() const { return atoms_; }

  // Quadrature nodes (mark, weight) with weights summing to total_mass.
  // Atomic: the atoms themselves. Gaussian: 2048 Halton points mapped
  // through the component-wise inverse CDF.
  struct QuadratureNode {
    Eigen::VectorXd mark;
    double weight;
  };
  const std::vector<QuadratureNode>& quadrature() const;
  bool quadrature_is_exact() const { return kind_ == Kind::Atomic; }

 private:
  LevyMeasureSpec() = default;

  Kind kind_ = Kind::Atomic;
  int mark_dim_ = 0;
  double total_mass_ = 0.0;
  std::vector<LevyAtom> atoms_;
  Eigen::VectorXd gauss_mean_, gauss_sigma_;
  mutable std::vector<QuadratureNode> quad_cache_;
};

}  // namespace jdf
