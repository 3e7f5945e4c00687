#include "jdfilter/levy.hpp"

#include <cmath>
#include <stdexcept>

namespace jdf {

namespace {
constexpr int kQmcPoints = 2048;
}

LevyMeasureSpec LevyMeasureSpec::zero(int mark_dim) {
  LevyMeasureSpec s;
  s.kind_ = Kind::Atomic;
  s.mark_dim_ = mark_dim;
  s.total_mass_ = 0.0;
  return s;
}

LevyMeasureSpec LevyMeasureSpec::atomic(std::vector<LevyAtom> atoms) {
  LevyMeasureSpec s;
  s.kind_ = Kind::Atomic;
  if (atoms.empty()) throw std::invalid_argument("atomic: no atoms (use zero)");
  s.mark_dim_ = static_cast<int>(atoms.front().mark.size());
  double mass = 0.0;
  for (const auto& a : atoms) {
    if (a.mass <= 0.0) throw std::invalid_argument("atomic: mass <= 0");
    if (a.mark.size() != s.mark_dim_)
      throw std::invalid_argument("atomic: inconsistent mark dims");
    mass += a.mass;
  }
  s.total_mass_ = mass;
  s.atoms_ = std::move(atoms);
  return s;
}

LevyMeasureSpec LevyMeasureSpec::gaussian(double total_mass,
                                          Eigen::VectorXd mean,
                                          Eigen::VectorXd sigma) {
  if (total_mass < 0.0 || !std::isfinite(total_mass))
    throw std::invalid_argument("gaussian: bad total mass");
  if (mean.size() != sigma.size())
    throw std::invalid_argument("gaussian: mean/sigma dims differ");
  for (int i = 0; i < sigma.size(); ++i)
    if (sigma[i] <= 0.0) throw std::invalid_argument("gaussian: sigma <= 0");
  LevyMeasureSpec s;
  s.kind_ = Kind::GaussianDensity;
  s.mark_dim_ = static_cast<int>(mean.size());
  s.total_mass_ = total_mass;
  s.gauss_mean_ = std::move(mean);
  s.gauss_sigma_ = std::move(sigma);
  return s;
}

double LevyMeasureSpec::second_moment() const {
  if (is_zero()) return 0.0;
  if (kind_ == Kind::Atomic) {
    double m2 = 0.0;
    for (const auto& a : atoms_) m2 += a.mass * a.mark.squaredNorm();
    return m2;
  }
  return total_mass_ *
         (gauss_mean_.squaredNorm() + gauss_sigma_.squaredNorm());
}

Eigen::VectorXd LevyMeasureSpec::mean_mark() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mark_dim_);
  if (is_zero()) return m;
  if (kind_ == Kind::Atomic) {
    for (const auto& a : atoms_) m += a.mass * a.mark;
    return m;
  }
  return total_mass_ * gauss_mean_;
}

Eigen::VectorXd LevyMeasureSpec::sample_mark(RngStream& rng) const {
  if (is_zero()) throw std::logic_error("sample_mark: zero measure");
  if (kind_ == Kind::Atomic) {
    double u = rng.uniform() * total_mass_;
    for (const auto& a : atoms_) {
      u -= a.mass;
      if (u <= 0.0) return a.mark;
    }
    return atoms_.back().mark;  // guard against roundoff in the last bin
  }
  Eigen::VectorXd z(mark_dim_);
  for (int i = 0; i < mark_dim_; ++i)
    z[i] = gauss_mean_[i] + gauss_sigma_[i] * rng.normal();
  return z;
}

double LevyMeasureSpec::normalized_density(const Eigen::VectorXd& mark) const {
  if (kind_ != Kind::GaussianDensity)
    throw std::logic_error("normalized_density: atomic measure");
  double logp = 0.0;
  for (int i = 0; i < mark_dim_; ++i) {
    const double u = (mark[i] - gauss_mean_[i]) / gauss_sigma_[i];
    logp += -0.5 * u * u - std::log(gauss_sigma_[i]) -
            0.91893853320467274178032973640562;  // log sqrt(2 pi)
  }
  return std::exp(logp);
}

const std::vector<LevyMeasureSpec::QuadratureNode>&
LevyMeasureSpec::quadrature() const {
  if (!quad_cache_.empty() || is_zero()) return quad_cache_;
  if (kind_ == Kind::Atomic) {
    quad_cache_.reserve(atoms_.size());
    for (const auto& a : atoms_) quad_cache_.push_back({a.mark, a.mass});
    return quad_cache_;
  }
  quad_cache_.reserve(kQmcPoints);
  const double w = total_mass_ / kQmcPoints;
  for (int i = 0; i < kQmcPoints; ++i) {
    const auto u = halton_point(static_cast<std::uint64_t>(i), mark_dim_);
    Eigen::VectorXd mark(mark_dim_);
    for (int j = 0; j < mark_dim_; ++j)
      mark[j] = gauss_mean_[j] + gauss_sigma_[j] * inverse_normal_cdf(u[j]);
    quad_cache_.push_back({std::move(mark), w});
  }
  return quad_cache_;
}

}  // namespace jdf
