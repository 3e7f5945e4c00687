#include "jdfilter/model.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace jdf {

namespace {

std::string point_str(double t, const Eigen::VectorXd& z) {
  std::ostringstream os;
  os << "(t=" << t << ", z=[";
  for (int i = 0; i < z.size(); ++i) os << (i ? "," : "") << z[i];
  os << "])";
  return os.str();
}

// Tracks parameter reads so unknown keys in a config are rejected.
class Params {
 public:
  explicit Params(ParamMap map) : map_(std::move(map)) {}

  double get(const std::string& key, double fallback) {
    seen_.insert(key);
    defaults_[key] = fallback;
    auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
  }

  void finish(const std::string& model) const {
    for (const auto& [k, v] : map_) {
      (void)v;
      if (!seen_.count(k))
        throw ModelError("model '" + model + "': unknown parameter '" + k +
                         "'");
    }
  }

  const ParamMap& defaults() const { return defaults_; }

 private:
  ParamMap map_;
  std::set<std::string> seen_;
  ParamMap defaults_;
};

void default_gaussian_x0(ModelSpec& spec) {
  const Eigen::VectorXd mean = spec.x0_mean;
  const Eigen::VectorXd var = spec.x0_var;
  spec.x0_sampler = [mean, var](RngStream& rng, const Eigen::VectorXd&) {
    Eigen::VectorXd x(mean.size());
    for (int i = 0; i < mean.size(); ++i)
      x[i] = mean[i] + std::sqrt(var[i]) * rng.normal();
    return x;
  };
}

std::function<Eigen::VectorXd(double, const Eigen::VectorXd&,
                              const Eigen::VectorXd&)>
zero_jump(int dim_x) {
  return [dim_x](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(dim_x));
  };
}

ModelSpec build_zero(Params& p) {
  ModelSpec s;
  s.dim_x = static_cast<int>(p.get("dim_x", 1));
  s.dim_y = static_cast<int>(p.get("dim_y", 1));
  s.dim_w = static_cast<int>(p.get("dim_w", 1));
  s.horizon_T = p.get("T", 1.0);
  const int dx = s.dim_x, dy = s.dim_y, dw = s.dim_w;
  s.drift_b = [dx](double, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(dx));
  };
  s.diffusion_sigma = [dx, dw](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Zero(dx, dw));
  };
  s.diffusion_rho = [dx, dy](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Zero(dx, dy));
  };
  s.obs_drift_B = [dy](double, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(dy));
  };
  s.jump_eta = zero_jump(dx);
  s.jump_xi = zero_jump(dx);
  s.levy_nu0 = LevyMeasureSpec::zero(1);
  s.levy_nu1 = LevyMeasureSpec::zero(dy);
  s.y0 = Eigen::VectorXd::Zero(dy);
  s.x0_mean = Eigen::VectorXd::Zero(dx);
  s.x0_var = Eigen::VectorXd::Zero(dx);
  s.growth = {0.0, 0.0, 0.0, 0.0};
  default_gaussian_x0(s);
  return s;
}

ModelSpec build_constant_drift(Params& p) {
  ModelSpec s = build_zero(p);
  const double c = p.get("c", 1.0);
  const int dx = s.dim_x;
  s.drift_b = [dx, c](double, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Constant(dx, c));
  };
  s.growth.K0 = c * c * dx;
  return s;
}

ModelSpec build_linear_gaussian(Params& p) {
  ModelSpec s;
  const double a = p.get("a", -1.0);
  const double h = p.get("h", 1.0);
  const double sig = p.get("sigma", 1.0);
  const double rho = p.get("rho", 0.0);
  s.dim_x = s.dim_y = s.dim_w = 1;
  s.horizon_T = p.get("T", 1.0);
  s.drift_b = [a](double, const Eigen::VectorXd& z) {
    return Eigen::VectorXd(Eigen::VectorXd::Constant(1, a * z[0]));
  };
  s.diffusion_sigma = [sig](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, sig));
  };
  s.diffusion_rho = [rho](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, rho));
  };
  s.obs_drift_B = [h](double, const Eigen::VectorXd& z) {
    return Eigen::VectorXd(Eigen::VectorXd::Constant(1, h * z[0]));
  };
  s.jump_eta = zero_jump(1);
  s.jump_xi = zero_jump(1);
  s.levy_nu0 = LevyMeasureSpec::zero(1);
  s.levy_nu1 = LevyMeasureSpec::zero(1);
  s.y0 = Eigen::VectorXd::Zero(1);
  s.x0_mean = Eigen::VectorXd::Constant(1, p.get("x0_mean", 1.0));
  s.x0_var = Eigen::VectorXd::Constant(1, p.get("x0_var", 0.25));
  s.growth.K0 = sig * sig + rho * rho;
  s.growth.K1 = a * a;
  s.growth.K2 = h * h;
  s.growth.K = std::max(0.0, -rho * h);
  default_gaussian_x0(s);
  return s;
}

ModelSpec build_tanh_obs(Params& p) {
  ModelSpec s;
  const double theta = p.get("theta", 1.0);
  const double sig = p.get("sigma", 1.0);
  const double rho = p.get("rho", 0.5);
  const double beta = p.get("beta", 1.0);
  s.dim_x = s.dim_y = s.dim_w = 1;
  s.horizon_T = p.get("T", 1.0);
  s.drift_b = [theta](double, const Eigen::VectorXd& z) {
    return Eigen::VectorXd(Eigen::VectorXd::Constant(1, -theta * z[0]));
  };
  s.diffusion_sigma = [sig](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, sig));
  };
  s.diffusion_rho = [rho](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, rho));
  };
  s.obs_drift_B = [beta](double, const Eigen::VectorXd& z) {
    return Eigen::VectorXd(
        Eigen::VectorXd::Constant(1, beta * std::tanh(z[0])));
  };
  s.jump_eta = zero_jump(1);
  s.jump_xi = zero_jump(1);
  s.levy_nu0 = LevyMeasureSpec::zero(1);
  s.levy_nu1 = LevyMeasureSpec::zero(1);
  s.y0 = Eigen::VectorXd::Zero(1);
  s.x0_mean = Eigen::VectorXd::Constant(1, p.get("x0_mean", 0.0));
  s.x0_var = Eigen::VectorXd::Constant(1, p.get("x0_var", 1.0));
  s.growth.K0 = sig * sig + rho * rho + beta * beta;
  s.growth.K1 = theta * theta;
  s.growth.K2 = 0.0;
  // x tanh(x) >= 0, so the cross term is one-sided unless rho*beta < 0.
  s.growth.K = std::max(0.0, -rho * beta);
  default_gaussian_x0(s);
  return s;
}

ModelSpec build_ou_jump(Params& p) {
  ModelSpec s;
  const double theta = p.get("theta", 0.5);
  const double sig = p.get("sigma", 0.4);
  const double rho = p.get("rho", 0.0);
  const double h = p.get("h", 0.6);
  const double jump = p.get("jump_size", 0.5);
  const double mass_up = p.get("mass_up", 1.2);
  const double mass_down = p.get("mass_down", 0.8);
  const double xi_scale = p.get("xi_scale", 1.0);
  // nonzero xi_constant / eta_constant switch the displacement family from
  // mark-proportional to a constant displacement per atom
  const double xi_constant = p.get("xi_constant", 0.0);
  const double eta_size = p.get("eta_size", 0.25);
  const double eta_constant = p.get("eta_constant", 0.0);
  const double mass0 = p.get("mass0", 0.8);
  s.dim_x = s.dim_y = s.dim_w = 1;
  s.horizon_T = p.get("T", 0.5);
  s.drift_b = [theta](double, const Eigen::VectorXd& z) {
    return Eigen::VectorXd(Eigen::VectorXd::Constant(1, -theta * z[0]));
  };
  s.diffusion_sigma = [sig](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, sig));
  };
  s.diffusion_rho = [rho](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Constant(1, 1, rho));
  };
  s.obs_drift_B = [h](double, const Eigen::VectorXd& z) {
    return Eigen::VectorXd(Eigen::VectorXd::Constant(1, h * z[0]));
  };
  // x-independent displacements, either proportional to the mark or constant
  if (eta_constant != 0.0) {
    s.jump_eta = [eta_constant](double, const Eigen::VectorXd&,
                                const Eigen::VectorXd&) {
      return Eigen::VectorXd(Eigen::VectorXd::Constant(1, eta_constant));
    };
  } else {
    s.jump_eta = [](double, const Eigen::VectorXd&,
                    const Eigen::VectorXd& mk) { return mk; };
  }
  if (xi_constant != 0.0) {
    s.jump_xi = [xi_constant](double, const Eigen::VectorXd&,
                              const Eigen::VectorXd&) {
      return Eigen::VectorXd(Eigen::VectorXd::Constant(1, xi_constant));
    };
  } else {
    s.jump_xi = [xi_scale](double, const Eigen::VectorXd&,
                           const Eigen::VectorXd& mk) {
      return Eigen::VectorXd(xi_scale * mk);
    };
  }
  std::vector<LevyAtom> nu1_atoms;
  if (mass_up > 0.0)
    nu1_atoms.push_back({Eigen::VectorXd::Constant(1, jump), mass_up});
  if (mass_down > 0.0)
    nu1_atoms.push_back({Eigen::VectorXd::Constant(1, -jump), mass_down});
  s.levy_nu1 = nu1_atoms.empty() ? LevyMeasureSpec::zero(1)
                                 : LevyMeasureSpec::atomic(nu1_atoms);
  s.levy_nu0 =
      mass0 > 0.0
          ? LevyMeasureSpec::atomic(
                {{Eigen::VectorXd::Constant(1, eta_size), mass0}})
          : LevyMeasureSpec::zero(1);
  s.y0 = Eigen::VectorXd::Zero(1);
  s.x0_mean = Eigen::VectorXd::Constant(1, p.get("x0_mean", 1.0));
  s.x0_var = Eigen::VectorXd::Constant(1, p.get("x0_var", 0.09));
  const double m2_nu1 = s.levy_nu1.second_moment();
  const double xi_l2 = xi_constant != 0.0
                           ? s.levy_nu1.total_mass() * xi_constant * xi_constant
                           : xi_scale * xi_scale * m2_nu1;
  const double eta_l2 =
      eta_constant != 0.0
          ? s.levy_nu0.total_mass() * eta_constant * eta_constant
          : s.levy_nu0.second_moment();
  s.growth.K0 = std::max({sig * sig + rho * rho, eta_l2 + xi_l2, m2_nu1});
  s.growth.K1 = theta * theta;
  s.growth.K2 = h * h;
  s.growth.K = std::max(0.0, -rho * h);
  default_gaussian_x0(s);
  return s;
}

ModelSpec build_rotation(Params& p) {
  ModelSpec s;
  const double omega = p.get("omega", 1.0);
  const double sig = p.get("sigma", 0.5);
  const double h = p.get("h", 0.5);
  s.dim_x = 2;
  s.dim_y = 1;
  s.dim_w = 2;
  s.horizon_T = p.get("T", 1.0);
  s.drift_b = [omega](double, const Eigen::VectorXd& z) {
    Eigen::VectorXd b(2);
    b << -omega * z[1], omega * z[0];
    return b;
  };
  s.diffusion_sigma = [sig](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(sig * Eigen::MatrixXd::Identity(2, 2));
  };
  s.diffusion_rho = [](double, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 1));
  };
  s.obs_drift_B = [h](double, const Eigen::VectorXd& z) {
    return Eigen::VectorXd(Eigen::VectorXd::Constant(1, h * z[0]));
  };
  s.jump_eta = zero_jump(2);
  s.jump_xi = zero_jump(2);
  s.levy_nu0 = LevyMeasureSpec::zero(1);
  s.levy_nu1 = LevyMeasureSpec::zero(1);
  s.y0 = Eigen::VectorXd::Zero(1);
  s.x0_mean = (Eigen::VectorXd(2) << 1.0, 0.0).finished();
  s.x0_var = Eigen::VectorXd::Constant(2, 0.25);
  s.growth.K0 = 2.0 * sig * sig;
  s.growth.K1 = omega * omega;
  s.growth.K2 = h * h;
  s.growth.K = 0.0;
  default_gaussian_x0(s);
  return s;
}

struct ZooEntry {
  ModelSpec (*build)(Params&);
};

const std::map<std::string, ZooEntry>& zoo() {
  static const std::map<std::string, ZooEntry> z = {
      {"zero", {build_zero}},
      {"constant_drift", {build_constant_drift}},
      {"linear_gaussian", {build_linear_gaussian}},
      {"tanh_obs", {build_tanh_obs}},
      {"ou_jump", {build_ou_jump}},
      {"rotation", {build_rotation}},
  };
  return z;
}

}  // namespace

Eigen::VectorXd ModelSpec::sample_x0(RngStream& rng) const {
  return x0_sampler(rng, y0);
}

Eigen::VectorXd ModelSpec::make_z(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y) const {
  Eigen::VectorXd z(dim_x + dim_y);
  z.head(dim_x) = x;
  z.tail(dim_y) = y;
  return z;
}

CoefficientValues evaluate_coefficients(const ModelSpec& spec, double t,
                                        const Eigen::VectorXd& z) {
  if (z.size() != spec.dim_x + spec.dim_y)
    throw ModelError("evaluate_coefficients: z has size " +
                     std::to_string(z.size()) + ", expected " +
                     std::to_string(spec.dim_x + spec.dim_y));
  CoefficientValues v;
  v.b = spec.drift_b(t, z);
  v.sigma = spec.diffusion_sigma(t, z);
  v.rho = spec.diffusion_rho(t, z);
  v.B = spec.obs_drift_B(t, z);

  auto check = [&](const char* name, const auto& m, int rows, int cols) {
    if (m.rows() != rows || m.cols() != cols)
      throw ModelError(std::string("coefficient ") + name +
                       " has wrong shape at " + point_str(t, z));
    if (!m.allFinite())
      throw ModelError(std::string("coefficient ") + name +
                       " is not finite at " + point_str(t, z));
  };
  check("b", v.b, spec.dim_x, 1);
  check("sigma", v.sigma, spec.dim_x, spec.dim_w);
  check("rho", v.rho, spec.dim_x, spec.dim_y);
  check("B", v.B, spec.dim_y, 1);
  return v;
}

AssumptionReport check_assumptions(const ModelSpec& spec, int n_samples,
                                   double radius) {
  if (n_samples < 1) throw ModelError("check_assumptions: n_samples < 1");
  if (!(radius > 0.0)) throw ModelError("check_assumptions: radius <= 0");

  const int dz = spec.dim_x + spec.dim_y;
  const auto& g = spec.growth;

  // ratio of LHS/RHS with the zero-RHS corner handled explicitly
  auto ratio = [](double lhs, double rhs) {
    if (rhs > 0.0) return lhs / rhs;
    return lhs <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  };

  AssumptionReport rep;
  rep.entries.reserve(5);  // references below must stay valid
  auto add_entry = [&](const std::string& name) -> AssumptionReport::Entry& {
    rep.entries.push_back(
        {name, -std::numeric_limits<double>::infinity(), 0.0,
         Eigen::VectorXd::Zero(dz), true});
    return rep.entries.back();
  };
  auto& e_drift = add_entry("drift_growth");
  auto& e_diff = add_entry("diffusion_obs_growth");
  auto& e_jump = add_entry("jump_growth");
  auto& e_cross = add_entry("cross_term_one_sided");

  auto record = [](AssumptionReport::Entry& e, double r, double t,
                   const Eigen::VectorXd& z) {
    if (r > e.max_ratio) {
      e.max_ratio = r;
      e.witness_t = t;
      e.witness_z = z;
    }
  };

  const auto& quad0 = spec.levy_nu0.quadrature();
  const auto& quad1 = spec.levy_nu1.quadrature();

  // Quasi-random points: t uniform on [0,T], z uniform in the |z|<=radius
  // ball (direction from inverse-CDF Gaussians, radius via u^(1/dz)).
  for (int i = 0; i < n_samples; ++i) {
    const auto u = halton_point(static_cast<std::uint64_t>(i), 2 + dz);
    const double t = u[0] * spec.horizon_T;
    Eigen::VectorXd dir(dz);
    for (int j = 0; j < dz; ++j) dir[j] = inverse_normal_cdf(u[2 + j]);
    const double nrm = dir.norm();
    Eigen::VectorXd z = Eigen::VectorXd::Zero(dz);
    if (nrm > 0.0)
      z = radius * std::pow(u[1], 1.0 / dz) * dir / nrm;

    const auto cv = evaluate_coefficients(spec, t, z);
    const double z2 = z.squaredNorm();

    record(e_drift, ratio(cv.b.squaredNorm(), g.K0 + g.K1 * z2), t, z);
    record(e_diff,
           ratio(cv.sigma.squaredNorm() + cv.rho.squaredNorm() +
                     cv.B.squaredNorm(),
                 g.K0 + g.K2 * z2),
           t, z);

    double jump_l2 = 0.0;
    for (const auto& q : quad0)
      jump_l2 += q.weight * spec.jump_eta(t, z, q.mark).squaredNorm();
    for (const auto& q : quad1)
      jump_l2 += q.weight * spec.jump_xi(t, z, q.mark).squaredNorm();
    record(e_jump, ratio(jump_l2, g.K0 + g.K2 * z2), t, z);

    const double cross = -z.head(spec.dim_x).dot(cv.rho * cv.B);
    record(e_cross, ratio(cross, g.K * (1.0 + z2)), t, z);
  }

  auto& e_m2 = add_entry("mark_second_moment");
  record(e_m2, ratio(spec.levy_nu1.second_moment(), g.K0), 0.0,
         Eigen::VectorXd::Zero(dz));

  rep.pass = true;
  for (auto& e : rep.entries) {
    e.pass = e.max_ratio <= 1.0 + 1e-12;
    rep.pass = rep.pass && e.pass;
  }
  return rep;
}

ModelSpec make_model(const std::string& name, const ParamMap& params) {
  auto it = zoo().find(name);
  if (it == zoo().end()) throw ModelError("unknown model '" + name + "'");
  Params p(params);
  ModelSpec spec = it->second.build(p);
  p.finish(name);
  spec.name = name;
  return spec;
}

std::vector<std::string> model_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : zoo()) {
    (void)v;
    names.push_back(k);
  }
  return names;
}

ParamMap model_defaults(const std::string& name) {
  auto it = zoo().find(name);
  if (it == zoo().end()) throw ModelError("unknown model '" + name + "'");
  Params p({});
  (void)it->second.build(p);
  return p.defaults();
}

}  // namespace jdf
