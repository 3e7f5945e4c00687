#include "jdfilter/particle_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "jdfilter/parallel.hpp"

namespace jdf {

namespace {

constexpr long kChunk = 4096;  // fixed chunk size keeps reductions
                               // independent of the worker count

struct MeasureSums {
  double S0 = 0.0, Su2 = 0.0;
  Eigen::VectorXd Sx, Sxx;
  Eigen::VectorXd Sphi;
  // step block
  Eigen::VectorXd SL, SJeta, SJxi, SIxi;
  Eigen::MatrixXd SM;     // d' x nphi
  Eigen::VectorXd SB;     // d'
  Eigen::MatrixXd Satom;  // atoms-in-step x nphi

  void init(int d, int dy, int nphi, int n_atoms) {
    Sx = Eigen::VectorXd::Zero(d);
    Sxx = Eigen::VectorXd::Zero(d);
    Sphi = Eigen::VectorXd::Zero(nphi);
    SL = Eigen::VectorXd::Zero(nphi);
    SJeta = Eigen::VectorXd::Zero(nphi);
    SJxi = Eigen::VectorXd::Zero(nphi);
    SIxi = Eigen::VectorXd::Zero(nphi);
    SM = Eigen::MatrixXd::Zero(dy, nphi);
    SB = Eigen::VectorXd::Zero(dy);
    Satom = Eigen::MatrixXd::Zero(n_atoms, nphi);
  }

  void add(const MeasureSums& o) {
    S0 += o.S0;
    Su2 += o.Su2;
    Sx += o.Sx;
    Sxx += o.Sxx;
    Sphi += o.Sphi;
    SL += o.SL;
    SJeta += o.SJeta;
    SJxi += o.SJxi;
    SIxi += o.SIxi;
    SM += o.SM;
    SB += o.SB;
    Satom += o.Satom;
  }
};

double max_finite_or_throw(const Eigen::VectorXd& logw, int node) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < logw.size(); ++i) m = std::max(m, logw[i]);
  if (!std::isfinite(m)) {
    std::ostringstream os;
    os << "filter degeneracy at node " << node
       << ": every particle carries zero weight";
    throw FilterDegeneracyError(os.str());
  }
  return m;
}

}  // namespace

double WeightedEmpiricalMeasure::integrate(const TestFunction& phi) const {
  const int M = static_cast<int>(log_weights.size());
  const double m = log_weights.maxCoeff();
  double s = 0.0;
  for (int i = 0; i < M; ++i)
    s += std::exp(log_weights[i] - m) * phi.value(particles.row(i).transpose());
  return std::exp(m) * s / M;
}

double WeightedEmpiricalMeasure::total_mass() const {
  const int M = static_cast<int>(log_weights.size());
  const double m = log_weights.maxCoeff();
  double s = 0.0;
  for (int i = 0; i < M; ++i) s += std::exp(log_weights[i] - m);
  return std::exp(m) * s / M;
}

double WeightedEmpiricalMeasure::normalized(const TestFunction& phi) const {
  return integrate(phi) / total_mass();
}

double WeightedEmpiricalMeasure::ess_fraction() const {
  const int M = static_cast<int>(log_weights.size());
  const double m = log_weights.maxCoeff();
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < M; ++i) {
    const double u = std::exp(log_weights[i] - m);
    s += u;
    s2 += u * u;
  }
  return s * s / s2 / M;
}

std::vector<int> resample_indices(ResamplingKind kind,
                                  const Eigen::VectorXd& p, RngStream& rng) {
  const int M = static_cast<int>(p.size());
  std::vector<int> idx(M);
  if (kind == ResamplingKind::None) {
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  std::vector<double> points(M);
  if (kind == ResamplingKind::Systematic) {
    const double r = rng.uniform();
    for (int j = 0; j < M; ++j) points[j] = (j + r) / M;
  } else {
    for (int j = 0; j < M; ++j) points[j] = rng.uniform();
    std::sort(points.begin(), points.end());
  }
  double cum = 0.0;
  int i = 0;
  for (int j = 0; j < M; ++j) {
    while (cum + p[i] < points[j] && i < M - 1) cum += p[i++];
    idx[j] = i;
  }
  return idx;
}

FilterRunStats run_filter(const ModelSpec& spec, const TimeGrid& grid,
                          const ObservationDecomposition& obs,
                          const Eigen::MatrixXd& y_path,
                          const FilterConfig& cfg,
                          const std::vector<TestFunction>& phis,
                          std::uint64_t seed, std::uint64_t stream_base) {
  const int M = cfg.n_particles;
  if (M < 2) throw std::invalid_argument("run_filter: n_particles < 2");
  if (!(cfg.resample_threshold > 0.0 && cfg.resample_threshold <= 1.0))
    throw std::invalid_argument("run_filter: resample_threshold outside (0,1]");
  if (y_path.rows() != grid.n_nodes())
    throw std::invalid_argument("run_filter: y_path does not match the grid");
  const int n = grid.n_steps;
  const int d = spec.dim_x;
  const int dy = spec.dim_y;
  const int nphi = static_cast<int>(phis.size());
  const double dt = grid.dt();
  const int n_atoms = static_cast<int>(obs.atoms1.size());

  // Observed atoms bucketed per step; global row index kept for the stats.
  std::vector<std::vector<int>> atoms_of_step(n);
  for (int a = 0; a < n_atoms; ++a) atoms_of_step[obs.atoms1[a].step].push_back(a);

  FilterRunStats st;
  st.grid = grid;
  for (const auto& p : phis) st.phi_names.push_back(p.name);
  st.mu_phi.setZero(n + 1, nphi);
  st.P_phi.setZero(n + 1, nphi);
  st.mu_one.setZero(n + 1);
  st.ess_fraction.setZero(n + 1);
  st.resampled.assign(n + 1, 0);
  st.post_mean.setZero(n + 1, d);
  st.post_var.setZero(n + 1, d);
  st.mu_moment1.setZero(n + 1, d);
  st.mu_L.setZero(n, nphi);
  st.P_L.setZero(n, nphi);
  st.mu_M.assign(dy, Eigen::MatrixXd::Zero(n, nphi));
  st.P_M.assign(dy, Eigen::MatrixXd::Zero(n, nphi));
  st.mu_Jeta.setZero(n, nphi);
  st.mu_Jxi.setZero(n, nphi);
  st.mu_Ixi.setZero(n, nphi);
  st.P_Jeta.setZero(n, nphi);
  st.P_Jxi.setZero(n, nphi);
  st.P_Ixi.setZero(n, nphi);
  st.mu_B.setZero(n, dy);
  st.P_B.setZero(n, dy);
  st.dVtilde = obs.dVtilde;
  st.atom_step.resize(n_atoms);
  for (int a = 0; a < n_atoms; ++a) st.atom_step[a] = obs.atoms1[a].step;
  st.atom_mu_I.setZero(n_atoms, nphi);
  st.atom_P_I.setZero(n_atoms, nphi);
  st.innovation.dVbar.setZero(n, dy);
  if (cfg.store_paths) {
    st.particle_paths.assign(M, Eigen::MatrixXd::Zero(n + 1, d));
    st.log_weight_paths.setZero(M, n + 1);
  }

  // Particle state. Each particle owns stream (base, 1, i); the resampling
  // control stream is (base, 2). The prior draws X0 given the observed Y0.
  Eigen::MatrixXd X(M, d);
  Eigen::VectorXd logw = Eigen::VectorXd::Zero(M);
  const Eigen::VectorXd y0_obs = y_path.row(0).transpose();
  std::vector<RngStream> prng;
  prng.reserve(M);
  for (int i = 0; i < M; ++i) {
    prng.emplace_back(seed,
                      substream(substream(stream_base, 1),
                                static_cast<std::uint64_t>(i)));
    X.row(i) = spec.x0_sampler(prng.back(), y0_obs).transpose();
  }
  RngStream control(seed, substream(stream_base, 2));

  Eigen::MatrixXd Bbuf(M, dy);  // per-particle B at the step start

  const long n_chunks = (M + kChunk - 1) / kChunk;
  std::vector<MeasureSums> partial(n_chunks);

  const double nu0_mass = spec.levy_nu0.total_mass();

  for (int node = 0; node <= n; ++node) {
    const double t = grid.node(node);
    const Eigen::VectorXd y = y_path.row(node).transpose();
    const bool has_step = node < n;
    const auto& step_atoms = has_step ? atoms_of_step[node] : std::vector<int>{};
    const int n_step_atoms = static_cast<int>(step_atoms.size());

    const double m = max_finite_or_throw(logw, node);

    // Accumulation pass: weighted measure snapshot plus the left-endpoint
    // operator integrals of the step that starts here.
    parallel_for(n_chunks, cfg.worker_count, [&](long c) {
      MeasureSums& acc = partial[c];
      acc = MeasureSums();
      acc.init(d, dy, nphi, n_step_atoms);
      const long lo = c * kChunk;
      const long hi = std::min<long>(M, lo + kChunk);
      for (long i = lo; i < hi; ++i) {
        const double u = std::exp(logw[i] - m);
        const Eigen::VectorXd x = X.row(i).transpose();
        acc.S0 += u;
        acc.Su2 += u * u;
        acc.Sx += u * x;
        acc.Sxx += u * x.cwiseProduct(x);

        const Eigen::VectorXd z = spec.make_z(x, y);
        CoefficientValues cv;
        Eigen::MatrixXd a;
        std::vector<Eigen::VectorXd> disp0, disp1, dispA;
        if (has_step) {
          cv = evaluate_coefficients(spec, t, z);
          a = 0.5 * (cv.sigma * cv.sigma.transpose() +
                     cv.rho * cv.rho.transpose());
          acc.SB += u * cv.B;
          Bbuf.row(i) = cv.B.transpose();
          for (const auto& q : spec.levy_nu0.quadrature())
            disp0.push_back(spec.jump_eta(t, z, q.mark));
          for (const auto& q : spec.levy_nu1.quadrature())
            disp1.push_back(spec.jump_xi(t, z, q.mark));
          for (int aidx : step_atoms)
            dispA.push_back(spec.jump_xi(t, z, obs.atoms1[aidx].mark));
        }

        for (int j = 0; j < nphi; ++j) {
          const double val = phis[j].value(x);
          acc.Sphi[j] += u * val;
          if (!has_step) continue;
          const Eigen::VectorXd grad = phis[j].gradient(x);
          const Eigen::MatrixXd hess = phis[j].hessian(x);
          acc.SL[j] += u * generator_apply(a, cv.b, grad, hess);
          for (int k = 0; k < dy; ++k)
            acc.SM(k, j) +=
                u * obs_operator_apply(cv.rho.col(k), cv.B[k], val, grad);
          {
            const auto& quad = spec.levy_nu0.quadrature();
            double sj = 0.0;
            for (std::size_t q = 0; q < quad.size(); ++q) {
              const double diff = phis[j].value(x + disp0[q]) - val;
              sj += quad[q].weight * (diff - disp0[q].dot(grad));
            }
            acc.SJeta[j] += u * sj;
          }
          {
            const auto& quad = spec.levy_nu1.quadrature();
            double sj = 0.0, si = 0.0;
            for (std::size_t q = 0; q < quad.size(); ++q) {
              const double diff = phis[j].value(x + disp1[q]) - val;
              si += quad[q].weight * diff;
              sj += quad[q].weight * (diff - disp1[q].dot(grad));
            }
            acc.SJxi[j] += u * sj;
            acc.SIxi[j] += u * si;
          }
          for (int aa = 0; aa < n_step_atoms; ++aa)
            acc.Satom(aa, j) += u * (phis[j].value(x + dispA[aa]) - val);
        }
      }
    });

    MeasureSums total;
    total.init(d, dy, nphi, n_step_atoms);
    for (const auto& p : partial) total.add(p);
    if (!(total.S0 > 0.0) || !std::isfinite(total.S0)) {
      std::ostringstream os;
      os << "filter degeneracy at node " << node << ": total weight "
         << total.S0;
      throw FilterDegeneracyError(os.str());
    }

    const double mu_scale = std::exp(m) / M;
    st.mu_one[node] = mu_scale * total.S0;
    st.ess_fraction[node] = total.S0 * total.S0 / total.Su2 / M;
    st.mu_phi.row(node) = mu_scale * total.Sphi.transpose();
    st.P_phi.row(node) = (total.Sphi / total.S0).transpose();
    st.post_mean.row(node) = (total.Sx / total.S0).transpose();
    st.post_var.row(node) =
        (total.Sxx / total.S0 -
         (total.Sx / total.S0).cwiseProduct(total.Sx / total.S0))
            .transpose();
    st.mu_moment1.row(node) = mu_scale * total.Sx.transpose();

    if (cfg.store_paths) {
      for (int i = 0; i < M; ++i) st.particle_paths[i].row(node) = X.row(i);
      st.log_weight_paths.col(node) = logw;
    }

    if (!has_step) break;

    st.mu_L.row(node) = mu_scale * total.SL.transpose();
    st.P_L.row(node) = (total.SL / total.S0).transpose();
    for (int k = 0; k < dy; ++k) {
      st.mu_M[k].row(node) = mu_scale * total.SM.row(k);
      st.P_M[k].row(node) = total.SM.row(k) / total.S0;
    }
    st.mu_Jeta.row(node) = mu_scale * total.SJeta.transpose();
    st.mu_Jxi.row(node) = mu_scale * total.SJxi.transpose();
    st.mu_Ixi.row(node) = mu_scale * total.SIxi.transpose();
    st.P_Jeta.row(node) = (total.SJeta / total.S0).transpose();
    st.P_Jxi.row(node) = (total.SJxi / total.S0).transpose();
    st.P_Ixi.row(node) = (total.SIxi / total.S0).transpose();
    st.mu_B.row(node) = mu_scale * total.SB.transpose();
    st.P_B.row(node) = (total.SB / total.S0).transpose();
    for (int aa = 0; aa < n_step_atoms; ++aa) {
      st.atom_mu_I.row(step_atoms[aa]) = mu_scale * total.Satom.row(aa);
      st.atom_P_I.row(step_atoms[aa]) = total.Satom.row(aa) / total.S0;
    }

    // Innovation increment with the predictable filtered drift.
    st.innovation.dVbar.row(node) =
        obs.dVtilde.row(node) - dt * st.P_B.row(node);

    // Advance: inverse-likelihood weight update, then the reference-measure
    // Euler step with the particle's own (W, N0) and the shared (V~, N1).
    const Eigen::VectorXd dVt = obs.dVtilde.row(node).transpose();
    parallel_for(M, cfg.worker_count, [&](long i) {
      const Eigen::VectorXd B = Bbuf.row(i).transpose();
      logw[i] += B.dot(dVt) - 0.5 * B.squaredNorm() * dt;

      auto& rng = prng[i];
      Eigen::VectorXd dW(spec.dim_w);
      const double sdt = std::sqrt(dt);
      for (int k = 0; k < spec.dim_w; ++k) dW[k] = sdt * rng.normal();

      std::vector<JumpAtom> own;
      if (nu0_mass > 0.0) {
        const long cnt = rng.poisson(nu0_mass * dt);
        for (long q = 0; q < cnt; ++q) {
          JumpAtom atom;
          atom.time = t + rng.uniform() * dt;
          atom.mark = spec.levy_nu0.sample_mark(rng);
          atom.step = node;
          own.push_back(std::move(atom));
        }
      }
      std::vector<TaggedJump> jumps;
      for (int aidx : step_atoms)
        jumps.push_back(
            {obs.atoms1[aidx].time, &obs.atoms1[aidx].mark, JumpKind::Xi});
      for (const auto& atom : own)
        jumps.push_back({atom.time, &atom.mark, JumpKind::Eta});
      std::sort(jumps.begin(), jumps.end(),
                [](const TaggedJump& a, const TaggedJump& b) {
                  return a.time < b.time;
                });

      X.row(i) = q_signal_euler_step(spec, t, dt, X.row(i).transpose(), y,
                                     dVt, dW, jumps, cfg.jump_adapted)
                     .transpose();
    });

    // Resample on low effective sample size (fkk mode only). Weights reset
    // to their mean, which leaves mu(1) unchanged.
    if (cfg.mode == FilterMode::Fkk && cfg.resampling != ResamplingKind::None) {
      const double m2 = max_finite_or_throw(logw, node + 1);
      double s = 0.0, s2 = 0.0;
      Eigen::VectorXd u(M);
      for (int i = 0; i < M; ++i) {
        u[i] = std::exp(logw[i] - m2);
        s += u[i];
        s2 += u[i] * u[i];
      }
      if (s * s / s2 < cfg.resample_threshold * M) {
        const auto idx = resample_indices(cfg.resampling, u / s, control);
        Eigen::MatrixXd Xn(M, d);
        for (int j = 0; j < M; ++j) Xn.row(j) = X.row(idx[j]);
        X = std::move(Xn);
        logw.setConstant(m2 + std::log(s / M));
        st.resampled[node + 1] = 1;
      }
    }
  }

  st.final_particles = X;
  st.final_log_weights = logw;
  return st;
}

namespace {

ResidualStats residual_impl(const FilterRunStats& st, int j, bool normalized) {
  for (char c : st.resampled)
    if (c)
      throw std::logic_error(
          "residuals need a run without resampling: resampling breaks the "
          "weighted measure the equation describes");
  const int n = st.grid.n_steps;
  const double dt = st.grid.dt();
  const int dy = static_cast<int>(st.mu_B.cols());
  const auto& phi_node = normalized ? st.P_phi : st.mu_phi;

  ResidualStats rs;
  rs.residual.setZero(n + 1);
  double cum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double drift =
        (normalized ? st.P_L(i, j) : st.mu_L(i, j)) * dt +
        (normalized ? st.P_Jeta(i, j) : st.mu_Jeta(i, j)) * dt +
        (normalized ? st.P_Jxi(i, j) : st.mu_Jxi(i, j)) * dt -
        (normalized ? st.P_Ixi(i, j) : st.mu_Ixi(i, j)) * dt;
    double mart = 0.0;
    for (int k = 0; k < dy; ++k) {
      if (normalized) {
        const double gain = st.P_M[k](i, j) - st.P_phi(i, j) * st.P_B(i, k);
        mart += gain * st.innovation.dVbar(i, k);
      } else {
        mart += st.mu_M[k](i, j) * st.dVtilde(i, k);
      }
    }
    double jump = 0.0;
    for (std::size_t a = 0; a < st.atom_step.size(); ++a)
      if (st.atom_step[a] == i)
        jump += normalized ? st.atom_P_I(a, j) : st.atom_mu_I(a, j);

    cum += drift + mart + jump;
    rs.residual[i + 1] = phi_node(i + 1, j) - phi_node(0, j) - cum;
    rs.drift_total += std::abs(drift);
    rs.martingale_total += std::abs(mart);
    rs.jump_total += std::abs(jump);
  }
  rs.max_abs = rs.residual.cwiseAbs().maxCoeff();
  return rs;
}

}  // namespace

ResidualStats zakai_residual(const FilterRunStats& stats, int phi_index) {
  return residual_impl(stats, phi_index, false);
}

ResidualStats fkk_residual(const FilterRunStats& stats, int phi_index) {
  return residual_impl(stats, phi_index, true);
}

InnovationReport innovation_diagnostics(const InnovationPath& innovation,
                                        double T) {
  const int n = static_cast<int>(innovation.dVbar.rows());
  const int dy = static_cast<int>(innovation.dVbar.cols());
  InnovationReport rep;
  rep.n_steps = n;
  rep.qv_ratio.setZero(dy);
  rep.autocorr1.setZero(dy);
  if (n < 2 || T <= 0.0) return rep;

  for (int k = 0; k < dy; ++k) {
    const Eigen::VectorXd e = innovation.dVbar.col(k);
    rep.qv_ratio[k] = e.squaredNorm() / T;
    const double mean = e.mean();
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = e[i] - mean;
      den += c * c;
      if (i + 1 < n) num += c * (e[i + 1] - mean);
    }
    rep.autocorr1[k] = den > 0.0 ? num / den : 0.0;
  }
  rep.pass = true;
  const double ac_bound = 3.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < dy; ++k) {
    if (std::abs(rep.qv_ratio[k] - 1.0) > 0.05) rep.pass = false;
    if (std::abs(rep.autocorr1[k]) > ac_bound) rep.pass = false;
  }
  return rep;
}

}  // namespace jdf
