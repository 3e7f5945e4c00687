#include "jdfilter/projection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jdf {

namespace {

int clamp_bin(double v, double lo, double hi, int bins) {
  if (v <= lo) return 0;
  if (v >= hi) return bins - 1;
  return std::min(bins - 1,
                  static_cast<int>((v - lo) / (hi - lo) * bins));
}

// Shared integrand family of the shipped fixtures:
//   xi_0 = 0.7 (deterministic),
//   xi_1 = (tanh(W^1_{t1}) + 0.5 min(N_1(0,t1], 2)) * (1 + sign(U)),
// with U an independent auxiliary, so the projection drops the sign factor.
double shipped_xi(int i, const FixtureDraw& d) {
  if (i == 0) return 0.7;
  const double base =
      std::tanh(d.w1[1]) + 0.5 * std::min<long>(d.n1_cum[1], 2);
  return base * (1.0 + (d.aux[1] >= 0.0 ? 1.0 : -1.0));
}

double shipped_xi_hat(int i, const FixtureDraw& d) {
  if (i == 0) return 0.7;
  return std::tanh(d.w1[1]) + 0.5 * std::min<long>(d.n1_cum[1], 2);
}

SimpleProcessFixture shipped_base(const std::string& name, IntegralType type) {
  SimpleProcessFixture f;
  f.name = name;
  f.type = type;
  f.partition = {0.0, 0.4, 1.0};
  f.bound = 4.0;
  f.xi = shipped_xi;
  f.xi_hat = shipped_xi_hat;
  f.features = [](const FixtureDraw& d) {
    Eigen::VectorXd v(3);
    v << d.w1[1], d.w1[2] - d.w1[1],
        static_cast<double>(std::min<long>(d.n1_cum[1], 2));
    return v;
  };
  f.feature_bins = {4, 4, 3};
  f.feature_ranges = {{-1.6, 1.6}, {-2.0, 2.0}, {-0.5, 2.5}};
  return f;
}

}  // namespace

std::vector<SimpleProcessFixture> shipped_fixtures() {
  return {shipped_base("w1_anchor", IntegralType::ItoW1),
          shipped_base("w0_null", IntegralType::ItoW0),
          shipped_base("n0_null", IntegralType::PoissonN0)};
}

SimpleProcessFixture lebesgue_fixture() {
  SimpleProcessFixture f = shipped_base("lebesgue", IntegralType::Lebesgue);
  return f;
}

SimpleProcessFixture poisson_n1_fixture() {
  SimpleProcessFixture f = shipped_base("n1_anchor", IntegralType::PoissonN1);
  return f;
}

ProjectionReport projection_theorem_test(const SimpleProcessFixture& fixture,
                                         int n_mc, std::uint64_t seed) {
  const int k = static_cast<int>(fixture.partition.size()) - 1;
  if (k < 1) throw std::invalid_argument("projection: empty partition");
  const int n_features = static_cast<int>(fixture.feature_bins.size());
  int n_flat = 1;
  for (int b : fixture.feature_bins) n_flat *= b;

  std::vector<long> count(n_flat, 0);
  std::vector<double> sum(n_flat, 0.0), sum2(n_flat, 0.0);

  RngStream rng(seed, substream(7, 0));
  FixtureDraw d;
  d.w1.resize(k + 1);
  d.n1_cum.resize(k + 1);
  d.aux.resize(k + 1);

  for (int r = 0; r < n_mc; ++r) {
    d.w1[0] = 0.0;
    d.n1_cum[0] = 0;
    for (int i = 0; i < k; ++i) {
      const double len = fixture.partition[i + 1] - fixture.partition[i];
      d.w1[i + 1] = d.w1[i] + std::sqrt(len) * rng.normal();
      d.n1_cum[i + 1] = d.n1_cum[i] + rng.poisson(fixture.nu1_mass * len);
      d.aux[i + 1] = 2.0 * rng.uniform() - 1.0;
    }
    d.aux[0] = 2.0 * rng.uniform() - 1.0;

    double integral = 0.0, projected = 0.0;
    for (int i = 0; i < k; ++i) {
      const double len = fixture.partition[i + 1] - fixture.partition[i];
      const double xi = fixture.xi(i, d);
      const double xh = fixture.xi_hat(i, d);
      switch (fixture.type) {
        case IntegralType::Lebesgue:
          integral += xi * len;
          projected += xh * len;
          break;
        case IntegralType::ItoW1: {
          const double dw = d.w1[i + 1] - d.w1[i];
          integral += xi * dw;
          projected += xh * dw;
          break;
        }
        case IntegralType::ItoW0: {
          const double dw0 = std::sqrt(len) * rng.normal();
          integral += xi * dw0;
          break;  // the projection of a W^0 integral vanishes
        }
        case IntegralType::PoissonN0: {
          const long dn0 = rng.poisson(fixture.nu0_mass * len);
          integral += xi * (dn0 - fixture.nu0_mass * len);
          break;  // compensated N0 projects to zero as well
        }
        case IntegralType::PoissonN1: {
          const long dn1 = d.n1_cum[i + 1] - d.n1_cum[i];
          const double compensated = dn1 - fixture.nu1_mass * len;
          integral += xi * compensated;
          projected += xh * compensated;
          break;
        }
      }
    }

    const Eigen::VectorXd feat = fixture.features(d);
    int flat = 0;
    for (int f = 0; f < n_features; ++f) {
      flat = flat * fixture.feature_bins[f] +
             clamp_bin(feat[f], fixture.feature_ranges[f].first,
                       fixture.feature_ranges[f].second,
                       fixture.feature_bins[f]);
    }
    const double diff = integral - projected;
    count[flat] += 1;
    sum[flat] += diff;
    sum2[flat] += diff * diff;
  }

  ProjectionReport rep;
  rep.fixture = fixture.name;
  rep.n_mc = n_mc;
  rep.pass = true;
  for (int b = 0; b < n_flat; ++b) {
    if (count[b] == 0) continue;
    if (count[b] < 30) {
      ++rep.n_starved;
      continue;
    }
    ++rep.n_bins_used;
    const double mean = sum[b] / count[b];
    const double var =
        std::max(0.0, sum2[b] / count[b] - mean * mean);
    const double se = std::sqrt(var / count[b]);
    const double z = se > 0.0 ? std::abs(mean) / se : (mean == 0.0 ? 0.0 : 1e9);
    rep.max_abs_z = std::max(rep.max_abs_z, z);
    rep.max_abs_mean = std::max(rep.max_abs_mean, std::abs(mean));
    if (z > 3.0) rep.pass = false;
  }
  return rep;
}

}  // namespace jdf
