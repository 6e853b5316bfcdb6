#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "radlab/linear_wave.hpp"

using namespace radlab;

namespace {

// n = 3, l = 0 d'Alembert solution for U = r u with odd extensions of U0, U1
struct DAlembert3 {
  std::function<double(double)> U0, U1;  // on r >= 0
  double odd0(double s) const { return s >= 0 ? U0(s) : -U0(-s); }
  double odd1(double s) const { return s >= 0 ? U1(s) : -U1(-s); }
  double integral1(double a, double b) const {
    if (a >= b) return 0;
    auto f = [&](double s) { return odd1(s); };
    // split at 0 where the odd extension has a kink in its derivative
    if (a < 0 && b > 0)
      return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, 0, 15, 1e-14) +
             boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0, b, 15, 1e-14);
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
  }
  double U(double t, double r) const { return 0.5 * (odd0(r + t) + odd0(r - t)) + 0.5 * integral1(r - t, r + t); }
  // u~ at null infinity: U0(-tau)/2 + (1/2) int_{-tau}^{inf} U1
  double scri(double tau, double Rsup) const { return 0.5 * odd0(-tau) + 0.5 * integral1(-tau, Rsup); }
};

CauchyModeData bump_data(int n, int l, double a0, double a1) {
  return make_mode_data(
      n, l, 3.0, [&](double r) { return a0 * std::pow(r, l) * bump((r - 1.5) / 1.2); },
      [&](double r) { return a1 * std::pow(r, l) * bump((r - 1.2) / 1.0); });
}

CauchyModeData gauss_data(double c0, double c1, double w) {
  return make_mode_data(
      3, 0, 8.0, [&](double r) { return c0 * std::exp(-r * r / (w * w)); },
      [&](double r) { return c1 * std::exp(-(r * r) / (w * w)) * (1 - r * r / 4); }, 1e-3);
}

}  // namespace

// ---- spherical harmonics -------------------------------------------------------

TEST(Decompose, RadialGaussianIsPureMonopole) {
  auto g = SphericalGrid::make(0.1, 30, 10, 19);
  g.fill([](double x, double y, double z) { return std::exp(-(x * x + y * y + z * z)); });
  const auto D = decompose_modes(g, 4);
  for (const auto& m : D.modes) {
    double mx = 0;
    for (double c : m.c) mx = std::max(mx, std::abs(c));
    if (m.l == 0) EXPECT_GT(mx, 1.0);
    else EXPECT_LE(mx, 1e-12) << m.l << " " << m.m;
  }
}

TEST(Decompose, X1GaussianIsDipole) {
  auto g = SphericalGrid::make(0.1, 30, 10, 19);
  g.fill([](double x, double y, double z) { return x * std::exp(-(x * x + y * y + z * z)); });
  const auto D = decompose_modes(g, 4);
  for (const auto& m : D.modes) {
    double mx = 0;
    for (double c : m.c) mx = std::max(mx, std::abs(c));
    if (m.l == 1 && m.m == 1) EXPECT_GT(mx, 0.1);
    else EXPECT_LE(mx, 1e-12) << m.l << " " << m.m;
  }
}

TEST(Decompose, BandLimitedRoundtrip) {
  Rng rng(7);
  auto g = SphericalGrid::make(0.2, 12, 8, 15);
  std::vector<std::tuple<int, int, double, double>> terms;
  for (int l = 0; l <= 5; ++l)
    for (int m = -l; m <= l; ++m) terms.emplace_back(l, m, rng.normal(), rng.uniform(0.5, 2));
  for (std::size_t k = 0; k < g.Nr; ++k)
    for (std::size_t a = 0; a < g.Nth; ++a)
      for (std::size_t b = 0; b < g.Nph; ++b) {
        double s = 0;
        for (auto [l, m, c, w] : terms) s += c * std::exp(-g.r(k) / w) * real_ylm(l, m, g.theta(a), g.phi(b));
        g.at(k, a, b) = s;
      }
  const auto D = decompose_modes(g, 5);
  EXPECT_LE(D.recon_rel_err, 1e-10);
}

TEST(Decompose, AliasRisk) {
  auto g = SphericalGrid::make(0.1, 4, 4, 7);
  try {
    decompose_modes(g, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AliasRisk);
  }
}

// ---- Cartesian path ------------------------------------------------------------------

TEST(Cartesian, ZeroDataZeroTrajectory) {
  auto d = make_mode_data(3, 2, 2.0, [](double) { return 0.0; }, [](double) { return 0.0; });
  double mx = 0;
  evolve_mode_cartesian(d, 5.0, {}, [&](std::size_t, double, const Vec& U) {
    for (double x : U) mx = std::max(mx, std::abs(x));
  });
  EXPECT_EQ(mx, 0.0);
}

TEST(Cartesian, DAlembertOracle) {
  auto d = make_mode_data(3, 0, 3.0, [](double) { return 0.0; }, [](double r) { return bump((r - 1.5) / 1.0); });
  DAlembert3 A{[&](double r) { return d.U0(r); }, [&](double r) { return d.U1(r); }};
  const double T = 4.0;
  Vec num, ref;
  auto S = evolve_mode_cartesian(d, T, CartesianOptions{0.01, 1.0, 0}, [&](std::size_t, double t, const Vec& U) {
    if (std::abs(t - T) > 1e-9) return;
    for (std::size_t j = 0; j < U.size(); j += 7) {
      num.push_back(U[j]);
      ref.push_back(A.U(T, 0.01 * static_cast<double>(j)));
    }
  });
  ASSERT_FALSE(num.empty());
  EXPECT_LE(rel_l2(num, ref), 1e-6);
  EXPECT_LE(S.drift, 1e-8);
}

TEST(Cartesian, EnergyConservation) {
  for (int l : {0, 1, 3}) {
    auto d = bump_data(3, l, 1.0, 0.5);
    auto S = evolve_mode_cartesian(d, 20.0, CartesianOptions{0.02, 0.9, 0}, [](std::size_t, double, const Vec&) {});
    EXPECT_LE(S.drift, 1e-8) << "l=" << l;
  }
}

TEST(Cartesian, Errors) {
  auto d = bump_data(3, 0, 1, 0);
  try {
    evolve_mode_cartesian(d, 1.0, CartesianOptions{0.02, 1.2, 0}, [](std::size_t, double, const Vec&) {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CFLViolation);
  }
  try {
    evolve_mode_cartesian(d, 10.0, CartesianOptions{0.02, 1.0, 5.0}, [](std::size_t, double, const Vec&) {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BoundaryContamination);
  }
}

// ---- compactified path --------------------------------------------------------------

TEST(Compactified, ZeroDataZeroGrid) {
  auto d = make_mode_data(3, 1, 2.0, [](double) { return 0.0; }, [](double) { return 0.0; });
  const auto L = evolve_mode_compactified(d, {});
  for (double x : L.U) {
    if (!std::isnan(x)) {
      ASSERT_EQ(x, 0.0);
    }
  }
}

TEST(Compactified, MatchesCartesianOnOverlap) {
  auto d = bump_data(3, 0, 1.0, 0.7);
  CompactOptions co;
  co.h = 0.01;
  co.u_max = 6;
  const auto L = evolve_mode_compactified(d, co);
  const double T = 5.0;
  Vec a, b;
  evolve_mode_cartesian(d, T, CartesianOptions{0.01, 1.0, 0}, [&](std::size_t, double t, const Vec& U) {
    if (std::abs(t - T) > 1e-9) return;
    for (std::size_t j = 1; j < U.size(); j += 5) {
      a.push_back(U[j]);
      b.push_back(L.sample_tr(T, 0.01 * static_cast<double>(j)));
    }
  });
  EXPECT_LE(rel_l2(b, a), 1e-3);
}

TEST(Compactified, ScriValuesMatchDAlembertLimit) {
  auto d = bump_data(3, 0, 1.0, 0.7);
  DAlembert3 A{[&](double r) { return d.U0(r); }, [&](double r) { return d.U1(r); }};
  CompactOptions co;
  co.h = 0.02;
  const auto L = evolve_mode_compactified(d, co);
  Vec a, b;
  for (std::size_t i = 0; i < L.Nu; ++i) {
    a.push_back(L(i, L.scri()));
    b.push_back(A.scri(L.u(i), d.R));
  }
  EXPECT_LE(rel_l2(a, b), 1e-3);
}

TEST(Compactified, ChartSamplingReachesScri) {
  auto d = bump_data(3, 1, 1.0, 0.5);
  CompactOptions co;
  co.h = 0.02;
  co.u_max = 4;
  const auto L = evolve_mode_compactified(d, co);
  const auto g = lattice_to_chart(L, Chart::Omega3, uniform_axis("tau", -2, 2, 41), uniform_axis("rho", 0, 0.05, 11));
  for (std::size_t i = 0; i < g.N1(); ++i) EXPECT_NEAR(g(i, 0), L.sample_uy(g.q1(i), 2 * L.V1()), 1e-12);
}

// ---- radiation field ----------------------------------------------------------------

TEST(Radiation, ZeroDataZeroField) {
  auto d = make_mode_data(3, 0, 2.0, [](double) { return 0.0; }, [](double) { return 0.0; });
  for (auto m : {RadMethod::CartesianLimit, RadMethod::Compactified}) {
    const auto R = radiation_field(d, m);
    for (double x : R.modes[0].values) EXPECT_EQ(x, 0.0);
  }
}

TEST(Radiation, StrongHuygensSupport) {
  auto d = bump_data(3, 0, 1.0, 0.7);  // supported in r < 2.7
  RadiationOptions o;
  o.tau_min = -6;
  o.tau_max = 6;
  o.h = o.dr = 0.01;
  for (auto m : {RadMethod::CartesianLimit, RadMethod::Compactified}) {
    const auto R = radiation_field(d, m, o);
    double inside = 0, tail = 0;
    for (std::size_t k = 0; k < R.Ntau; ++k) {
      const double t = R.tau(k), v = std::abs(R.modes[0].values[k]);
      if (std::abs(t) <= 2.7 + 2 * R.dtau) inside = std::max(inside, v);
      else tail = std::max(tail, v);
    }
    EXPECT_GT(inside, 0.1);
    EXPECT_LE(tail, 1e-6 * inside);
  }
}

TEST(Radiation, Linearity) {
  auto d = bump_data(3, 1, 1.0, 0.5);
  auto d2 = bump_data(3, 1, 2.0, 1.0);
  for (auto m : {RadMethod::CartesianLimit, RadMethod::Compactified}) {
    const auto a = radiation_field(d, m), b = radiation_field(d2, m);
    for (std::size_t k = 0; k < a.Ntau; ++k)
      EXPECT_NEAR(b.modes[0].values[k], 2 * a.modes[0].values[k], 1e-12 * (1 + std::abs(b.modes[0].values[k])));
  }
}

TEST(Radiation, TwoPathAgreement) {
  RadiationOptions o;
  o.h = o.dr = 0.005;
  for (int l : {0, 1, 2}) {
    auto d = bump_data(3, l, 1.0, 0.6);
    const auto A = radiation_field(d, RadMethod::CartesianLimit, o);
    const auto B = radiation_field(d, RadMethod::Compactified, o);
    EXPECT_LE(radiation_rel_l2(A, B), 1e-3) << "l=" << l;
  }
}

TEST(Radiation, ModeOrthogonality) {
  SphericalData data{{0, bump_data(3, 0, 1, 0.3)}, {-1, bump_data(3, 1, 0.5, 0.2)}, {2, bump_data(3, 2, 0.2, 0.1)}};
  const auto R = radiation_field(data, RadMethod::Compactified);
  double s = 0;
  for (const auto& c : data) s += radiation_field(c.d, RadMethod::Compactified).norm2();
  EXPECT_NEAR(R.norm2(), s, 1e-12 * s);
}

TEST(Radiation, TimeReversalMirror) {
  for (int l : {0, 1, 2}) {
    auto d = bump_data(3, l, 1.0, 0.0);
    RadiationOptions o;
    o.h = 0.005;
    const auto P = radiation_field(d, RadMethod::Compactified, o);
    const auto M = past_radiation_field(d, RadMethod::Compactified, o);
    // R-(-tau) = -R+(tau), exact since the reversed data coincide
    for (std::size_t k = 0; k < P.Ntau; ++k)
      EXPECT_NEAR(M.sample(0, -P.tau(k)), -P.modes[0].values[k], 1e-12);
    // and R+ has parity (-1)^l in tau for data (u0, 0) in n = 3
    Vec a, b;
    for (std::size_t k = 0; k < P.Ntau; ++k) {
      a.push_back(P.modes[0].values[k]);
      b.push_back((l % 2 ? -1 : 1) * P.sample(0, -P.tau(k)));
    }
    EXPECT_LE(rel_l2(a, b), 1e-3) << "l=" << l;
  }
}

TEST(Radiation, ExtrapolationNotConverged) {
  auto d = bump_data(3, 4, 1.0, 0.0);
  RadiationOptions o;
  o.r_ext = 12;
  o.tau_min = -3;
  o.tau_max = 3;
  o.converge_tol = 1e-6;
  try {
    radiation_field(d, RadMethod::CartesianLimit, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NotConverged);
  }
}

// ---- isometry ---------------------------------------------------------------------------

TEST(Isometry, ZeroDataIsDegenerate) {
  auto d = make_mode_data(3, 0, 2.0, [](double) { return 0.0; }, [](double) { return 0.0; });
  try {
    isometry_check({SphericalData{{0, d}}}, RadMethod::Compactified);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateData);
  }
}

TEST(Isometry, Homogeneity) {
  auto a = isometry_check({SphericalData{{0, bump_data(3, 1, 1, 0.5)}}}, RadMethod::Compactified);
  auto b = isometry_check({SphericalData{{0, bump_data(3, 1, 2, 1.0)}}}, RadMethod::Compactified);
  EXPECT_NEAR(a.kappa[0], b.kappa[0], 1e-12);
}

TEST(Isometry, RandomDataConstantRatio) {
  Rng rng(11);
  std::vector<SphericalData> samples;
  for (int s = 0; s < 20; ++s) {
    SphericalData D;
    for (int l = 0; l <= 4; ++l) {
      const double c0 = rng.normal(), c1 = rng.normal(), ctr = rng.uniform(1.0, 2.0), w = rng.uniform(0.6, 1.0);
      auto d = make_mode_data(3, l, ctr + w, [&](double r) { return c0 * std::pow(r, l) * bump((r - ctr) / w); },
                              [&](double r) { return c1 * std::pow(r, l) * bump((r - ctr) / w); });
      D.push_back({rng.uniform() < 0.5 ? l : -l, std::move(d)});
    }
    samples.push_back(std::move(D));
  }
  RadiationOptions o;
  o.h = 0.01;
  o.tau_min = -4;
  o.tau_max = 4;
  const auto S = isometry_check(samples, RadMethod::Compactified, o);
  EXPECT_LE(S.cv, 1e-3);
  RecordProperty("kappa_mean", std::to_string(S.mean));
}

// ---- inversion --------------------------------------------------------------------------

TEST(Inversion, ZeroFieldZeroData) {
  RadiationField R;
  R.n = 3;
  R.tau0 = -3;
  R.dtau = 0.01;
  R.Ntau = 601;
  R.modes.push_back({0, 0, Vec(601, 0.0)});
  const auto d = invert_radial_n3(R);
  for (std::size_t j = 0; j < d.u0.size(); ++j) {
    EXPECT_EQ(d.u0[j], 0.0);
    EXPECT_EQ(d.u1[j], 0.0);
  }
}

namespace {
// closed-form radiation field of Gaussian-type data: R(tau) = (U1(-tau) - U0'(-tau)) / 2 (odd extensions)
RadiationField oracle_field(const CauchyModeData& d, double T, double dt, double shift = 0) {
  RadiationField R;
  R.n = 3;
  R.tau0 = -T;
  R.dtau = dt;
  R.Ntau = static_cast<std::size_t>(std::llround(2 * T / dt)) + 1;
  RadiationMode M;
  for (std::size_t k = 0; k < R.Ntau; ++k) {
    const double s = -(R.tau(k) - shift);
    const double U1 = s >= 0 ? d.U1(s) : -d.U1(-s);
    const double dU0 = d.U0(std::abs(s), 1);  // U0' is even
    M.values.push_back(0.5 * (U1 - dU0));
  }
  R.modes.push_back(std::move(M));
  return R;
}
}  // namespace

TEST(Inversion, RoundtripGaussian) {
  const auto d = gauss_data(1.0, 0.8, 1.2);
  const auto R = oracle_field(d, 7.0, 0.005);
  const auto e = invert_radial_n3(R);
  RadiationOptions o;
  o.h = 0.005;
  o.tau_min = -7;
  o.tau_max = 7;
  const auto R2 = radiation_field(e, RadMethod::Compactified, o);
  EXPECT_LE(radiation_rel_l2(R, R2), 1e-6);
}

TEST(Inversion, ShiftIsTimeTranslation) {
  // inverting R(tau + c) gives the data of the same solution at time c
  const auto d = gauss_data(1.0, 0.0, 1.0);
  const double c = 1.0;
  const auto e = invert_radial_n3(oracle_field(d, 8.0, 0.005, -c));
  Vec U, Ut, Ue, Ute;
  const double dr = 0.005;
  Vec prev, cur;
  evolve_mode_cartesian(d, c + dr, CartesianOptions{dr, 1.0, 0}, [&](std::size_t s, double, const Vec& W) {
    const auto target = static_cast<std::size_t>(std::llround(c / dr));
    if (s == target - 1) prev = W;
    if (s == target) cur = W;
    if (s == target + 1)
      for (std::size_t j = 20; j < 1000; j += 10) {
        const double r = dr * static_cast<double>(j);
        U.push_back(cur[j]);
        Ut.push_back((W[j] - prev[j]) / (2 * dr));
        Ue.push_back(e.U0(r));
        Ute.push_back(e.U1(r));
      }
  });
  ASSERT_FALSE(U.empty());
  EXPECT_LE(rel_l2(Ue, U), 1e-4);
  EXPECT_LE(rel_l2(Ute, Ut), 1e-4);
}

TEST(Inversion, NonDecaying) {
  RadiationField R;
  R.n = 3;
  R.tau0 = -1;
  R.dtau = 0.1;
  R.Ntau = 21;
  R.modes.push_back({0, 0, Vec(21, 1.0)});
  try {
    invert_radial_n3(R);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonDecaying);
  }
}

// ---- Hoelder fit -----------------------------------------------------------------------

TEST(Holder, ConstantIsExact) {
  auto g = ModeGrid::sample(Chart::Omega3, 3, 0, uniform_axis("tau", -1, 1, 11), uniform_axis("rho", 0, 0.1, 21),
                            [](double, double) { return 2.0; });
  EXPECT_TRUE(holder_fit(g).exact);
}

TEST(Holder, SmoothLinearRunIsLipschitz) {
  auto d = bump_data(3, 1, 1.0, 0.5);
  CompactOptions co;
  co.h = 0.01;
  co.u_max = 4;
  const auto L = evolve_mode_compactified(d, co);
  const auto g = lattice_to_chart(L, Chart::Omega3, uniform_axis("tau", -2, 2, 81), uniform_axis("rho", 0, 0.02, 41));
  const auto H = holder_fit(g, 1.0);
  EXPECT_FALSE(H.exact);
  EXPECT_GE(H.slope, 0.95);
}

TEST(Holder, InsufficientResolution) {
  auto g = ModeGrid::sample(Chart::Omega3, 3, 0, uniform_axis("tau", -1, 1, 11), uniform_axis("rho", 0, 0.1, 5),
                            [](double, double r) { return r; });
  try {
    holder_fit(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientResolution);
  }
}

// ---- field files ---------------------------------------------------------------------------

TEST(FieldFile, RoundtripLatticeSample) {
  auto d = bump_data(3, 0, 1.0, 0.5);
  const auto L = evolve_mode_compactified(d, {});
  const auto g = lattice_to_chart(L, Chart::Omega3, uniform_axis("tau", -2, 2, 17), uniform_axis("rho", 0, 0.5, 9));
  std::stringstream ss;
  write_field(ss, g);
  const auto h = read_field(ss);
  ASSERT_EQ(h.v.size(), g.v.size());
  for (std::size_t k = 0; k < g.v.size(); ++k) EXPECT_EQ(h.v[k], g.v[k]);
}
