#include <gtest/gtest.h>

#include <sstream>

#include "radlab/semilinear.hpp"

using namespace radlab;

namespace {

ModelSpec spec(double eps, double h = 0.05) {
  ModelSpec s;
  s.eps = eps;
  s.h = h;
  return s;
}

double lattice_norm(const NullLattice& L) {
  double s = 0;
  for (double x : L.U)
    if (std::isfinite(x)) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Semilinear, ZeroEpsilonIsZero) {
  const auto s = spec(0.0);
  const auto L = evolve_semilinear(s, model_data(s));
  for (double x : L.U) {
    if (std::isfinite(x)) {
      ASSERT_EQ(x, 0.0);
    }
  }
}

TEST(Semilinear, DataNormalisedToEpsilon) {
  const auto s = spec(2e-3);
  const auto d = model_data(s);
  EXPECT_NEAR(initial_M(d, s.delta, s.gamma0(1)), 2e-3, 1e-15);
}

TEST(Semilinear, QuadraticResponse) {
  Vec le, ld;
  for (double e : {1e-1, 1e-2, 1e-3}) {
    const auto a = spec(e), b = spec(2 * e);
    const auto La = evolve_semilinear(a, model_data(a)), Lb = evolve_semilinear(b, model_data(b));
    NullLattice D = Lb;
    for (std::size_t k = 0; k < D.U.size(); ++k) D.U[k] = Lb.U[k] - 2 * La.U[k];
    le.push_back(std::log(e));
    ld.push_back(std::log(lattice_norm(D)));
  }
  const double slope = fit_line(le, ld).slope;
  EXPECT_GE(slope, 1.9);
  EXPECT_LE(slope, 2.1);
}

TEST(Semilinear, LargeDataBlowsUp) {
  // threshold of the standard datum is eps ~ 1.1e3 in these units (both resolutions)
  for (double h : {0.05, 0.025}) {
    const auto s = spec(1e4, h);
    try {
      evolve_semilinear(s, model_data(s));
      FAIL() << "h=" << h;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::BlowupDetected);
    }
  }
  const auto s = spec(10.0);
  EXPECT_NO_THROW(evolve_semilinear(s, model_data(s)));
}

TEST(Semilinear, BadSpec) {
  auto s = spec(1e-3);
  s.dp = 0.3;
  EXPECT_THROW(validate(s), Error);
  s = spec(1e-3);
  s.R = 5;
  EXPECT_THROW(validate(s), Error);
}

// ---- Picard -----------------------------------------------------------------------------

TEST(Picard, IterateZeroIsLinearSolution) {
  const auto s = spec(1e-3);
  const auto d = model_data(s);
  const auto P = picard_step(s, d, nullptr);
  const auto L = evolve_mode_compactified(d, s.lattice());
  ASSERT_EQ(P.U.size(), L.U.size());
  for (std::size_t k = 0; k < P.U.size(); ++k) {
    if (std::isfinite(L.U[k])) {
      ASSERT_EQ(P.U[k], L.U[k]);
    }
  }
}

TEST(Picard, ZeroDataZeroDifferences) {
  const auto s = spec(0.0);
  const auto R = picard_iterate(s, model_data(s), 3);
  for (const auto& st : R.states) EXPECT_EQ(st.mu, 0.0);
}

TEST(Picard, ContractsAndConvergesToDirectSolve) {
  for (double h : {0.05, 0.025}) {
    const auto s = spec(1e-3, h);
    const auto d = model_data(s);
    const auto R = picard_iterate(s, d, 5);
    // at this size the differences reach roundoff after two iterates
    for (int l = 1; l <= 5; ++l) EXPECT_TRUE(R.states[l].ratio <= 0.5 || R.states[l].at_roundoff) << "h=" << h << " l=" << l;
    EXPECT_FALSE(R.states[1].at_roundoff);
    const auto D = evolve_semilinear(s, d);
    EXPECT_LE(lattice_rel_l2(R.last, D), 1e-6) << "h=" << h;
  }
}

TEST(Picard, ContractionVisibleAtLargerAmplitude) {
  for (double eps : {100.0, 500.0}) {
    const auto s = spec(eps);
    const auto R = picard_iterate(s, model_data(s), 5);
    for (int l = 1; l <= 5; ++l) {
      EXPECT_FALSE(R.states[l].at_roundoff);
      EXPECT_LE(R.states[l].ratio, 0.5) << "eps=" << eps << " l=" << l;
    }
  }
}

// ---- energies ---------------------------------------------------------------------------

TEST(Energy, ZeroGridZeroEnergy) {
  const auto s = spec(0.0);
  const auto L = evolve_semilinear(s, model_data(s));
  for (int dom : {1, 2, 3}) {
    const auto rep = weighted_energy_M(energy_grid(L, dom, s), dom, 2, s.delta, s);
    for (int n = 0; n < 3; ++n)
      for (double m : rep.M[n]) EXPECT_EQ(m, 0.0);
  }
}

TEST(Energy, HomogeneousOfDegreeOne) {
  const auto s = spec(1e-3);
  const auto L = evolve_mode_compactified(model_data(s), s.lattice());
  for (int dom : {1, 2, 3}) {
    auto g = energy_grid(L, dom, s);
    const auto a = weighted_energy_M(g, dom, 1, s.delta, s);
    for (double& x : g.v) x *= 3;
    const auto b = weighted_energy_M(g, dom, 1, s.delta, s);
    for (int n = 0; n <= 1; ++n)
      for (std::size_t k = 0; k < a.t.size(); ++k) EXPECT_NEAR(b.M[n][k], 3 * a.M[n][k], 1e-12 * b.M[n][k]);
  }
}

TEST(Energy, MonotoneInDerivativeOrder) {
  const auto s = spec(1e-3);
  const auto L = evolve_semilinear(s, model_data(s));
  for (int dom : {1, 2, 3}) {
    const auto rep = weighted_energy_M(energy_grid(L, dom, s), dom, 2, s.delta, s);
    for (std::size_t k = 0; k < rep.t.size(); ++k) {
      EXPECT_LE(rep.M[0][k], rep.M[1][k]);
      EXPECT_LE(rep.M[1][k], rep.M[2][k]);
    }
  }
}

TEST(Energy, InitialSliceMatchesCauchyData) {
  const auto s = spec(1e-3);
  const auto d = model_data(s);
  const auto L = evolve_mode_compactified(d, s.lattice());
  const auto rep = weighted_energy_M(energy_grid(L, 1, s), 1, 0, s.delta, s);
  ASSERT_EQ(rep.t.front(), 0.0);
  EXPECT_NEAR(rep.M[0].front(), s.eps, 1e-2 * s.eps);
}

TEST(Energy, LinearDomain2Bounded) {
  Vec C;
  for (double h : {0.05, 0.025}) {
    const auto s = spec(1e-3, h);
    const auto d = model_data(s);
    const auto L = evolve_mode_compactified(d, s.lattice());
    const auto rep = weighted_energy_M(energy_grid(L, 2, s), 2, 0, s.delta, s);
    double sup = 0;
    for (std::size_t k = 0; k < rep.t.size(); ++k)
      sup = std::max(sup, std::pow(std::abs(rep.t[k]), 0.5 - s.delta) * rep.M[0][k]);
    C.push_back(sup / initial_M(d, s.delta, s.gamma0(1)));
    EXPECT_TRUE(std::isfinite(C.back()));
  }
  RecordProperty("C_coarse", std::to_string(C[0]));
  RecordProperty("C_fine", std::to_string(C[1]));
  EXPECT_NEAR(C[0], C[1], 0.05 * C[1]);
}

TEST(Energy, GridChartMismatch) {
  const auto s = spec(1e-3);
  const auto L = evolve_mode_compactified(model_data(s), s.lattice());
  const auto g = energy_grid(L, 3, s);
  EXPECT_THROW(weighted_energy_M(g, 2, 0, s.delta, s), Error);
}

TEST(Energy, CsvLayout) {
  EnergyReport r;
  r.Nmax = 2;
  r.t = {-0.1, -0.01};
  r.M = {Vec{1, 2}, Vec{3, 4}, Vec{5, 6}};
  std::ostringstream o;
  write_energy_csv(o, r);
  const std::string s = o.str();
  EXPECT_EQ(s.substr(0, 11), "t,M0,M1,M2\n");
  EXPECT_NE(s.find("-0.1,1,3,5\n"), std::string::npos);
  EXPECT_NE(s.find("# slope:"), std::string::npos);
}

// ---- decay fits -------------------------------------------------------------------------

TEST(Decay, SyntheticPowerLaw) {
  EnergyReport r;
  for (int k = 0; k <= 20; ++k) {
    const double t = -std::pow(10.0, -0.1 * k);
    r.t.push_back(t);
    r.M[0].push_back(std::pow(std::abs(t), -0.25));
  }
  const auto F = decay_fit(r, 0.25);
  EXPECT_NEAR(F.slope, -0.25, 1e-3);
  EXPECT_TRUE(F.pass);
}

TEST(Decay, InsufficientRange) {
  EnergyReport r;
  for (int k = 0; k <= 5; ++k) {
    r.t.push_back(-0.5 + 0.05 * k);
    r.M[0].push_back(1.0);
  }
  try {
    decay_fit(r, 0.25);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientRange);
  }
}

TEST(Decay, SemilinearAndLinearSlopes) {
  for (int dom : {2, 3}) {
    Vec sl_semi;
    for (double h : {0.05, 0.025}) {
      const auto s = spec(1e-3, h);
      const auto d = model_data(s);
      auto semi = weighted_energy_M(energy_grid(evolve_semilinear(s, d), dom, s), dom, 0, s.delta, s);
      auto lin = weighted_energy_M(energy_grid(evolve_mode_compactified(d, s.lattice()), dom, s), dom, 0, s.delta, s);
      const auto Fs = decay_fit(semi, s.delta), Fl = decay_fit(lin, s.delta);
      EXPECT_GE(Fs.slope, -0.35) << "domain " << dom;
      EXPECT_GE(Fl.slope, -0.35) << "domain " << dom;
      sl_semi.push_back(Fs.slope);
    }
    EXPECT_LE(std::abs(sl_semi[0] - sl_semi[1]), 0.03) << "domain " << dom;
  }
}

// ---- boundary regularity and flux identity -----------------------------------------------

TEST(Holder, SemilinearRun) {
  Vec slopes;
  for (double h : {0.05, 0.025}) {
    auto s = spec(1e-3, h);
    const auto L = evolve_semilinear(s, model_data(s));
    const auto g = lattice_to_chart(L, Chart::Omega3, uniform_axis("tau", -8, 8, 81), uniform_axis("rho", 0, 0.02, 41));
    const auto H = holder_fit(g, s.delta);
    ASSERT_FALSE(H.exact);
    EXPECT_GE(H.slope, s.delta - 0.05);
    slopes.push_back(H.slope);
  }
  EXPECT_LE(std::abs(slopes[0] - slopes[1]), 0.03);
}

TEST(FluxIdentity, ClosesWithSemilinearSource) {
  // (Box + gamma0) u~ = -(d_tau u~)^2 in Omega3 for n = 5
  Vec res;
  for (double h : {0.05, 0.025, 0.0125}) {
    auto s = spec(10.0, h);
    const auto L = evolve_semilinear(s, model_data(s));
    const auto N = static_cast<std::size_t>(std::llround(0.05 / h * 32)) + 1;
    const auto g = lattice_to_chart(L, Chart::Omega3, uniform_axis("tau", -6, -2, N), uniform_axis("rho", 0.01, 0.03, N));
    const auto dt = d_q(g, 0);
    ModeGrid f = g.like();
    for (std::size_t k = 0; k < g.v.size(); ++k) f.v[k] = -dt.v[k] * dt.v[k];
    FormParams P;
    P.n = 5;
    P.variant = FluxVariant::Derived;
    const auto R = divergence_residual(g, f, TimelikeFunction{3, TKind::T, s.dp, 5.9375, s.tau0}, LogWeight{},
                                       gamma0(Chart::Omega3, 5), P);
    res.push_back(R.residual);
  }
  const auto p = observed_orders(res);
  for (double x : p) EXPECT_GE(x, 1.9);
}

TEST(Determinism, IdenticalRunsIdenticalReports) {
  const auto s = spec(1e-3);
  auto run = [&] {
    const auto L = evolve_semilinear(s, model_data(s));
    auto rep = weighted_energy_M(energy_grid(L, 2, s), 2, 2, s.delta, s);
    decay_fit(rep, s.delta);
    std::ostringstream o;
    write_energy_csv(o, rep);
    return o.str();
  };
  EXPECT_EQ(run(), run());
}
