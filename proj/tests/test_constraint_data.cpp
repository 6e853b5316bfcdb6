#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "radlab/constraint_data.hpp"

using namespace radlab;

namespace {

constexpr double kPi = std::numbers::pi;

TorusGrid grid(int n, int N) { return TorusGrid{n, N, 2 * kPi}; }

template <class Fn>
Field sample(const TorusGrid& g, Fn fn) {
  Field f(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) f[p] = fn(node_coords(g, p));
  return f;
}

Field rand_amp(const Spectral& S, Rng& r, int kmax, double amp) {
  Field f = random_field(S, r, kmax);
  const double m = max_abs(f);
  for (double& v : f) v *= amp / m;
  return f;
}

double rel(const Field& a, const Field& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += sq(a[i] - b[i]);
    den += sq(b[i]);
  }
  return std::sqrt(num / den);
}

// linear constraint solution with max |h0| = 1
SymTensorPair unit_solution(const Spectral& S, std::uint64_t seed, int kmax = 2) {
  Rng r(seed);
  SymTensorPair d = solve_linear_constraints(S, random_free_data(S, r, kmax, true));
  return d.scaled(1.0 / d.max_h0());
}

GaugeElement random_gauge(const Spectral& S, std::uint64_t seed, double a0, double a1, int kmax = 2) {
  Rng r(seed, 7);
  const int D = S.grid().n + 1;
  std::vector<Field> f0(D, Field(S.grid().size(), 0.0)), f1(D);
  for (int a = 1; a < D; ++a) f0[a] = rand_amp(S, r, kmax, a0);
  for (int a = 0; a < D; ++a) f1[a] = rand_amp(S, r, kmax, a1);
  return make_gauge_element(S, std::move(f0), std::move(f1));
}

}  // namespace

// ---- half-Laplacian ----------------------------------------------------------------

TEST(HalfLaplacian, Eigenfunction) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  const Field f = sample(g, [](auto x) { return std::sin(x[0] + 2 * x[1] - x[2]); });
  const Field Pf = S.half_lap(f);
  for (std::size_t p = 0; p < f.size(); ++p) EXPECT_NEAR(Pf[p], std::sqrt(6.0) * f[p], 1e-13);
}

TEST(HalfLaplacian, SquareIsLaplacian) {
  for (int n : {3, 4}) {
    const TorusGrid g = grid(n, n == 3 ? 32 : 16);
    Spectral S(g);
    Rng r(11 + n);
    for (int t = 0; t < 10; ++t) {
      const Field f = random_field(S, r, 5);
      const Field PPf = S.half_lap(S.half_lap(f));
      // Laplacian from the derivative symbols: -sum d_j d_j
      Field lap(g.size(), 0.0);
      for (int a = 0; a < n; ++a) detail::axpy(lap, -1.0, S.dd(f, a, a));
      EXPECT_LE(rel(PPf, lap), 1e-12) << "n=" << n;
    }
  }
}

TEST(HalfLaplacian, LaplacianOfTrigPolynomial) {
  const TorusGrid g = grid(4, 8);
  Spectral S(g);
  const Field f = sample(g, [](auto x) { return std::cos(x[0] - x[3]) + 0.5 * std::sin(2 * x[1] + x[2]); });
  const Field want = sample(g, [](auto x) { return 2 * std::cos(x[0] - x[3]) + 2.5 * std::sin(2 * x[1] + x[2]); });
  const Field lap = S.lap(f);
  for (std::size_t p = 0; p < f.size(); ++p) EXPECT_NEAR(lap[p], want[p], 1e-12);
}

TEST(HalfLaplacian, ConstantAnnihilated) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  const Field P = S.half_lap(Field(g.size(), 3.5));
  EXPECT_LE(max_abs(P), 1e-14);
}

TEST(HalfLaplacian, SpectralFieldFormMatches) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  Rng r(5);
  const Field f = random_field(S, r, 4);
  const Field a = to_real(S, half_laplacian(to_spectral(S, f)));
  const Field b = S.half_lap(f);
  for (std::size_t p = 0; p < f.size(); ++p) EXPECT_NEAR(a[p], b[p], 1e-13);
}

TEST(HalfLaplacian, Positive) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  Rng r(9);
  for (int t = 0; t < 20; ++t) {
    const Field f = random_field(S, r, 6);
    EXPECT_GE(dot(S.half_lap(f), f), 0.0);
  }
}

TEST(HalfLaplacian, InverseRefusesMean) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  Rng r(2);
  Field f = random_field(S, r, 2);
  const Field back = S.half_lap(S.inv_half_lap(f));
  EXPECT_LE(rel(back, f), 1e-13);
  for (double& v : f) v += 0.1;
  try {
    S.inv_lap(f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MeanObstruction);
  }
}

// ---- Hodge --------------------------------------------------------------------------

TEST(Hodge, GradientIsClosed) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  Rng r(3);
  const OneForm u = gradient(S, random_field(S, r, 4));
  const HodgeSplit h = hodge_project(S, u);
  for (int a = 0; a < 3; ++a) {
    EXPECT_LE(rel(h.closed[a], u[a]), 1e-12);
    EXPECT_LE(max_abs(h.coclosed[a]), 1e-12 * max_abs(u[a]));
  }
}

TEST(Hodge, DivergenceFreeIsCoclosed) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  Rng r(4);
  TwoForm w;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) w[{i, j}] = random_field(S, r, 4);
  const OneForm u = codiff(S, w);
  double um = 0;
  for (const Field& f : u) um = std::max(um, max_abs(f));
  EXPECT_LE(max_abs(codiff(S, u)), 1e-13 * um);
  const HodgeSplit h = hodge_project(S, u);
  for (int a = 0; a < 3; ++a) EXPECT_LE(max_abs(h.closed[a]), 1e-12 * max_abs(u[a]));
}

TEST(Hodge, RandomSplitIdentities) {
  for (int n : {3, 4}) {
    const TorusGrid g = grid(n, n == 3 ? 16 : 8);
    Spectral S(g);
    Rng r(40 + n);
    OneForm u;
    for (int a = 0; a < n; ++a) u.push_back(random_field(S, r, 3));
    const HodgeSplit h = hodge_project(S, u);
    EXPECT_LE(rel(codiff(S, h.closed), codiff(S, u)), 1e-12);
    EXPECT_LE(max_abs(codiff(S, h.coclosed)), 1e-12 * max_abs(codiff(S, u)));
    for (const auto& [ij, f] : exterior_d(S, h.closed)) EXPECT_LE(max_abs(f), 1e-12);
    for (int a = 0; a < n; ++a) {
      Field sum = h.closed[a];
      detail::axpy(sum, 1.0, h.coclosed[a]);
      EXPECT_LE(rel(sum, u[a]), 1e-14);
    }
  }
}

TEST(Hodge, LaplacianIsDDeltaPlusDeltaD) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  Rng r(8);
  OneForm u;
  for (int a = 0; a < 3; ++a) u.push_back(random_field(S, r, 4));
  const OneForm a1 = gradient(S, codiff(S, u));
  const OneForm a2 = codiff(S, exterior_d(S, u));
  for (int a = 0; a < 3; ++a) {
    Field sum = a1[a];
    detail::axpy(sum, 1.0, a2[a]);
    EXPECT_LE(rel(sum, S.lap(u[a])), 1e-12);
  }
}

TEST(Hodge, MeanIsAmbiguous) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  OneForm u(3, Field(g.size(), 0.0));
  u[1].assign(g.size(), 1.0);
  try {
    hodge_project(S, u);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroModeAmbiguity);
  }
}

// ---- linear constraint solve ------------------------------------------------------------

TEST(LinearConstraints, ZeroData) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  const SymTensorPair d = solve_linear_constraints(S, FreeData::zeros(g, true));
  EXPECT_EQ(max_difference(d, SymTensorPair::zeros(g)), 0.0);
}

TEST(LinearConstraints, SingleModeSymbolQuotient) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  // A_2 = cos(x1 + 2 x2): |k|^2 A_1 = (k1^2 - k2^2) A_2 -> A_1 = -3/5 A_2
  FreeData f = FreeData::zeros(g, true);
  f.set("A_2", sample(g, [](auto x) { return std::cos(x[0] + 2 * x[1]); }));
  // A_23 = sin(2x1 + x2 + x3): contributes 2 k2 k3 / |k|^2 = 1/3
  f.set("A_23", sample(g, [](auto x) { return std::sin(2 * x[0] + x[1] + x[2]); }));
  // C_3 = sin(x2 - 2x3): |k| C_1 = (k1^2 - k3^2)/|k| C_3 -> C_1 = -4/5 C_3
  f.set("C_3", sample(g, [](auto x) { return std::sin(x[1] - 2 * x[2]); }));
  const SymTensorPair d = solve_linear_constraints(S, f);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto x = node_coords(g, p);
    const double A1 = (2.0 / 3.0) * (d.c0(1, 1)[p] + d.c0(2, 2)[p] + d.c0(3, 3)[p]);
    const double C1 = (2.0 / 3.0) * (d.c1(1, 1)[p] + d.c1(2, 2)[p] + d.c1(3, 3)[p]);
    EXPECT_NEAR(A1, -0.6 * std::cos(x[0] + 2 * x[1]) + std::sin(2 * x[0] + x[1] + x[2]) / 3.0, 1e-12);
    EXPECT_NEAR(C1, -0.8 * std::sin(x[1] - 2 * x[2]), 1e-12);
  }
}

TEST(LinearConstraints, RandomResidual) {
  for (int n : {3, 4}) {
    const TorusGrid g = grid(n, n == 3 ? 32 : 12);
    Spectral S(g);
    Rng r(100 + n);
    const SymTensorPair d = solve_linear_constraints(S, random_free_data(S, r, 3, true));
    const Residual res = constraint_residual(S, d, Order::Linear);
    EXPECT_GT(res.scale, 1.0);
    EXPECT_LE(res.relative(), 1e-10) << "n=" << n;
  }
}

TEST(LinearConstraints, FreeComponentsPassThrough) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  Rng r(12);
  const FreeData f = random_free_data(S, r, 3, true);
  const SymTensorPair d = solve_linear_constraints(S, f);
  EXPECT_EQ(d.c0(0, 0), f.h0_00);
  for (int m = 0; m <= 3; ++m) EXPECT_EQ(d.c1(0, m), f.h1_0[m]);
  EXPECT_EQ(d.c0(1, 2), f.A_off[off_index(3, 1, 2)]);
  // A_l and C_l are recovered by the inverse variable change
  for (int l = 2; l <= 3; ++l) {
    Field T(g.size(), 0.0), A = d.c0(l, l);
    for (int i = 1; i <= 3; ++i) detail::axpy(T, 1.0 / 3, d.c0(i, i));
    for (std::size_t p = 0; p < g.size(); ++p) A[p] = T[p] - A[p];
    EXPECT_LE(rel(A, f.A[l - 2]), 1e-13);
  }
  // closed part of h0_0k is B'
  OneForm B;
  for (int k = 1; k <= 3; ++k) B.push_back(d.c0(0, k));
  const HodgeSplit h = hodge_project(S, B);
  for (int k = 0; k < 3; ++k) EXPECT_LE(rel(h.closed[k], f.Bp[k]), 1e-12);
}

TEST(LinearConstraints, Deterministic) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  Rng r1(77), r2(77);
  const SymTensorPair a = solve_linear_constraints(S, random_free_data(S, r1, 3, true));
  const SymTensorPair b = solve_linear_constraints(S, random_free_data(S, r2, 3, true));
  EXPECT_EQ(a.h0, b.h0);
  EXPECT_EQ(a.h1, b.h1);
}

TEST(LinearConstraints, MeanObstruction) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  FreeData f = FreeData::zeros(g, true);
  f.set("C_2", Field(g.size(), 0.25));
  try {
    solve_linear_constraints(S, f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MeanObstruction);
  }
}

TEST(LinearConstraints, RejectsNonClosedBprime) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  FreeData f = FreeData::zeros(g, true);
  f.set("B'_1", sample(g, [](auto x) { return std::sin(x[1]); }));  // curl != 0
  try {
    solve_linear_constraints(S, f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidInput);
  }
}

// ---- harmonic-gauge data ------------------------------------------------------------------

TEST(GaugeData, ZeroData) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  const SymTensorPair d = solve_harmonic_gauge_data(S, FreeData::zeros(g, false));
  EXPECT_EQ(max_difference(d, SymTensorPair::zeros(g)), 0.0);
}

TEST(GaugeData, RandomResiduals) {
  for (int n : {3, 4}) {
    const TorusGrid g = grid(n, n == 3 ? 32 : 12);
    Spectral S(g);
    Rng r(200 + n);
    const SymTensorPair d = solve_harmonic_gauge_data(S, random_free_data(S, r, 3, false));
    const Residual gr = gauge_residual(S, d, Order::Linear);
    EXPECT_EQ(gr.eq.size(), static_cast<std::size_t>(2 * (n + 1)));
    EXPECT_LE(gr.relative(), 1e-10) << "n=" << n;
    // the gauge conditions imply the constraints
    EXPECT_LE(constraint_residual(S, d, Order::Linear).relative(), 1e-9) << "n=" << n;
  }
}

TEST(GaugeData, SolvedComponentsAreNotFreeData) {
  const TorusGrid g = grid(3, 8);
  FreeData f = FreeData::zeros(g, false);
  const Field z(g.size(), 0.0);
  for (const char* name : {"A_1", "C_1", "B''_2", "h1_00", "h1_03"}) {
    try {
      f.set(name, z);
      ADD_FAILURE() << name;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidInput) << name;
    }
  }
  EXPECT_THROW(f.set("A_32", z), Error);
  EXPECT_THROW(f.set("Q_2", z), Error);
  // and h1_0mu cannot be smuggled in through the struct either
  Spectral S(g);
  FreeData h = FreeData::zeros(g, true);
  EXPECT_THROW(solve_harmonic_gauge_data(S, h), Error);
}

TEST(GaugeData, EveryFreeComponentMatters) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  Rng r(31);
  const FreeData base = random_free_data(S, r, 2, false);
  const SymTensorPair d0 = solve_harmonic_gauge_data(S, base);
  const Field bump = sample(g, [](auto x) { return 1e-3 * std::cos(x[0] - x[1] + x[2]); });
  for (const char* name : {"h0_00", "A_2", "A_3", "A_12", "A_13", "A_23", "C_2", "C_3", "C_12", "C_13", "C_23"}) {
    FreeData f = base;
    Field v = *f.slot(name);
    detail::axpy(v, 1.0, bump);
    f.set(name, v);
    EXPECT_GT(max_difference(solve_harmonic_gauge_data(S, f), d0), 1e-5) << name;
  }
  FreeData f = base;
  const OneForm dB = gradient(S, bump);
  for (int k = 0; k < 3; ++k) detail::axpy(f.Bp[k], 1.0, dB[k]);
  EXPECT_GT(max_difference(solve_harmonic_gauge_data(S, f), d0), 1e-5);
}

// ---- residuals ----------------------------------------------------------------------------

TEST(Residual, ZeroData) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  const SymTensorPair z = SymTensorPair::zeros(g);
  for (Order o : {Order::Linear, Order::Full}) {
    EXPECT_EQ(constraint_residual(S, z, o).max_rms(), 0.0);
    EXPECT_EQ(gauge_residual(S, z, o).max_rms(), 0.0);
  }
}

// values from tools/oracles/constraint_reference.py: 2 G^0_nu, Gamma_mu and g^00 d_t Gamma_mu
// computed from the Ricci tensor directly for a fixed trigonometric datum
TEST(Residual, MatchesRicciReference) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  const double eps = 0.03;
  auto coef = [](int k, int a, int b) { return std::sin(1.3 * k + 0.7 * a + 0.31 * b + 0.11 * a * b); };
  auto mode = [](int k, const std::array<double, 6>& x) {
    if (k == 0) return std::sin(x[0] + 2 * x[1] - x[2]);
    if (k == 1) return std::cos(2 * x[0] - x[2]);
    return std::cos(x[0] + x[1] + x[2]);
  };
  SymTensorPair d = SymTensorPair::zeros(g);
  for (int a = 0; a <= 3; ++a)
    for (int b = a; b <= 3; ++b) {
      d.c0(a, b) = sample(g, [&](auto x) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += coef(k, a, b) * mode(k, x);
        return eps * s;
      });
      d.c1(a, b) = sample(g, [&](auto x) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += coef(k + 3, a, b) * mode(k, x);
        return eps * s;
      });
    }
  struct Ref {
    int j[3];
    double v[12];
  };
  const Ref refs[] = {
      {{0, 0, 0},
       {0.096550780965147701, -0.044531449183049465, -0.10387380351248417, -0.12567206125271668,
        0.0035449180082030018, 0.059905316734068965, 0.031398664600254374, 0.052629873308862034,
        0.090460910358582197, -0.10256392459536166, -0.090036236177523918, -0.099695238672799572}},
      {{3, 7, 11},
       {-0.041713030347180075, 0.11041863932549503, -0.0024779918612558441, -0.14060056310924091,
        0.034575735324660878, 0.11035689705667236, 0.079852269136719473, -0.011934543642900829,
        0.012885153272045142, 0.11495963572235432, -0.025127311558828108, -0.13313415295354764}},
      {{15, 2, 9},
       {0.0065674325491483776, -0.092507796311598195, 0.061729426948775555, 0.2369222261094287,
        -0.050181407832061847, -0.16888243663563701, -0.11201134837309525, -0.053220468374430091,
        -0.073522305329049326, -0.074279167924108144, 0.050225312172896393, 0.19667010785206249}},
      {{8, 8, 1},
       {0.077558539908972851, -0.1163887189950394, -0.18800625408098334, -0.22876105557635826,
        -0.018443632401649836, 0.028144686289774602, 0.0086551197349717286, -0.072056571254893093,
        -0.022417954924442506, -0.18814343753947108, -0.21082782622338375, -0.16850198027348662}},
  };
  const Residual c = constraint_residual(S, d, Order::Full);
  const Residual gr = gauge_residual(S, d, Order::Full);
  for (const Ref& ref : refs) {
    const std::size_t p = (static_cast<std::size_t>(ref.j[0]) * 16 + ref.j[1]) * 16 + ref.j[2];
    for (int e = 0; e < 4; ++e) EXPECT_NEAR(c.eq[e][p], ref.v[e], 1e-12) << "constraint " << e;
    for (int e = 0; e < 8; ++e) EXPECT_NEAR(gr.eq[e][p], ref.v[4 + e], 1e-12) << "gauge " << e;
  }
}

TEST(Residual, FullIsQuadraticOnLinearSolutions) {
  const TorusGrid g = grid(3, 32);
  Spectral S(g);
  const SymTensorPair d = unit_solution(S, 21);
  Vec le, lr;
  for (double e : {1e-2, 1e-3, 1e-4}) {
    le.push_back(std::log(e));
    lr.push_back(std::log(constraint_residual(S, d.scaled(e), Order::Full).max_rms()));
  }
  const LineFit fit = fit_line(le, lr);
  EXPECT_GE(fit.slope, 1.9);
  EXPECT_LE(fit.slope, 2.1);
}

TEST(Residual, RefusesLargePerturbation) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  SymTensorPair d = SymTensorPair::zeros(g);
  d.c0(1, 1).assign(g.size(), 0.1);
  EXPECT_NO_THROW(constraint_residual(S, d, Order::Linear));
  try {
    constraint_residual(S, d, Order::Full);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MetricDegenerate);
  }
}

// flat space in other coordinates solves the nonlinear constraints exactly
TEST(Residual, FlatSpaceInNewCoordinates) {
  const TorusGrid g = grid(3, 24);
  Spectral S(g);
  const GaugeElement f = random_gauge(S, 5, 0.01, 0.02);
  ASSERT_TRUE(f.small);
  const SymTensorPair d = gauge_action(S, f, SymTensorPair::zeros(g));
  const Residual lin = constraint_residual(S, d, Order::Linear);
  const Residual full = constraint_residual(S, d, Order::Full);
  const Residual gauge = gauge_residual(S, d, Order::Full);
  EXPECT_GT(lin.relative(), 1e-4);  // the linear part alone does not vanish
  EXPECT_LE(full.relative(), 1e-10);
  EXPECT_LE(gauge.relative(), 1e-10);
}

TEST(Residual, InvariantUnderGaugeAction) {
  const TorusGrid g = grid(3, 24);
  Spectral S(g);
  const SymTensorPair d = unit_solution(S, 8).scaled(0.02);
  const double before = constraint_residual(S, d, Order::Full).max_rms();
  const GaugeElement f = random_gauge(S, 6, 0.005, 0.005);
  const double after = constraint_residual(S, gauge_action(S, f, d, Interp::Trigonometric), Order::Full).max_rms();
  EXPECT_NEAR(after / before, 1.0, 0.1);
}

// ---- f2 -------------------------------------------------------------------------------

TEST(SolveF2, ZeroInput) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  const auto f2 = solve_f2(S, SymTensorPair::zeros(g), GaugeElement::identity(g));
  for (const Field& v : f2) EXPECT_EQ(max_abs(v), 0.0);
}

// on flat space Gamma_mu = 0 is g^{ab} d_a d_b f^mu = 0 for the new metric g = J^T m J
TEST(SolveF2, FlatClosedForm) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  for (double a0 : {0.0, 0.02}) {
    const GaugeElement f = random_gauge(S, 13, a0, 0.03);
    const auto f2 = solve_f2(S, SymTensorPair::zeros(g), f);
    std::vector<Field> d1(16), dd0(64);
    for (int a = 0; a < 4; ++a)
      for (int i = 0; i < 3; ++i) {
        d1[a * 4 + i + 1] = S.d(f.f1[a], i);
        d1[a * 4] = Field(g.size(), 0.0);
        for (int j = 0; j < 3; ++j) dd0[(a * 4 + i + 1) * 4 + j + 1] = S.dd(f.f0[a], i, j);
      }
    std::vector<Field> df0(16);
    for (int a = 0; a < 4; ++a)
      for (int i = 0; i < 3; ++i) df0[a * 4 + i + 1] = S.d(f.f0[a], i);
    double worst = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      Eigen::Matrix4d J = Eigen::Matrix4d::Identity(), m = Eigen::Vector4d(-1, 1, 1, 1).asDiagonal();
      for (int a = 0; a < 4; ++a) {
        J(a, 0) += f.f1[a][p];
        for (int i = 1; i < 4; ++i) J(a, i) += df0[a * 4 + i].empty() ? 0.0 : df0[a * 4 + i][p];
      }
      const Eigen::Matrix4d gi = (J.transpose() * m * J).inverse();
      for (int a = 0; a < 4; ++a) {
        double s = 0;
        for (int i = 1; i < 4; ++i) {
          s += 2 * gi(0, i) * d1[a * 4 + i][p];
          for (int j = 1; j < 4; ++j) s += gi(i, j) * dd0[(a * 4 + i) * 4 + j][p];
        }
        worst = std::max(worst, std::abs(f2[a][p] + s / gi(0, 0)));
      }
    }
    EXPECT_LE(worst, 1e-12) << "a0=" << a0;
  }
}

TEST(SolveF2, SubstitutionSatisfiesGamma) {
  const TorusGrid g = grid(3, 24);
  Spectral S(g);
  const SymTensorPair hb = unit_solution(S, 3).scaled(0.03);
  const GaugeElement f = random_gauge(S, 4, 0.01, 0.02);
  const SymTensorPair d = gauge_action(S, f, hb, Interp::Trigonometric);
  const Residual r = gauge_residual(S, d, Order::Full);
  double worst = 0;
  for (int e = 0; e < 4; ++e) worst = std::max(worst, r.rms[e]);
  EXPECT_LE(worst / r.scale, 1e-9);
}

// ---- gauge action ------------------------------------------------------------------------

// the identity only moves d_t^2-dependent h1_0mu, to enforce the nonlinear gauge conditions:
// an O(eps^2) change on linear gauge data, and none at all on data already in gauge
TEST(GaugeAction, IdentityProjectsOntoGauge) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  Rng r(1);
  const SymTensorPair u = solve_harmonic_gauge_data(S, random_free_data(S, r, 2, false));
  const SymTensorPair un = u.scaled(1.0 / u.max_h0());
  const GaugeElement e = GaugeElement::identity(g);
  Vec le, lc;
  for (double eps : {1e-2, 1e-3}) {
    const SymTensorPair d = un.scaled(eps);
    const SymTensorPair a = gauge_action(S, e, d);
    for (int c = 0; c < sym_count(3); ++c) EXPECT_EQ(a.h0[c], d.h0[c]);
    le.push_back(std::log(eps));
    lc.push_back(std::log(max_difference(a, d)));
    EXPECT_LE(max_difference(gauge_action(S, e, a), a), 1e-15);
  }
  EXPECT_NEAR(fit_line(le, lc).slope, 2.0, 0.1);
}

TEST(GaugeAction, FlatShiftComponents) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  const GaugeElement f = random_gauge(S, 2, 0.0, 0.03);
  const SymTensorPair d = gauge_action(S, f, SymTensorPair::zeros(g));
  for (int i = 1; i <= 3; ++i) EXPECT_EQ(d.c0(0, i), f.f1[i]);
  for (int i = 1; i <= 3; ++i)
    for (int j = i; j <= 3; ++j) EXPECT_EQ(max_abs(d.c0(i, j)), 0.0);
}

TEST(GaugeAction, DisplayMatchesGeneralPullback) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  const SymTensorPair hb = unit_solution(S, 17).scaled(0.03);
  const GaugeElement f = random_gauge(S, 18, 0.0, 0.03);
  const SymTensorPair a = gauge_action(S, f, hb);
  const SymTensorPair b = gauge_action_general(S, f, hb);
  EXPECT_LE(max_difference(a, b), 1e-14);
}

TEST(GaugeAction, TimeShiftsPreserveInducedData) {
  const TorusGrid g = grid(3, 24);
  Spectral S(g);
  const SymTensorPair hb = unit_solution(S, 23).scaled(0.03);
  const GaugeElement f = random_gauge(S, 24, 0.0, 0.03);
  const SymTensorPair d = gauge_action(S, f, hb);
  EXPECT_LE(max_difference(induced_data(S, d), induced_data(S, hb)), 1e-10);
  // the literal k0 expression (partial derivatives of the shift, lapse as a factor) is not
  // invariant under these coordinate changes
  EXPECT_GT(max_difference(induced_data(S, d, KForm::Printed), induced_data(S, hb, KForm::Printed)), 1e-4);
}

TEST(GaugeAction, InterpolationRange) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  std::vector<Field> shift(3, Field(g.size(), 0.0));
  shift[0][5] = 0.5 * g.L;
  try {
    Composer(S, shift, Interp::Cubic);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InterpolationOutOfRange);
  }
}

TEST(GaugeAction, LargeElementRejected) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  const GaugeElement f = random_gauge(S, 2, 0.0, 0.5);
  EXPECT_FALSE(f.small);
  EXPECT_THROW(gauge_action(S, f, SymTensorPair::zeros(g)), Error);
}

TEST(GaugeAction, CubicCompositionConverges) {
  // cubic pullback of a fixed field by a fixed shift: error falls toward 16x per halving
  Vec err;
  for (int N : {32, 64, 128}) {
    const TorusGrid g = grid(3, N);
    Spectral S(g);
    std::vector<Field> shift(3);
    for (int a = 0; a < 3; ++a)
      shift[a] = sample(g, [a](auto x) { return 0.05 * std::sin(x[0] + (a + 1) * x[1] - x[2]); });
    const Field f = sample(g, [](auto x) { return std::cos(2 * x[0] - x[1]) * std::sin(x[2] + x[1]); });
    const Field c = Composer(S, shift, Interp::Cubic)(f);
    double e = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      auto x = node_coords(g, p);
      for (int a = 0; a < 3; ++a) x[a] += shift[a][p];
      e = std::max(e, std::abs(c[p] - std::cos(2 * x[0] - x[1]) * std::sin(x[2] + x[1])));
    }
    err.push_back(e);
  }
  const Vec ord = observed_orders(err);
  EXPECT_GE(ord.front(), 3.0);
  EXPECT_NEAR(ord.back(), 4.0, 0.3);
}

// ---- group law --------------------------------------------------------------------------

TEST(GroupCompose, IdentityIsNeutral) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  const GaugeElement f = random_gauge(S, 30, 0.01, 0.01);
  const GaugeElement e = GaugeElement::identity(g);
  EXPECT_LE(max_difference(group_compose(S, e, f), f), 1e-15);
  EXPECT_LE(max_difference(group_compose(S, f, e), f), 1e-15);
}

TEST(GroupCompose, Associative) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  for (std::uint64_t seed : {40, 41}) {
    const GaugeElement a = random_gauge(S, seed, 0.01, 0.01), b = random_gauge(S, seed + 10, 0.01, 0.01),
                       c = random_gauge(S, seed + 20, 0.01, 0.01);
    const auto T = Interp::Trigonometric;
    const GaugeElement l = group_compose(S, group_compose(S, a, b, T), c, T);
    const GaugeElement r = group_compose(S, a, group_compose(S, b, c, T), T);
    EXPECT_LE(max_difference(l, r), 1e-8);
  }
}

TEST(GroupCompose, TimeShiftTimesSpaceDiffeo) {
  const TorusGrid g = grid(3, 16);
  Spectral S(g);
  const GaugeElement f = random_gauge(S, 50, 0.02, 0.02);
  const GaugeElement f1 = split_g1(S, f);
  const GaugeElement f0 = make_gauge_element(S, f.f0, std::vector<Field>(4, Field(g.size(), 0.0)));
  EXPECT_LE(max_difference(group_compose(S, f1, f0), f), 1e-10);
}

// ---- induced data -------------------------------------------------------------------------

TEST(InducedData, Flat) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  const InducedData r = induced_data(S, SymTensorPair::zeros(g));
  for (int i = 1; i <= 3; ++i)
    for (int j = i; j <= 3; ++j) {
      const int c = ssym_index(3, i, j);
      EXPECT_EQ(max_abs(r.k0[c]), 0.0);
      for (double v : r.g0[c]) EXPECT_EQ(v, i == j ? 1.0 : 0.0);
    }
}

TEST(InducedData, ConstantLapsePerturbation) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  SymTensorPair d = SymTensorPair::zeros(g);
  d.c0(0, 0).assign(g.size(), 0.05);
  for (KForm k : {KForm::Geometric, KForm::Printed}) {
    const InducedData r = induced_data(S, d, k);
    for (const Field& f : r.k0) EXPECT_EQ(max_abs(f), 0.0);
  }
}

TEST(InducedData, EquivariantUnderSpaceDiffeos) {
  // products of kmax=2 fields alias at N=16 (~1e-8); N=20 resolves them
  const TorusGrid g = grid(3, 20);
  Spectral S(g);
  const SymTensorPair hb = unit_solution(S, 60).scaled(0.02);
  const GaugeElement f = random_gauge(S, 61, 0.01, 0.0);
  const auto T = Interp::Trigonometric;
  const InducedData lhs = induced_data(S, gauge_action(S, f, hb, T));
  const InducedData rhs = pullback(S, induced_data(S, hb), f.f0, T);
  EXPECT_LE(max_difference(lhs, rhs), 1e-8);
}

TEST(InducedData, Degenerate) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  SymTensorPair d = SymTensorPair::zeros(g);
  d.c0(2, 2).assign(g.size(), -1.5);
  try {
    induced_data(S, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MetricDegenerate);
  }
}

// ---- files ---------------------------------------------------------------------------

TEST(PairFile, RoundTrip) {
  const TorusGrid g = grid(3, 8);
  Spectral S(g);
  const SymTensorPair d = unit_solution(S, 70);
  std::stringstream ss;
  write_pair(ss, d);
  const std::string text = ss.str();
  EXPECT_NE(text.find("components=10"), std::string::npos);
  EXPECT_LT(text.find("#block h0 03"), text.find("#block h0 11"));
  EXPECT_LT(text.find("#block h0 33"), text.find("#block h1 00"));
  const SymTensorPair e = read_pair(ss);
  EXPECT_EQ(e.grid, d.grid);
  EXPECT_EQ(e.h0, d.h0);
  EXPECT_EQ(e.h1, d.h1);
}

TEST(PairFile, Malformed) {
  std::stringstream ss("#radlab-field v1\nn=3\nchart=Omega1\n");
  EXPECT_THROW(read_pair(ss), Error);
}
