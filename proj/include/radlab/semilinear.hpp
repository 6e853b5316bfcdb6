#pragma once
// Scalar semilinear model  u_tt - Lap u = (u_t)^2  per radial mode on the compactified lattice,
// its Picard sequence, and weighted slice energies on the three outer foliations.

#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "radlab/linear_wave.hpp"
#include "radlab/operators.hpp"

namespace radlab {

struct ModelSpec {
  int n = 5;
  int l = 0;
  double eps = 1e-3;
  double delta = 0.25;
  double dp = 0.2;      // delta'
  double tau0 = 10.0;
  double R = 30.0;      // data support; has to reach beyond tau0 or the Omega2 part stays empty
  double h = 0.05;      // lattice step
  double u_max = 0;     // 0: tau0 + 1
  double g0_dom1 = std::numeric_limits<double>::quiet_NaN();  // NaN: domain_gamma0(1, n)

  double gamma0(int domain) const {
    if (domain == 1 && !std::isnan(g0_dom1)) return g0_dom1;
    return domain_gamma0(domain, n);
  }
  CompactOptions lattice() const {
    CompactOptions o;
    o.h = h;
    o.u_max = u_max > 0 ? u_max : tau0 + 1;
    return o;
  }
};

inline void validate(const ModelSpec& s) {
  if (s.n < 3 || s.l < 0) fail(Errc::BadParameters, "model needs n >= 3, l >= 0");
  if (!(s.eps >= 0)) fail(Errc::BadParameters, "eps must be >= 0");
  if (!(s.delta > 0 && s.delta < 0.5)) fail(Errc::BadParameters, "delta must lie in (0, 1/2)");
  if (!(s.dp > 0 && s.dp < s.delta)) fail(Errc::BadParameters, "delta' must lie in (0, delta)");
  if (!(s.R > s.tau0 + 1)) fail(Errc::BadParameters, "data support must reach beyond tau0 + 1");
  if (!(s.h > 0)) fail(Errc::BadParameters, "lattice step must be positive");
}

// M^0 on the t = 0 slice of domain 1 (r >= 1), straight from the Cauchy data
inline double initial_M(const CauchyModeData& d, double delta, double g0) {
  const double lam = angular_eigenvalue(d.l, d.n);
  const double r0 = 1.0, r1 = std::max(d.R, 1.0);
  const auto m = static_cast<std::size_t>(std::ceil((r1 - r0) / d.dr)) | 1u;
  const double dr = (r1 - r0) / static_cast<double>(m - 1);
  Vec f(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double r = r0 + dr * static_cast<double>(k);
    const double U = d.U0(r), dU = d.U0(r, 1), Ut = d.U1(r);
    f[k] = std::pow(r, 2 * delta) * 0.5 * (r * r * (Ut * Ut + dU * dU) + (lam - g0) * U * U) / r;
  }
  return std::sqrt(simpson(f, dr));
}

// standard model datum: u0 = r^l bump on [2, R], u1 = 0, scaled so that initial M^0 = eps
inline CauchyModeData model_data(const ModelSpec& s) {
  validate(s);
  const double c = (s.R + 2) / 2, w = (s.R - 2) / 2;
  const int l = s.l;
  auto prof = [&](double amp) {
    return make_mode_data(
        s.n, l, s.R, [&](double r) { return amp * std::pow(r, l) * bump((r - c) / w); }, [](double) { return 0.0; },
        0.01);
  };
  const auto unit = prof(1.0);
  const double m = initial_M(unit, s.delta, s.gamma0(1));
  return prof(s.eps / m);
}

// ---- evolution -------------------------------------------------------------------

// direct solve: each cell is a quadratic in the new value,
//   (1 + q) N = K + c (al N + be)^2,  q = d cV / 4, c = d cS;
// the root continuing K / (1 + q) is taken; no real root means the cell blows up
inline NullLattice evolve_semilinear(const ModelSpec& s, const CauchyModeData& d) {
  validate(s);
  if (d.n != s.n || d.l != s.l) fail(Errc::InvalidInput, "data do not match the model's n and l");
  return detail::march(d, s.lattice(), [&](const CellGeom& g, double E, double W, double S, std::size_t i, std::size_t j) {
    const double q = g.d * g.cV / 4;
    const double K = E + W - S - q * (E + W + S);
    const double c = g.d * g.cS;
    const double A = c * g.al * g.al, B = 2 * c * g.al * g.be - (1 + q), C = K + c * g.be * g.be;
    const double disc = B * B - 4 * A * C;
    if (!(disc >= 0)) fail(Errc::BlowupDetected, "no real root for the cell update at i=" + std::to_string(i) + " j=" + std::to_string(j));
    return 2 * C / (-B + std::sqrt(disc));
  });
}

// Picard iterate l+1: linear in the new field, source r^{-(n-1)/2} (d_t h^l)(d_t h^{l+1});
// prev == nullptr is h^{-1} = 0 and gives the linear solution through the same arithmetic
inline NullLattice picard_step(const ModelSpec& s, const CauchyModeData& d, const NullLattice* prev) {
  validate(s);
  return detail::march(d, s.lattice(), [&](const CellGeom& g, double E, double W, double S, std::size_t i, std::size_t j) {
    const double q = g.d * g.cV / 4;
    const double K = E + W - S - q * (E + W + S);
    const double c = g.d * g.cS;
    double gt = 0.0;
    if (prev) {
      const auto& P = *prev;
      const double pE = P(i - 1, j), pW = P(i, j - 1), pS = P(i - 1, j - 1);
      const double pbe = (-pE + pW - pS) / (2 * s.h) + (pE - pW - pS) / (2 * s.h * g.vp);
      gt = g.al * P(i, j) + pbe;
    }
    return (K + c * gt * g.be) / (1 + q - c * gt * g.al);
  });
}

inline NullLattice lattice_difference(const NullLattice& a, const NullLattice& b) {
  if (a.U.size() != b.U.size()) fail(Errc::InvalidInput, "lattices differ in shape");
  NullLattice D = a;
  for (std::size_t k = 0; k < D.U.size(); ++k) D.U[k] = a.U[k] - b.U[k];
  return D;
}

inline double lattice_rel_l2(const NullLattice& a, const NullLattice& b) {
  Vec x, y;
  for (std::size_t k = 0; k < a.U.size(); ++k)
    if (std::isfinite(a.U[k]) && std::isfinite(b.U[k])) {
      x.push_back(a.U[k]);
      y.push_back(b.U[k]);
    }
  return rel_l2(x, y);
}

// ---- energy grids and slice energies --------------------------------------------

struct EnergyOptions {
  std::size_t slices = 41;   // slice count (domains 1, 2: rows of the grid)
  std::size_t along = 401;   // nodes along a slice
  double t_min = 0.0025;     // |t| of the slice closest to null infinity (domains 2, 3)
};

// lattice value with zero outside the domain of influence of the data
inline double sample_or_zero(const NullLattice& L, double t, double r) {
  if (t - r < L.u(0)) return 0.0;
  return L.sample_tr(t, r);
}

// grid in the chart of the domain, laid out so that the energy slices are easy to reach:
// domain 1: (s uniform in [0, 3/4], log rho), domain 2: (log a in [t_min, 1/4], log b),
// domain 3: (tau uniform in [-tau0, tau0], log rho)
inline ModeGrid energy_grid(const NullLattice& L, int domain, const ModelSpec& s, const EnergyOptions& o = {}) {
  const double R = -L.u(0);
  switch (domain) {
    case 1: {
      const double rmin = 0.9 * 0.25 / R;
      return ModeGrid::sample(Chart::Omega1, L.n, L.l, uniform_axis("s", 0, 0.75, o.slices),
                              log_axis("rho", rmin, 1.0, o.along), [&](double q1, double q2) {
                                const double r = 1 / q2;
                                return sample_or_zero(L, q1 * r, r);
                              });
    }
    case 2: {
      const double bmin = 0.9 / R;
      return ModeGrid::sample(Chart::Omega2, L.n, L.l, log_axis("a", o.t_min, 0.25, o.slices),
                              log_axis("b", bmin, 1 / s.tau0, o.along), [&](double q1, double q2) {
                                const double r = 1 / (q1 * q2);
                                return sample_or_zero(L, (1 - q1) * r, r);
                              });
    }
    case 3: {
      const double rmin = 0.99 * o.t_min / (3 * s.tau0);
      return ModeGrid::sample(Chart::Omega3, L.n, L.l, uniform_axis("tau", -s.tau0, s.tau0, o.along),
                              log_axis("rho", rmin, 1 / s.tau0, o.slices * 8), [&](double q1, double q2) {
                                const double r = 1 / q2;
                                return sample_or_zero(L, q1 + r, r);
                              });
    }
    default: fail(Errc::InvalidInput, "energy domains are 1, 2, 3");
  }
}

// commuting b-fields used for D^I: radial members of the domain's basis
//   domain 1: S = -rho d_rho, Z_r = (1 - s^2) d_s - s rho d_rho
//   domain 2: S = -b d_b,     Z_r = -a (2 - a) d_a + b d_b
//   domain 3: d_tau, rho d_rho
inline ModeGrid apply_b_field(const ModeGrid& g, int domain, int k) {
  const ModeGrid f1 = d_q(g, 0), f2 = d_q(g, 1);
  ModeGrid out = g.like();
  for (std::size_t i = 0; i < g.N1(); ++i)
    for (std::size_t j = 0; j < g.N2(); ++j) {
      const double x = g.q1(i), y = g.q2(j);
      double c1 = 0, c2 = 0;
      switch (domain) {
        case 1: c1 = k == 0 ? 0 : 1 - x * x; c2 = k == 0 ? -y : -x * y; break;
        case 2: c1 = k == 0 ? 0 : -x * (2 - x); c2 = k == 0 ? -y : y; break;
        case 3: c1 = k == 0 ? 1 : 0; c2 = k == 0 ? 0 : y; break;
        default: fail(Errc::InvalidInput, "energy domains are 1, 2, 3");
      }
      out(i, j) = c1 * f1(i, j) + c2 * f2(i, j);
    }
  return out;
}

struct EnergyReport {
  int domain = 2;
  double delta = 0.25, g0 = 0;
  int Nmax = 0;
  Vec t;                    // slice parameter
  std::array<Vec, 3> M;     // M^N(t), N <= Nmax
  double slope = std::numeric_limits<double>::quiet_NaN();
  double fit_rms = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct JetGrids {
  ModeGrid v, v1, v2;
};

inline std::vector<JetGrids> commuted_jets(const ModeGrid& g, int domain, int N) {
  std::vector<ModeGrid> fields{g};
  if (N >= 1)
    for (int k = 0; k < 2; ++k) fields.push_back(apply_b_field(g, domain, k));
  if (N >= 2)
    for (int a = 0; a < 2; ++a)
      for (int k = 0; k < 2; ++k) fields.push_back(apply_b_field(fields[1 + a], domain, k));
  std::vector<JetGrids> J;
  for (auto& f : fields) J.push_back({f, d_q(f, 0), d_q(f, 1)});
  return J;
}

}  // namespace detail

// per-slice quadrature of  sum_{|I|<=N} rho0^{-2 delta} <F(T, D^I v), grad T'> dmu  (square root)
inline EnergyReport weighted_energy_M(const ModeGrid& g, int domain, int N, double delta, const ModelSpec& s,
                                      const EnergyOptions& o = {}) {
  if (N < 0 || N > 2) fail(Errc::InvalidInput, "N must be 0, 1 or 2");
  const Chart want = domain == 1 ? Chart::Omega1 : domain == 2 ? Chart::Omega2 : Chart::Omega3;
  if (domain < 1 || domain > 3 || g.chart != want) fail(Errc::InvalidInput, "grid chart does not match the domain");
  if (g.N1() < 9 || g.N2() < 9) fail(Errc::InsufficientResolution, "energy grid needs >= 9 nodes per axis");
  EnergyReport rep;
  rep.domain = domain;
  rep.delta = delta;
  rep.Nmax = N;
  rep.g0 = s.gamma0(domain);
  FormParams P;
  P.n = g.n;
  P.dp = s.dp;
  P.tau0 = s.tau0;
  P.variant = FluxVariant::Derived;
  const Pairing pair = domain == 1 ? Pairing::Same : Pairing::Prime;
  const double lam = angular_eigenvalue(g.l, g.n);
  const auto jets = detail::commuted_jets(g, domain, N);
  // order of the jets: I = (), (0), (1), (00), (01), (10), (11)
  const std::size_t count[3] = {1, 3, 7};
  TimelikeFunction Tp{domain, domain == 1 ? TKind::T : TKind::Prime, s.dp, 5.9375, s.tau0};

  auto term = [&](const detail::JetGrids& J, double q1, double q2, std::size_t i, std::size_t j, bool on_grid) {
    JetSample js{q1, q2, 0, 0, 0, 0};
    if (on_grid) {
      js.v = J.v(i, j);
      js.v1 = J.v1(i, j);
      js.v2 = J.v2(i, j);
    } else {
      js.v = interp(J.v, q1, q2);
      js.v1 = interp(J.v1, q1, q2);
      js.v2 = interp(J.v2, q1, q2);
    }
    js.A = std::sqrt(lam) * std::abs(js.v);
    return flux_form(domain, pair, js, rep.g0, P);
  };
  auto leak_check = [&](double q1, double q2) {
    if (!(timelike_gradient(Tp, q1, q2).gradsq < 0))
      fail(Errc::FoliationLeak, "slice is not space-like at q = (" + std::to_string(q1) + ", " + std::to_string(q2) + ")");
  };

  if (domain == 1 || domain == 2) {
    // slices are grid rows; dmu = d(log q2) dtheta, rho0 = q2
    if (g.ax[1].map != AxisMap::Log) fail(Errc::InvalidInput, "energy grid needs a log axis along the slices");
    for (std::size_t i = 0; i < g.N1(); ++i) {
      rep.t.push_back(domain == 1 ? g.q1(i) : -g.q1(i));
      std::array<Vec, 3> f;
      for (auto& x : f) x.assign(g.N2(), 0.0);
      for (std::size_t j = 0; j < g.N2(); ++j) {
        const double q1 = g.q1(i), q2 = g.q2(j);
        if (j % 16 == 0) leak_check(q1, q2);
        const double w = std::pow(q2, -2 * delta);
        double acc = 0;
        std::size_t k = 0;
        for (int n = 0; n <= N; ++n) {
          for (; k < count[n]; ++k) acc += term(jets[k], q1, q2, i, j, true);
          f[n][j] = w * acc;
        }
      }
      for (int n = 0; n <= N; ++n) rep.M[n].push_back(std::sqrt(std::max(0.0, simpson(f[n], g.ax[1].spacing))));
    }
  } else {
    // slices rho (2 tau0 - tau) = |t| for |t| log-spaced in [t_min, 1]; dmu = dtau / (2 tau0 - tau) dtheta
    if (g.ax[0].map != AxisMap::Identity) fail(Errc::InvalidInput, "domain 3 grid needs a uniform tau axis");
    const std::size_t ns = o.slices;
    for (std::size_t k = 0; k < ns; ++k) {
      const double at = std::exp(std::log(1.0) + (std::log(o.t_min) - std::log(1.0)) * static_cast<double>(k) /
                                                      static_cast<double>(ns - 1));
      rep.t.push_back(-at);
      std::array<Vec, 3> f;
      for (auto& x : f) x.assign(g.N1(), 0.0);
      for (std::size_t i = 0; i < g.N1(); ++i) {
        const double tau = g.q1(i), c = 2 * s.tau0 - tau, rho = at / c;
        if (!contains(g, tau, rho)) fail(Errc::InsufficientResolution, "domain 3 grid does not cover the slice");
        if (i % 16 == 0) leak_check(tau, rho);
        double acc = 0;
        std::size_t m = 0;
        for (int n = 0; n <= N; ++n) {
          for (; m < count[n]; ++m) acc += term(jets[m], tau, rho, 0, 0, false);
          f[n][i] = acc / c;
        }
      }
      for (int n = 0; n <= N; ++n) rep.M[n].push_back(std::sqrt(std::max(0.0, simpson(f[n], g.ax[0].spacing))));
    }
  }
  return rep;
}

struct DecayFit {
  double slope = 0, intercept = 0, rms = 0;
  double bound = 0;  // -(1/2 - delta) - 0.1
  bool pass = false;
};

// slope of log M^N against log|t| over the slices with |t| > 0
inline DecayFit decay_fit(EnergyReport& rep, double delta, int N = 0) {
  if (N < 0 || N > rep.Nmax) fail(Errc::InvalidInput, "report has no such order");
  Vec x, y;
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (std::size_t k = 0; k < rep.t.size(); ++k) {
    const double at = std::abs(rep.t[k]), m = rep.M[N][k];
    if (!(at > 0) || !(m > 0)) continue;
    x.push_back(std::log(at));
    y.push_back(std::log(m));
    lo = std::min(lo, at);
    hi = std::max(hi, at);
  }
  if (x.size() < 3 || !(hi >= 10 * lo)) fail(Errc::InsufficientRange, "decay fit needs a decade of slices with M > 0");
  const auto L = fit_line(x, y);
  DecayFit F;
  F.slope = L.slope;
  F.intercept = L.intercept;
  F.rms = L.rms;
  F.bound = -(0.5 - delta) - 0.1;
  F.pass = F.slope >= F.bound;
  rep.slope = F.slope;
  rep.fit_rms = F.rms;
  return F;
}

inline void write_energy_csv(std::ostream& o, const EnergyReport& r) {
  o << "t,M0,M1,M2\n";
  o << std::setprecision(12);
  for (std::size_t k = 0; k < r.t.size(); ++k) {
    o << r.t[k];
    for (int n = 0; n < 3; ++n) {
      o << ",";
      if (n <= r.Nmax) o << r.M[n][k];
    }
    o << "\n";
  }
  o << "# domain: " << r.domain << "\n# delta: " << r.delta << "\n# gamma0: " << r.g0 << "\n";
  o << "# slope: " << r.slope << "\n# fit_rms: " << r.fit_rms << "\n";
}

// ---- Picard sequence -------------------------------------------------------------

struct IterationState {
  int index = 0;
  double mu = 0;      // sup over slices of M^0(h^l - h^{l-1}), domains 2 and 3
  double ratio = std::numeric_limits<double>::quiet_NaN();  // mu_l / mu_{l-1}
  bool at_roundoff = false;  // mu_l below the roundoff floor of mu_0: ratio carries no information
};

inline constexpr double picard_roundoff_floor = 1e-11;

struct PicardResult {
  std::vector<IterationState> states;
  NullLattice last;
};

inline double sup_slice_energy(const NullLattice& L, const ModelSpec& s, const EnergyOptions& o = {}) {
  double m = 0;
  for (int dom : {2, 3}) {
    const auto rep = weighted_energy_M(energy_grid(L, dom, s, o), dom, 0, s.delta, s, o);
    for (double x : rep.M[0]) m = std::max(m, x);
  }
  return m;
}

inline PicardResult picard_iterate(const ModelSpec& s, const CauchyModeData& d, int l_max,
                                   const EnergyOptions& o = {.slices = 21, .along = 201, .t_min = 0.0025}) {
  PicardResult R;
  NullLattice prev;
  int bad = 0;
  for (int l = 0; l <= l_max; ++l) {
    NullLattice cur = picard_step(s, d, l == 0 ? nullptr : &prev);
    IterationState st;
    st.index = l;
    st.mu = l == 0 ? sup_slice_energy(cur, s, o) : sup_slice_energy(lattice_difference(cur, prev), s, o);
    if (l >= 1) {
      const double pm = R.states.back().mu;
      st.ratio = pm > 0 ? st.mu / pm : (st.mu > 0 ? std::numeric_limits<double>::infinity() : 0.0);
      st.at_roundoff = st.mu <= picard_roundoff_floor * R.states.front().mu;
      bad = st.ratio > 1 && !st.at_roundoff ? bad + 1 : 0;
      if (bad >= 3) fail(Errc::NoContraction, "Picard differences grew for 3 consecutive iterates");
    }
    R.states.push_back(st);
    prev = std::move(cur);
  }
  R.last = std::move(prev);
  return R;
}

}  // namespace radlab
