#pragma once
// Free wave equation, one spherical-harmonic mode at a time.
//
// With U = r^{(n-1)/2} u_l the mode equation is the 1+1 problem
//   U_tt - U_rr + V U = S,   V = (l(l+n-2) + (n-1)(n-3)/4) / r^2,
// and in Omega1..Omega3 the conformally rescaled field u~ is U itself.
// Two solvers: leapfrog in (t,r), and a diamond scheme on the null lattice
// (u,v) = (t-r, t+r) whose v direction is compactified so that the last
// column is null infinity.

#include <boost/math/interpolators/cardinal_quintic_b_spline.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>

#include "radlab/operators.hpp"

namespace radlab {

inline double mode_potential_coeff(int n, int l) {
  return angular_eigenvalue(l, n) + (n - 1.0) * (n - 3.0) / 4;
}

// smooth compactly supported bump on |x| < 1
inline double bump(double x) {
  const double y = 1 - x * x;
  return y > 0 ? std::exp(1 - 1 / y) : 0.0;
}

// ---- Cauchy data for one mode ---------------------------------------------

struct CauchyModeData {
  int n = 3, l = 0;
  double R = 1;  // profiles vanish for r >= R
  double dr = 1e-3;
  Vec u0, u1;  // u_l(r_j), r_j = j dr, j = 0..ceil(R/dr)

  // rescaled profiles U = r^{(n-1)/2} u and r-derivatives (k <= 2)
  double U0(double r, int k = 0) const { return rescaled(s0_, r, k); }
  double U1(double r, int k = 0) const { return rescaled(s1_, r, k); }
  double f0(double r) const { return eval(s0_, r, 0); }
  double f1(double r) const { return eval(s1_, r, 0); }
  double f0p(double r) const { return eval(s0_, r, 1); }

  void build() {
    if (u0.size() != u1.size() || u0.size() < 8) fail(Errc::InvalidInput, "mode data needs >= 8 radial samples");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    using S = boost::math::interpolators::cardinal_quintic_b_spline<double>;
    // even in r at the origin, flat at the support edge
    s0_ = std::make_shared<S>(u0, 0.0, dr, std::pair{0.0, nan}, std::pair{0.0, 0.0});
    s1_ = std::make_shared<S>(u1, 0.0, dr, std::pair{0.0, nan}, std::pair{0.0, 0.0});
  }
  bool zero() const {
    for (std::size_t j = 0; j < u0.size(); ++j)
      if (u0[j] != 0 || u1[j] != 0) return false;
    return true;
  }

 private:
  using Spline = boost::math::interpolators::cardinal_quintic_b_spline<double>;
  std::shared_ptr<Spline> s0_, s1_;

  double eval(const std::shared_ptr<Spline>& s, double r, int k) const {
    if (!s) fail(Errc::InvalidInput, "mode data not built");
    r = std::abs(r);
    if (r >= dr * static_cast<double>(u0.size() - 1)) return 0.0;
    return k == 0 ? (*s)(r) : k == 1 ? s->prime(r) : s->double_prime(r);
  }
  double rescaled(const std::shared_ptr<Spline>& s, double r, int k) const {
    const double e = (n - 1) / 2.0;
    if (r <= 0) {  // limits at the axis; f is even so f'(0) = 0
      if (k == 1 && n == 3) return eval(s, 0.0, 0);
      if (k == 2 && n == 5) return 2 * eval(s, 0.0, 0);
      if (k == 2 && n == 4) return std::numeric_limits<double>::infinity();
      return 0.0;
    }
    const double p = std::pow(r, e);
    const double f = eval(s, r, 0);
    if (k == 0) return p * f;
    const double fp = eval(s, r, 1);
    if (k == 1) return p * (fp + e * f / r);
    return p * (eval(s, r, 2) + 2 * e * fp / r + e * (e - 1) * f / (r * r));
  }
};

// sample u0, u1 on [0, R]
template <class F0, class F1>
CauchyModeData make_mode_data(int n, int l, double R, F0&& f0, F1&& f1, double dr = 1e-3) {
  if (n < 3 || l < 0 || !(R > 0) || !(dr > 0)) fail(Errc::InvalidInput, "bad mode data parameters");
  CauchyModeData d;
  d.n = n;
  d.l = l;
  d.R = R;
  d.dr = dr;
  const auto J = static_cast<std::size_t>(std::ceil(R / dr));
  for (std::size_t j = 0; j <= J; ++j) {
    const double r = dr * static_cast<double>(j);
    d.u0.push_back(r < R ? f0(r) : 0.0);
    d.u1.push_back(r < R ? f1(r) : 0.0);
  }
  d.build();
  return d;
}

// ||grad u0||^2 + ||u1||^2 of the mode (unit-normalised harmonic)
inline double mode_energy(const CauchyModeData& d) {
  const double lam = angular_eigenvalue(d.l, d.n);
  Vec f(d.u0.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double r = d.dr * static_cast<double>(j);
    const double rn1 = std::pow(r, d.n - 1), rn3 = d.n == 3 ? 1.0 : std::pow(r, d.n - 3);
    const double p = d.f0p(r);
    f[j] = p * p * rn1 + lam * d.u0[j] * d.u0[j] * rn3 + d.u1[j] * d.u1[j] * rn1;
  }
  return simpson(f, d.dr);
}

// ---- Cartesian leapfrog -------------------------------------------------------

struct CartesianOptions {
  double dr = 0.02;
  double courant = 1.0;  // dt / dr
  double r_max = 0;      // 0: t_end + R + margin
};

struct CartesianSummary {
  double dr = 0, dt = 0;
  std::size_t J = 0, steps = 0;
  double energy0 = 0, drift = 0;  // relative drift of the conserved discrete energy
};

// Leapfrog with the potential averaged over three levels,
//   (U+ - 2U + U-)/dt^2 = delta^2 U / dr^2 - V (U+ + 2U + U-)/4,
// stable for dt <= dr whatever V >= 0, and exact for V = 0 at dt = dr.
// observer(step, t, U) is called for every time level (U[j] at r = j dr).
template <class Obs>
CartesianSummary evolve_mode_cartesian(const CauchyModeData& d, double t_end, const CartesianOptions& o, Obs&& observer) {
  if (!(o.dr > 0) || !(t_end >= 0) || !(o.courant > 0)) fail(Errc::InvalidInput, "bad evolution parameters");
  if (o.courant > 1 + 1e-12) fail(Errc::CFLViolation, "Courant number above 1");
  const double c = mode_potential_coeff(d.n, d.l);
  const double dr = o.dr, dt = o.courant * dr, nu2 = o.courant * o.courant;
  const double margin = 4 * dr;
  const double r_max = o.r_max > 0 ? o.r_max : t_end + d.R + margin;
  if (r_max < t_end + d.R) fail(Errc::BoundaryContamination, "outer boundary is reached before t_end");
  const auto J = static_cast<std::size_t>(std::ceil(r_max / dr));
  Vec V(J + 1, 0.0), A0(J + 1), A1(J + 1), Um(J + 1, 0.0), U(J + 1, 0.0), Up(J + 1, 0.0), U1v(J + 1, 0.0);
  for (std::size_t j = 1; j < J; ++j) {
    const double r = dr * static_cast<double>(j);
    V[j] = c / (r * r);
    U[j] = d.U0(r);
    U1v[j] = d.U1(r);
  }
  auto Aop = [&](const Vec& w, Vec& out) {
    out[0] = out[J] = 0;
    for (std::size_t j = 1; j < J; ++j) out[j] = (w[j + 1] - 2 * w[j] + w[j - 1]) / (dr * dr) - V[j] * w[j];
  };
  // first step: Taylor series with the discrete operator (exact for the free equation at dt = dr)
  Aop(U, A0);
  Aop(U1v, A1);
  for (std::size_t j = 1; j < J; ++j)
    Up[j] = U[j] + dt * U1v[j] + dt * dt / 2 * A0[j] + dt * dt * dt / 6 * A1[j];
  auto energy = [&](const Vec& a, const Vec& b) {  // conserved between levels a (old) and b (new)
    double e = 0;
    for (std::size_t j = 0; j < J; ++j) {
      const double vt = (b[j] - a[j]) / dt, m = a[j] + b[j];
      e += vt * vt + (b[j + 1] - b[j]) * (a[j + 1] - a[j]) / (dr * dr) + V[j] * m * m / 4;
    }
    return e * dr;
  };
  CartesianSummary S;
  S.dr = dr;
  S.dt = dt;
  S.J = J;
  const auto steps = static_cast<std::size_t>(std::llround(std::ceil(t_end / dt - 1e-9)));
  S.steps = steps;
  observer(std::size_t{0}, 0.0, static_cast<const Vec&>(U));
  if (steps == 0) return S;
  observer(std::size_t{1}, dt, static_cast<const Vec&>(Up));
  S.energy0 = energy(U, Up);
  std::swap(Um, U);
  std::swap(U, Up);
  const double k2 = dt * dt / 4;
  for (std::size_t s = 2; s <= steps; ++s) {
    for (std::size_t j = 1; j < J; ++j)
      Up[j] = (2 * U[j] - Um[j] + nu2 * (U[j + 1] - 2 * U[j] + U[j - 1]) - k2 * V[j] * (2 * U[j] + Um[j])) /
              (1 + k2 * V[j]);
    const double e = energy(U, Up);
    if (S.energy0 > 0) S.drift = std::max(S.drift, std::abs(e - S.energy0) / S.energy0);
    std::swap(Um, U);
    std::swap(U, Up);
    observer(s, dt * static_cast<double>(s), static_cast<const Vec&>(U));
  }
  return S;
}

// ---- compactified null lattice --------------------------------------------------

// y is the lattice coordinate along v: v = y for y <= V1, v = V1^2 / (2 V1 - y) beyond,
// so y = 2 V1 is v = infinity (x = V1 / v = 0).
struct NullLattice {
  int n = 3, l = 0;
  double h = 0.02;
  int K = 0;       // u_i = (i - K) h
  int M = 0;       // V1 = M h
  std::size_t Nu = 0, Ny = 0;
  Vec U;           // Nu x Ny, NaN where not part of the lattice

  double V1() const { return M * h; }
  double u(std::size_t i) const { return (static_cast<double>(i) - K) * h; }
  double y(std::size_t j) const { return static_cast<double>(j) * h; }
  static double v_of_y(double y, double V1) {
    return y <= V1 ? y : (y >= 2 * V1 ? std::numeric_limits<double>::infinity() : V1 * V1 / (2 * V1 - y));
  }
  static double dv_dy(double y, double V1) { return y <= V1 ? 1.0 : V1 * V1 / ((2 * V1 - y) * (2 * V1 - y)); }
  double v(std::size_t j) const { return v_of_y(y(j), V1()); }
  double y_of_v(double v) const {
    const double a = V1();
    if (std::isinf(v)) return 2 * a;
    return v <= a ? v : 2 * a - a * a / v;
  }
  std::size_t j_start(std::size_t i) const {
    const auto ii = static_cast<long>(i);
    return static_cast<std::size_t>(ii < K ? K - ii - 1 : ii - K);
  }
  double operator()(std::size_t i, std::size_t j) const { return U[i * Ny + j]; }
  double& at(std::size_t i, std::size_t j) { return U[i * Ny + j]; }
  std::size_t scri() const { return Ny - 1; }

  // cubic Lagrange in (u, y); the stencil is shifted to valid nodes
  double sample_uy(double uu, double yy) const {
    const double su = uu / h + K, sy = yy / h;
    if (su < -1e-9 || su > static_cast<double>(Nu - 1) + 1e-9 || sy > static_cast<double>(Ny - 1) + 1e-9)
      fail(Errc::InterpolationOutOfRange, "point outside the null lattice");
    auto start = [](double s, std::size_t N) {
      long k = static_cast<long>(std::floor(s)) - 1;
      return static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(N) - 4));
    };
    const std::size_t i0 = start(su, Nu);
    std::size_t j0 = start(sy, Ny);
    for (std::size_t a = 0; a < 4; ++a) j0 = std::max(j0, j_start(i0 + a));
    if (j0 + 3 >= Ny) fail(Errc::InterpolationOutOfRange, "stencil leaves the null lattice");
    auto w = [](double s, std::size_t k0, double out[4]) {
      for (int a = 0; a < 4; ++a) {
        double p = 1;
        for (int b = 0; b < 4; ++b)
          if (b != a) p *= (s - static_cast<double>(k0 + b)) / static_cast<double>(a - b);
        out[a] = p;
      }
    };
    double wu[4], wy[4];
    w(su, i0, wu);
    w(sy, j0, wy);
    double s = 0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) s += wu[a] * wy[b] * (*this)(i0 + a, j0 + b);
    return s;
  }
  // value at a Cartesian point (t >= 0), r = inf allowed through v = inf
  double sample_tr(double t, double r) const { return sample_uy(t - r, y_of_v(t + r)); }
};

struct CompactOptions {
  double h = 0.02;
  double u_max = 0;  // last retarded time; 0: R + 2
  double V1 = 0;     // start of the compactified v range; 0: max(2 (u_max + R), 20)
};

// source policy for one lattice cell: returns U_N given the cell data
struct CellGeom {
  double d;    // du dy
  double cV;   // V v' / 4
  double cS;   // r^{-(n-1)/2} v' / 4
  double al;   // d_t U at the centre = al U_N + be
  double be;
  double vp;   // dv/dy at the centre
};

namespace detail {

inline double blowup_bound(double init) { return 1e3 * init; }

// march the lattice; cell(g, E, W, S, i, j) returns U_N
template <class Cell>
NullLattice march(const CauchyModeData& d, const CompactOptions& o, Cell&& cell) {
  if (!(o.h > 0)) fail(Errc::InvalidInput, "lattice step must be positive");
  NullLattice L;
  L.n = d.n;
  L.l = d.l;
  L.h = o.h;
  const double h = o.h;
  L.K = static_cast<int>(std::ceil(d.R / h)) + 2;
  const double u_max = o.u_max > 0 ? o.u_max : d.R + 2;
  const int Ipos = static_cast<int>(std::ceil(u_max / h));
  const double V1 = o.V1 > 0 ? o.V1 : std::max(2 * (u_max + d.R), 20.0);
  L.M = static_cast<int>(std::ceil(V1 / h));
  if (L.M <= Ipos + 1) fail(Errc::InvalidInput, "compactified range must start beyond the last retarded time");
  L.Nu = static_cast<std::size_t>(L.K + Ipos + 1);
  L.Ny = static_cast<std::size_t>(2 * L.M + 1);
  L.U.assign(L.Nu * L.Ny, std::numeric_limits<double>::quiet_NaN());
  const double c = mode_potential_coeff(d.n, d.l);
  const double Vy1 = L.V1();
  // data on t = 0 and t = -h/2 (Taylor in t to fifth order)
  double init = 0;
  auto LU = [&](auto&& F, double r) {  // (d_r^2 - V) F
    return F(r, 2) - c / (r * r) * F(r, 0);
  };
  auto Ud0 = [&](double r, int k) { return d.U0(r, k); };
  auto Ud1 = [&](double r, int k) { return d.U1(r, k); };
  for (std::size_t i = 0; i < L.Nu; ++i) {
    const std::size_t j0 = L.j_start(i);
    if (static_cast<int>(i) < L.K) {
      const double r0 = (L.v(j0 + 1) - L.u(i)) / 2, rm = (L.v(j0) - L.u(i)) / 2;
      L.at(i, j0 + 1) = d.U0(r0);
      const double k = -h / 2;
      double lu0 = 0, lu1 = 0;
      if (rm > 0 && rm < d.R) {
        lu0 = LU(Ud0, rm);
        lu1 = LU(Ud1, rm);
      }
      L.at(i, j0) = d.U0(rm) + k * d.U1(rm) + k * k / 2 * lu0 + k * k * k / 6 * lu1;
      init = std::max({init, std::abs(L(i, j0 + 1)), std::abs(L(i, j0))});
    } else {
      L.at(i, j0) = 0.0;  // origin
    }
  }
  // row 0 lies outside the domain of influence
  for (std::size_t j = L.j_start(0); j < L.Ny; ++j) L.at(0, j) = 0.0;
  const double bound = blowup_bound(init);
  for (std::size_t i = 1; i < L.Nu; ++i) {
    const std::size_t jf = L.j_start(i) + (static_cast<int>(i) < L.K ? 2 : 1);
    const double uc = L.u(i) - h / 2;
    for (std::size_t j = jf; j < L.Ny; ++j) {
      const double yc = L.y(j) - h / 2;
      const double vc = NullLattice::v_of_y(yc, Vy1), vp = NullLattice::dv_dy(yc, Vy1);
      const double rc = (vc - uc) / 2;
      CellGeom g;
      g.d = h * h;
      g.cV = c / (rc * rc) * vp / 4;
      g.cS = std::pow(rc, -(d.n - 1) / 2.0) * vp / 4;
      const double E = L(i - 1, j), W = L(i, j - 1), S = L(i - 1, j - 1);
      if (g.d * g.cV > 1 && yc <= Vy1 && j + 1 < L.Ny) {
        // next to the origin the cell average of V r^-2 is too crude: use U ~ r^k (k = l + (n-1)/2)
        // against the node one step further out on the same t level
        const double rN = (L.v(j) - L.u(i)) / 2;
        L.at(i, j) = L(i - 1, j + 1) * std::pow(rN / (rN + h), d.l + (d.n - 1) / 2.0);
        continue;
      }
      // d_t U = U_u + U_y / v' at the centre
      g.al = 1 / (2 * h) + 1 / (2 * h * vp);
      g.be = (-E + W - S) / (2 * h) + (E - W - S) / (2 * h * vp);
      g.vp = vp;
      const double Un = cell(g, E, W, S, i, j);
      if (!std::isfinite(Un) || (init > 0 && std::abs(Un) > bound))
        fail(Errc::BlowupDetected, "field exceeds 1e3 times its initial size at u=" + std::to_string(L.u(i)) + " y=" + std::to_string(L.y(j)));
      L.at(i, j) = Un;
    }
  }
  return L;
}

}  // namespace detail

// linear free evolution of one mode on the compactified lattice
inline NullLattice evolve_mode_compactified(const CauchyModeData& d, const CompactOptions& o = {}) {
  return detail::march(d, o, [](const CellGeom& g, double E, double W, double S, std::size_t, std::size_t) {
    const double q = g.d * g.cV / 4;  // potential averaged over the four corners
    return (E + W - S - q * (E + W + S)) / (1 + q);
  });
}

// re-sample the lattice on a chart grid (Omega1: (s,rho), Omega2: (a,b), Omega3: (tau,rho))
inline ModeGrid lattice_to_chart(const NullLattice& L, Chart c, Axis a1, Axis a2) {
  return ModeGrid::sample(c, L.n, L.l, std::move(a1), std::move(a2), [&](double q1, double q2) {
    double t = 0, r = 0;
    switch (c) {
      case Chart::Omega1: r = 1 / q2; t = q1 * r; break;
      case Chart::Omega2:
        if (q1 == 0) return L.sample_uy(-1 / q2, 2 * L.V1());
        r = 1 / (q1 * q2);
        t = (1 - q1) * r;
        break;
      case Chart::Omega3:
        if (q2 == 0) return L.sample_uy(q1, 2 * L.V1());
        r = 1 / q2;
        t = q1 + r;
        break;
      default: fail(Errc::InvalidInput, "lattice covers Omega1..Omega3 only");
    }
    if (t < 0) fail(Errc::OutOfDomain, "chart point before the initial slice");
    return L.sample_tr(t, r);
  });
}

// ---- radiation field ------------------------------------------------------------

enum class RadMethod { CartesianLimit, Compactified };
enum class RadKind { TauDerivative, Field };  // d_tau u~ |scri  or  u~ |scri

struct RadiationMode {
  int l = 0, m = 0;
  Vec values;
};

struct RadiationField {
  int n = 3;
  double tau0 = 0, dtau = 0.01;
  std::size_t Ntau = 0;
  RadKind kind = RadKind::TauDerivative;
  std::vector<RadiationMode> modes;

  double tau(std::size_t k) const { return tau0 + dtau * static_cast<double>(k); }
  // L^2(R x S^{n-1}) norm squared: orthonormal harmonics make it a sum over modes
  double norm2() const {
    double s = 0;
    for (const auto& m : modes) {
      Vec f(m.values.size());
      for (std::size_t k = 0; k < f.size(); ++k) f[k] = m.values[k] * m.values[k];
      s += simpson(f, dtau);
    }
    return s;
  }
  double sample(std::size_t mode, double t) const {
    const Vec& f = modes.at(mode).values;
    const double s = (t - tau0) / dtau;
    if (s < 0 || s > static_cast<double>(Ntau - 1)) return 0.0;
    std::ptrdiff_t k = static_cast<std::ptrdiff_t>(std::floor(s)) - 1;
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(Ntau) - 4);
    double out = 0;
    for (int a = 0; a < 4; ++a) {
      double p = 1;
      for (int b = 0; b < 4; ++b)
        if (b != a) p *= (s - static_cast<double>(k + b)) / static_cast<double>(a - b);
      out += p * f[static_cast<std::size_t>(k + a)];
    }
    return out;
  }
};

struct RadiationOptions {
  double tau_min = -4, tau_max = 4;
  RadKind kind = RadKind::TauDerivative;
  // Cartesian limit
  double dr = 0.02;
  double r_ext = 0;          // 0: 60 + 40 l
  double converge_tol = 1e-2;  // relative disagreement of successive extrapolations
  // compactified
  double h = 0.01;
};

namespace detail {

// 4th-order first derivative on a uniform series (2nd order at the ends)
inline Vec diff4(const Vec& f, double h) {
  const std::size_t N = f.size();
  Vec g(N, 0.0);
  if (N < 5) fail(Errc::InsufficientResolution, "need >= 5 samples to differentiate");
  for (std::size_t k = 0; k < N; ++k) {
    if (k >= 2 && k + 2 < N) g[k] = (f[k - 2] - 8 * f[k - 1] + 8 * f[k + 1] - f[k + 2]) / (12 * h);
    else if (k == 0) g[k] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
    else if (k + 1 == N) g[k] = (3 * f[k] - 4 * f[k - 1] + f[k - 2]) / (2 * h);
    else g[k] = (f[k + 1] - f[k - 1]) / (2 * h);
  }
  return g;
}

inline Vec cartesian_limit(const CauchyModeData& d, const RadiationOptions& o, double& dtau, double& tau0) {
  const int p = 1;
  const double dr = o.dr, dt = dr;
  const double r_ext = o.r_ext > 0 ? o.r_ext : 60 + 40.0 * d.l;
  const double frac[3] = {0.5, std::sqrt(0.5), 1.0};
  std::size_t jr[3];
  double rk[3];
  for (int k = 0; k < 3; ++k) {
    jr[k] = static_cast<std::size_t>(std::llround(frac[k] * r_ext / dr));
    rk[k] = dr * static_cast<double>(jr[k]);
  }
  const long m0 = static_cast<long>(std::floor(o.tau_min / dt)), m1 = static_cast<long>(std::ceil(o.tau_max / dt));
  if (rk[0] + m0 * dt < 4 * dt) fail(Errc::InvalidInput, "extraction radii too small for the tau range");
  const std::size_t Nt = static_cast<std::size_t>(m1 - m0 + 1);
  tau0 = m0 * dt;
  dtau = dt;
  // series of U at the three radii over the needed time window (+2 levels each side)
  std::vector<Vec> ser(3, Vec(Nt + 4, 0.0));
  long first[3];
  for (int k = 0; k < 3; ++k) first[k] = m0 + static_cast<long>(jr[k]) * p - 2;
  const double t_end = (m1 + 2) * dt + rk[2];
  evolve_mode_cartesian(d, t_end, CartesianOptions{dr, 1.0, 0}, [&](std::size_t s, double, const Vec& U) {
    for (int k = 0; k < 3; ++k) {
      const long idx = static_cast<long>(s) - first[k];
      if (idx >= 0 && idx < static_cast<long>(Nt + 4)) ser[k][static_cast<std::size_t>(idx)] = U[jr[k]];
    }
  });
  std::vector<Vec> val(3, Vec(Nt));
  for (int k = 0; k < 3; ++k) {
    if (o.kind == RadKind::Field) {
      for (std::size_t m = 0; m < Nt; ++m) val[k][m] = ser[k][m + 2];
    } else {
      const Vec g = diff4(ser[k], dt);
      for (std::size_t m = 0; m < Nt; ++m) val[k][m] = g[m + 2];
    }
  }
  // quadratic extrapolation in x = 1/r to x = 0; compare with the linear one from the two outer radii
  const double x[3] = {1 / rk[0], 1 / rk[1], 1 / rk[2]};
  double Lw[3];
  for (int a = 0; a < 3; ++a) {
    double w = 1;
    for (int b = 0; b < 3; ++b)
      if (b != a) w *= (0 - x[b]) / (x[a] - x[b]);
    Lw[a] = w;
  }
  const double l1 = x[2] / (x[2] - x[1]), l2 = x[1] / (x[1] - x[2]);
  Vec out(Nt);
  double dmax = 0, vmax = 0;
  for (std::size_t m = 0; m < Nt; ++m) {
    out[m] = Lw[0] * val[0][m] + Lw[1] * val[1][m] + Lw[2] * val[2][m];
    const double lin = l1 * val[1][m] + l2 * val[2][m];
    dmax = std::max(dmax, std::abs(out[m] - lin));
    vmax = std::max(vmax, std::abs(out[m]));
  }
  if (vmax > 0 && dmax > o.converge_tol * vmax)
    fail(Errc::NotConverged, "1/r extrapolation disagrees between radii (" + std::to_string(dmax / vmax) + ")");
  return out;
}

inline Vec compactified_trace(const CauchyModeData& d, const RadiationOptions& o, double& dtau, double& tau0) {
  CompactOptions co;
  co.h = o.h;
  co.u_max = std::max(o.tau_max + 3 * o.h, 3 * o.h);
  const NullLattice L = evolve_mode_compactified(d, co);
  // scri trace on the lattice u-nodes
  Vec F(L.Nu);
  for (std::size_t i = 0; i < L.Nu; ++i) F[i] = L(i, L.scri());
  const Vec G = o.kind == RadKind::Field ? F : diff4(F, L.h);
  const long m0 = static_cast<long>(std::floor(o.tau_min / L.h)), m1 = static_cast<long>(std::ceil(o.tau_max / L.h));
  tau0 = m0 * L.h;
  dtau = L.h;
  Vec out;
  for (long m = m0; m <= m1; ++m) {
    const long i = m + L.K;
    out.push_back(i >= 0 && i < static_cast<long>(L.Nu) ? G[static_cast<std::size_t>(i)] : 0.0);
  }
  return out;
}

}  // namespace detail

struct ModeComponent {
  int m = 0;  // harmonic index within degree l
  CauchyModeData d;
};
using SphericalData = std::vector<ModeComponent>;

inline RadiationField radiation_field(const CauchyModeData& d, RadMethod method, const RadiationOptions& o = {},
                                      int m = 0) {
  RadiationField R;
  R.n = d.n;
  R.kind = o.kind;
  RadiationMode M;
  M.l = d.l;
  M.m = m;
  M.values = method == RadMethod::CartesianLimit ? detail::cartesian_limit(d, o, R.dtau, R.tau0)
                                                 : detail::compactified_trace(d, o, R.dtau, R.tau0);
  R.Ntau = M.values.size();
  R.modes.push_back(std::move(M));
  return R;
}

inline RadiationField radiation_field(const SphericalData& data, RadMethod method, const RadiationOptions& o = {}) {
  if (data.empty()) fail(Errc::InvalidInput, "no modes");
  RadiationField R;
  for (const auto& c : data) {
    RadiationField r1 = radiation_field(c.d, method, o, c.m);
    if (R.modes.empty()) R = std::move(r1);
    else {
      if (r1.Ntau != R.Ntau || r1.dtau != R.dtau) fail(Errc::InvalidInput, "modes on different tau grids");
      R.modes.push_back(std::move(r1.modes.front()));
    }
  }
  return R;
}

// (u0, u1) -> (u0, -u1)
inline CauchyModeData reverse_time(const CauchyModeData& d) {
  CauchyModeData r = d;
  for (double& x : r.u1) x = -x;
  r.build();
  return r;
}

// past radiation field: R-(tau) = -(d_tau u~ at past null infinity), obtained from the
// time-reversed data; returned on the mirrored tau grid
inline RadiationField past_radiation_field(const CauchyModeData& d, RadMethod method, RadiationOptions o = {}) {
  std::swap(o.tau_min, o.tau_max);
  o.tau_min = -o.tau_min;
  o.tau_max = -o.tau_max;
  RadiationField R = radiation_field(reverse_time(d), method, o);
  Vec& f = R.modes[0].values;
  std::reverse(f.begin(), f.end());
  if (R.kind == RadKind::TauDerivative)
    for (double& x : f) x = -x;
  R.tau0 = -R.tau(R.Ntau - 1);
  return R;
}

inline double data_energy(const SphericalData& data) {
  double e = 0;
  for (const auto& c : data) e += mode_energy(c.d);
  return e;
}

// field-file layout with chart=Scri: one row per tau node, one column per mode;
// l is the degree of the first mode
inline void write_radiation(std::ostream& o, const RadiationField& R) {
  if (R.modes.empty()) fail(Errc::InvalidInput, "radiation field has no modes");
  char buf[64];
  o << "#radlab-field v1\nn=" << R.n << "\nchart=Scri\nl=" << R.modes[0].l << "\n";
  o << "shape=" << R.Ntau << " " << R.modes.size() << "\n";
  o << "coords=tau mode\n";
  std::snprintf(buf, sizeof buf, "%.17g 0", R.tau0);
  o << "origin=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g 1", R.dtau);
  o << "spacing=" << buf << "\n";
  for (std::size_t k = 0; k < R.Ntau; ++k) {
    for (std::size_t q = 0; q < R.modes.size(); ++q) {
      std::snprintf(buf, sizeof buf, "%.17g", R.modes[q].values[k]);
      o << (q ? " " : "") << buf;
    }
    o << "\n";
  }
}

inline void write_radiation(const std::string& path, const RadiationField& R) {
  std::ofstream f(path);
  if (!f) fail(Errc::Io, "cannot write " + path);
  write_radiation(f, R);
}

// relative L^2 distance of two radiation fields (second resampled on the first's tau grid)
inline double radiation_rel_l2(const RadiationField& a, const RadiationField& b) {
  if (a.modes.size() != b.modes.size()) fail(Errc::InvalidInput, "mode count mismatch");
  double num = 0, den = 0;
  for (std::size_t q = 0; q < a.modes.size(); ++q)
    for (std::size_t k = 0; k < a.Ntau; ++k) {
      const double x = a.modes[q].values[k], y = b.sample(q, a.tau(k));
      num += (x - y) * (x - y);
      den += x * x;
    }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

// ---- isometry --------------------------------------------------------------------

struct IsometryStats {
  Vec kappa;
  double mean = 0, cv = 0;
};

inline IsometryStats isometry_check(const std::vector<SphericalData>& samples, RadMethod method,
                                    const RadiationOptions& o = {}) {
  IsometryStats S;
  for (const auto& d : samples) {
    const double e = data_energy(d);
    if (!(e > 0)) fail(Errc::DegenerateData, "data with zero energy");
    S.kappa.push_back(radiation_field(d, method, o).norm2() / e);
  }
  const double n = static_cast<double>(S.kappa.size());
  for (double k : S.kappa) S.mean += k / n;
  double var = 0;
  for (double k : S.kappa) var += (k - S.mean) * (k - S.mean) / n;
  S.cv = S.kappa.size() > 1 ? std::sqrt(var) / S.mean : 0.0;
  return S;
}

// ---- inversion for n = 3, l = 0 --------------------------------------------------
// With odd extensions of U0 = r u0, U1 = r u1:  R(tau) = (U1(-tau) - U0'(-tau)) / 2.
inline CauchyModeData invert_radial_n3(const RadiationField& R, double dr = 0) {
  if (R.n != 3 || R.modes.size() != 1 || R.modes[0].l != 0 || R.kind != RadKind::TauDerivative)
    fail(Errc::InvalidInput, "inversion needs a single n=3, l=0 tau-derivative field");
  const Vec& f = R.modes[0].values;
  double fmax = 0;
  for (double x : f) fmax = std::max(fmax, std::abs(x));
  if (fmax > 0 && (std::abs(f.front()) > 1e-8 * fmax || std::abs(f.back()) > 1e-8 * fmax))
    fail(Errc::NonDecaying, "radiation field does not decay at the ends of its tau range");
  const double T = std::max(std::abs(R.tau0), std::abs(R.tau(R.Ntau - 1)));
  if (dr <= 0) dr = R.dtau;
  const auto J = static_cast<std::size_t>(std::ceil(T / dr)) + 1;
  Vec U0(J + 1, 0.0), U1(J + 1, 0.0), D(J + 1, 0.0);
  for (std::size_t j = 0; j <= J; ++j) {
    const double s = dr * static_cast<double>(j);
    const double a = R.sample(0, -s), b = R.sample(0, s);
    U1[j] = a - b;
    D[j] = -(a + b);  // U0'
  }
  for (std::size_t j = 1; j <= J; ++j) {  // U0 = int_0^r U0'  (Simpson on the half step via cubic midpoint)
    const double s = dr * (static_cast<double>(j) - 0.5);
    const double mid = -(R.sample(0, -s) + R.sample(0, s));
    U0[j] = U0[j - 1] + dr / 6 * (D[j - 1] + 4 * mid + D[j]);
  }
  CauchyModeData d;
  d.n = 3;
  d.l = 0;
  d.dr = dr;
  d.R = dr * static_cast<double>(J);
  d.u0.resize(J + 1);
  d.u1.resize(J + 1);
  d.u0[0] = D[0];                              // lim U0 / r
  d.u1[0] = (4 * U1[1] - U1[std::min<std::size_t>(2, J)]) / (2 * dr);  // lim U1 / r
  for (std::size_t j = 1; j <= J; ++j) {
    const double r = dr * static_cast<double>(j);
    d.u0[j] = U0[j] / r;
    d.u1[j] = U1[j] / r;
  }
  d.u0.back() = d.u1.back() = 0.0;
  d.build();
  return d;
}

// ---- n = 3 spherical harmonic decomposition -----------------------------------

// real orthonormal harmonic on S^2; m < 0 uses sin, m > 0 cos
inline double real_ylm(int l, int m, double theta, double phi) {
  const int am = std::abs(m);
  const double p = std::sph_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), theta);
  if (m == 0) return p;
  const double s = (am % 2 ? -1.0 : 1.0) * std::sqrt(2.0);  // undo the Condon-Shortley sign
  return m > 0 ? s * p * std::cos(am * phi) : s * p * std::sin(am * phi);
}

// samples on r_k x (Gauss-Legendre in cos theta) x (uniform phi); index (k, a, b)
struct SphericalGrid {
  double dr = 0.01;
  std::size_t Nr = 0, Nth = 0, Nph = 0;
  Vec cth, wth;
  Vec f;

  static SphericalGrid make(double dr, std::size_t Nr, std::size_t Nth, std::size_t Nph) {
    SphericalGrid g;
    g.dr = dr;
    g.Nr = Nr;
    g.Nth = Nth;
    g.Nph = Nph;
    gauss_legendre(static_cast<int>(Nth), g.cth, g.wth);
    g.f.assign(Nr * Nth * Nph, 0.0);
    return g;
  }
  double r(std::size_t k) const { return dr * static_cast<double>(k); }
  double theta(std::size_t a) const { return std::acos(cth[a]); }
  double phi(std::size_t b) const { return 2 * std::numbers::pi * static_cast<double>(b) / static_cast<double>(Nph); }
  double& at(std::size_t k, std::size_t a, std::size_t b) { return f[(k * Nth + a) * Nph + b]; }
  double operator()(std::size_t k, std::size_t a, std::size_t b) const { return f[(k * Nth + a) * Nph + b]; }

  template <class F>  // F(x, y, z)
  void fill(F&& fn) {
    for (std::size_t k = 0; k < Nr; ++k)
      for (std::size_t a = 0; a < Nth; ++a)
        for (std::size_t b = 0; b < Nph; ++b) {
          const double rr = r(k), st = std::sqrt(1 - cth[a] * cth[a]), ph = phi(b);
          at(k, a, b) = fn(rr * st * std::cos(ph), rr * st * std::sin(ph), rr * cth[a]);
        }
  }
};

struct RadialCoeffs {
  int l = 0, m = 0;
  Vec c;  // coefficient at each radius
};

struct Decomposition {
  int l_max = 0;
  std::vector<RadialCoeffs> modes;
  double recon_rel_err = 0;
};

inline Decomposition decompose_modes(const SphericalGrid& g, int l_max) {
  if (l_max < 0) fail(Errc::InvalidInput, "l_max must be >= 0");
  if (g.Nth < static_cast<std::size_t>(l_max + 1) || g.Nph < static_cast<std::size_t>(2 * l_max + 1))
    fail(Errc::AliasRisk, "angular grid too coarse for l_max");
  Decomposition D;
  D.l_max = l_max;
  const double wph = 2 * std::numbers::pi / static_cast<double>(g.Nph);
  for (int l = 0; l <= l_max; ++l)
    for (int m = -l; m <= l; ++m) {
      RadialCoeffs rc{l, m, Vec(g.Nr, 0.0)};
      for (std::size_t a = 0; a < g.Nth; ++a)
        for (std::size_t b = 0; b < g.Nph; ++b) {
          const double y = real_ylm(l, m, g.theta(a), g.phi(b)) * g.wth[a] * wph;
          for (std::size_t k = 0; k < g.Nr; ++k) rc.c[k] += y * g(k, a, b);
        }
      D.modes.push_back(std::move(rc));
    }
  double num = 0, den = 0;
  for (std::size_t k = 0; k < g.Nr; ++k)
    for (std::size_t a = 0; a < g.Nth; ++a)
      for (std::size_t b = 0; b < g.Nph; ++b) {
        double s = 0;
        for (const auto& rc : D.modes) s += rc.c[k] * real_ylm(rc.l, rc.m, g.theta(a), g.phi(b));
        num += (s - g(k, a, b)) * (s - g(k, a, b));
        den += g(k, a, b) * g(k, a, b);
      }
  D.recon_rel_err = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
  return D;
}

// pair the decompositions of u0 and u1 into per-mode Cauchy data (n = 3)
inline SphericalData modes_from_decomposition(const Decomposition& d0, const Decomposition& d1, double dr,
                                              double cutoff = 1e-12) {
  if (d0.modes.size() != d1.modes.size()) fail(Errc::InvalidInput, "decompositions differ");
  SphericalData out;
  for (std::size_t q = 0; q < d0.modes.size(); ++q) {
    double mx = 0;
    for (std::size_t k = 0; k < d0.modes[q].c.size(); ++k)
      mx = std::max({mx, std::abs(d0.modes[q].c[k]), std::abs(d1.modes[q].c[k])});
    if (mx <= cutoff) continue;
    CauchyModeData d;
    d.n = 3;
    d.l = d0.modes[q].l;
    d.dr = dr;
    d.u0 = d0.modes[q].c;
    d.u1 = d1.modes[q].c;
    d.R = dr * static_cast<double>(d.u0.size() - 1);
    d.build();
    out.push_back({d0.modes[q].m, std::move(d)});
  }
  return out;
}

// ---- Hoelder exponent at null infinity --------------------------------------------

struct HolderFit {
  double slope = 0, constant = 0, rms = 0;
  bool exact = false;  // all increments vanish
};

// grid in Omega3 coordinates (tau, rho) whose rho axis starts at rho = 0
inline HolderFit holder_fit(const ModeGrid& g, double delta_expected = 1.0) {
  (void)delta_expected;
  if (g.chart != Chart::Omega3 || g.ax[1].map != AxisMap::Identity || std::abs(g.q2(0)) > 1e-14)
    fail(Errc::InvalidInput, "holder_fit needs an Omega3 grid with a uniform rho axis from 0");
  const double r1 = g.q2(1);
  std::size_t jmax = 0;
  for (std::size_t j = 1; j < g.N2(); ++j)
    if (g.q2(j) <= 10 * r1 * (1 + 1e-12)) jmax = j;
  if (jmax < 9) fail(Errc::InsufficientResolution, "grid does not resolve a decade of rho");
  double scale = 0;
  for (double x : g.v) scale = std::max(scale, std::abs(x));
  Vec lx, ly;
  bool exact = true;
  for (std::size_t j = 1; j <= jmax; ++j) {
    double m = 0;
    for (std::size_t i = 0; i < g.N1(); ++i) m = std::max(m, std::abs(g(i, j) - g(i, 0)));
    if (m > 1e-13 * std::max(scale, 1e-300)) exact = false;
    lx.push_back(std::log(g.q2(j)));
    ly.push_back(std::log(std::max(m, 1e-300)));
  }
  HolderFit H;
  if (exact || scale == 0) {
    H.exact = true;
    H.slope = std::numeric_limits<double>::infinity();
    return H;
  }
  const auto f = fit_line(lx, ly);
  H.slope = f.slope;
  H.constant = std::exp(f.intercept);
  H.rms = f.rms;
  return H;
}

}  // namespace radlab
