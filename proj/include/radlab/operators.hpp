#pragma once
// Conformal wave operators per chart, gamma0, commutators with b-fields,
// time-like functions and the energy-flux / bulk quadratic forms.
//
// Every chart is treated as a warped product g2(q1,q2) + W(q1,q2)^2 dtheta^2:
//   Omega0 (t,r)   Omega1 (s,rho)   Omega2 (a,b)   Omega3 (tau,rho)
//   Omega4 (abar,bbar)   Omega5 (phi,Y) with Y = |y|.
// The angular Laplacian acts on mode l as -l(l+n-2).

#include <array>
#include <functional>

#include "radlab/modegrid.hpp"
#include "radlab/rng.hpp"

namespace radlab {

inline double angular_eigenvalue(int l, int n) { return static_cast<double>(l) * (l + n - 2); }

// A11 d1^2 + 2 A12 d1 d2 + A22 d2^2 + B1 d1 + B2 d2 + C Delta_theta
struct OpCoeffs {
  double A11 = 0, A12 = 0, A22 = 0, B1 = 0, B2 = 0, C = 0;
};

inline OpCoeffs chart_operator(Chart c, double q1, double q2, int n) {
  const double nn = n;
  switch (c) {
    case Chart::Omega0: return {-1, 0, 1, 0, (nn - 1) / q2, 1 / (q2 * q2)};
    case Chart::Omega1: return {q1 * q1 - 1, q2 * q1, q2 * q2, 2 * q1, 2 * q2, 1};
    case Chart::Omega2: return {q1 * (q1 - 2), q2, 0, 2 * (q1 - 1), 0, 1};
    case Chart::Omega3: return {0, 1, q2 * q2, 0, 2 * q2, 1};
    case Chart::Omega4: {
      const double w = 1 - q1;
      return {q1 * (2 - q1), -q2, 0, ((nn + 1) * q1 * q1 - 2 * (nn + 1) * q1 + 2) / w, q2 * (nn - 1) / w, 1 / (w * w)};
    }
    case Chart::Omega5:
      return {-q1 * q1, -q2 * q1, 1 - q2 * q2, -(nn + 1) * q1, ((nn - 1) - (nn + 1) * q2 * q2) / q2, 1 / (q2 * q2)};
    default: fail(Errc::InvalidInput, "no operator on this label");
  }
}

// inverse metric of g2, sqrt|det g2|, sphere warp W
struct ChartMetric {
  double g11 = 0, g12 = 0, g22 = 0, sqrtg = 1, W = 1;
  // W derivatives (needed for the angular Hessian term)
  double dW1 = 0, dW2 = 0;
};

inline ChartMetric chart_metric(Chart c, double q1, double q2) {
  switch (c) {
    case Chart::Omega0: return {-1, 0, 1, 1, q2, 0, 1};
    case Chart::Omega1: return {q1 * q1 - 1, q2 * q1, q2 * q2, 1 / q2, 1, 0, 0};
    case Chart::Omega2: return {q1 * (q1 - 2), q2, 0, 1 / q2, 1, 0, 0};
    case Chart::Omega3: return {0, 1, q2 * q2, 1, 1, 0, 0};
    case Chart::Omega4: return {q1 * (2 - q1), -q2, 0, 1 / q2, 1 - q1, -1, 0};
    case Chart::Omega5: return {-q1 * q1, -q2 * q1, 1 - q2 * q2, 1 / q1, q2, 0, 1};
    default: fail(Errc::InvalidInput, "no metric on this label");
  }
}

inline double gamma0(Chart c, int n) {
  switch (c) {
    case Chart::Omega0: return 0.0;
    case Chart::Omega1:
    case Chart::Omega2:
    case Chart::Omega3: return -(n - 1.0) * (n - 3.0) / 4;
    case Chart::Omega4:
    case Chart::Omega5: return -(n * n - 1.0) / 4;
    default: fail(Errc::InvalidInput, "no gamma0 on this label");
  }
}

// principal symbol: one negative direction in (q1,q2), positive angular part
inline bool is_lorentzian(Chart c, double q1, double q2, int n) {
  const auto o = chart_operator(c, q1, q2, n);
  return o.A11 * o.A22 - o.A12 * o.A12 < 0 && o.C > 0;
}

// ---- operator on a mode grid ---------------------------------------------

inline ModeGrid dalembertian_apply(const ModeGrid& g, int l, int n) {
  if (l < 0) fail(Errc::InvalidInput, "negative mode index");
  if (g.N1() < 5 || g.N2() < 5) fail(Errc::InsufficientResolution, "operator needs >= 5 nodes per axis");
  const ModeGrid f11 = d2_q(g, 0), f22 = d2_q(g, 1), f12 = d12_q(g), f1 = d_q(g, 0), f2 = d_q(g, 1);
  const double lam = angular_eigenvalue(l, n);
  ModeGrid out = g.like();
  for (std::size_t i = 0; i < g.N1(); ++i)
    for (std::size_t j = 0; j < g.N2(); ++j) {
      const auto o = chart_operator(g.chart, g.q1(i), g.q2(j), n);
      out(i, j) = o.A11 * f11(i, j) + 2 * o.A12 * f12(i, j) + o.A22 * f22(i, j) + o.B1 * f1(i, j) +
                  o.B2 * f2(i, j) - o.C * lam * g(i, j);
    }
  return out;
}

inline ModeGrid dalembertian_apply(Chart chart, const ModeGrid& g, int l, int n) {
  if (chart != g.chart) fail(Errc::InvalidInput, "grid chart differs from requested chart");
  return dalembertian_apply(g, l, n);
}

// ---- operators on callables (for commutators) -----------------------------
//
// f(q1, q2, theta): theta is any nonzero vector; the field is its degree-0
// extension, so angular derivatives are Euclidean derivatives at |theta| = 1.

using PolarFn = std::function<double(double, double, const Vec&)>;

struct StencilSpec {
  Axis a1, a2;        // coordinate maps (origin/spacing unused here)
  double h1, h2, ha;  // steps in xi1, xi2 and angle
};

namespace detail {

struct XiEval {
  const PolarFn& f;
  const StencilSpec& S;
  double operator()(double x1, double x2, const Vec& th) const { return f(S.a1.to_q(x1), S.a2.to_q(x2), th); }
};

}  // namespace detail

inline double dq1_fd(const PolarFn& f, double q1, double q2, const Vec& th, const StencilSpec& S) {
  const double x = S.a1.to_xi(q1);
  return (f(S.a1.to_q(x + S.h1), q2, th) - f(S.a1.to_q(x - S.h1), q2, th)) / (2 * S.h1) / S.a1.dq(x);
}
inline double dq2_fd(const PolarFn& f, double q1, double q2, const Vec& th, const StencilSpec& S) {
  const double x = S.a2.to_xi(q2);
  return (f(q1, S.a2.to_q(x + S.h2), th) - f(q1, S.a2.to_q(x - S.h2), th)) / (2 * S.h2) / S.a2.dq(x);
}

inline double laplace_theta_fd(const PolarFn& f, double q1, double q2, const Vec& th, const StencilSpec& S) {
  const double f0 = f(q1, q2, th);
  double s = 0;
  Vec p = th;
  for (std::size_t k = 0; k < th.size(); ++k) {
    p[k] = th[k] + S.ha;
    const double fp = f(q1, q2, p);
    p[k] = th[k] - S.ha;
    const double fm = f(q1, q2, p);
    p[k] = th[k];
    s += (fp - 2 * f0 + fm);
  }
  return s / (S.ha * S.ha);
}

inline double box_fd(Chart c, int n, const PolarFn& f, double q1, double q2, const Vec& th, const StencilSpec& S) {
  const double x1 = S.a1.to_xi(q1), x2 = S.a2.to_xi(q2);
  detail::XiEval F{f, S};
  const double h1 = S.h1, h2 = S.h2;
  const double f00 = F(x1, x2, th);
  const double fp0 = F(x1 + h1, x2, th), fm0 = F(x1 - h1, x2, th);
  const double f0p = F(x1, x2 + h2, th), f0m = F(x1, x2 - h2, th);
  const double fx1 = (fp0 - fm0) / (2 * h1), fx11 = (fp0 - 2 * f00 + fm0) / (h1 * h1);
  const double fx2 = (f0p - f0m) / (2 * h2), fx22 = (f0p - 2 * f00 + f0m) / (h2 * h2);
  const double fx12 = (F(x1 + h1, x2 + h2, th) - F(x1 + h1, x2 - h2, th) - F(x1 - h1, x2 + h2, th) +
                       F(x1 - h1, x2 - h2, th)) / (4 * h1 * h2);
  const double a1 = S.a1.dq(x1), b1 = S.a1.d2q(x1), a2 = S.a2.dq(x2), b2 = S.a2.d2q(x2);
  const double d1 = fx1 / a1, d2 = fx2 / a2;
  const double d11 = (fx11 - b1 / a1 * fx1) / (a1 * a1), d22 = (fx22 - b2 / a2 * fx2) / (a2 * a2);
  const double d12 = fx12 / (a1 * a2);
  const auto o = chart_operator(c, q1, q2, n);
  return o.A11 * d11 + 2 * o.A12 * d12 + o.A22 * d22 + o.B1 * d1 + o.B2 * d2 +
         o.C * laplace_theta_fd(f, q1, q2, th, S);
}

enum class CommutatorField { Z00, Zij, DTau, RhoDRho };

inline const char* field_name(CommutatorField z) {
  switch (z) {
    case CommutatorField::Z00: return "Z00";
    case CommutatorField::Zij: return "Zij";
    case CommutatorField::DTau: return "d_tau";
    case CommutatorField::RhoDRho: return "rho d_rho";
  }
  return "?";
}

// Z00 in the coordinate frame of each chart's (q1,q2)
inline std::array<double, 2> z00_coeffs(Chart c, double q1, double q2) {
  switch (c) {
    case Chart::Omega0: return {q1, q2};
    case Chart::Omega1: return {0, -q2};
    case Chart::Omega2: return {0, -q2};
    case Chart::Omega3: return {q1, -q2};
    case Chart::Omega4: return {0, -q2};
    case Chart::Omega5: return {-q1, 0};
    default: fail(Errc::InvalidInput, "no Z00 on this label");
  }
}

inline double apply_field_fd(Chart c, CommutatorField Z, const PolarFn& f, double q1, double q2, const Vec& th,
                             const StencilSpec& S, std::size_t i = 0, std::size_t j = 1) {
  switch (Z) {
    case CommutatorField::Z00: {
      const auto k = z00_coeffs(c, q1, q2);
      double s = 0;
      if (k[0] != 0) s += k[0] * dq1_fd(f, q1, q2, th, S);
      if (k[1] != 0) s += k[1] * dq2_fd(f, q1, q2, th, S);
      return s;
    }
    case CommutatorField::Zij: {
      Vec p = th, m = th;
      p[i] -= S.ha * th[j];
      p[j] += S.ha * th[i];
      m[i] += S.ha * th[j];
      m[j] -= S.ha * th[i];
      return (f(q1, q2, p) - f(q1, q2, m)) / (2 * S.ha);
    }
    case CommutatorField::DTau:
      if (c != Chart::Omega3) fail(Errc::InvalidInput, "d_tau lives in Omega3");
      return dq1_fd(f, q1, q2, th, S);
    case CommutatorField::RhoDRho:
      if (c != Chart::Omega3) fail(Errc::InvalidInput, "rho d_rho commutator is checked in Omega3");
      return q2 * dq2_fd(f, q1, q2, th, S);
  }
  return 0;
}

struct CommutatorResult {
  std::vector<int> N;
  Vec err;     // max |residual| over the sample nodes, per resolution
  Vec orders;  // log2 ratios between successive resolutions
  double min_order() const { return orders.empty() ? 0.0 : *std::min_element(orders.begin(), orders.end()); }
};

// Box in chart coordinates given by two axes (maps + extents via lo/hi);
// residual of [Box, Z] f minus the claimed value (0, except 2 Box in Omega0 for Z00
// and Box - (rho d_rho)^2 - rho d_rho - Delta_theta for rho d_rho in Omega3), sampled on a fixed 33x33
// lattice of nodes (shared by all resolutions), with xi-steps extent/N.
inline CommutatorResult commutator_residual(Chart c, CommutatorField Z, const PolarFn& f, const Axis& box1,
                                            const Axis& box2, const std::vector<int>& Ns, int n, const Vec& theta,
                                            std::size_t zi = 0, std::size_t zj = 1) {
  if (Ns.size() < 2) fail(Errc::InvalidInput, "need at least two resolutions");
  if (theta.size() != static_cast<std::size_t>(n)) fail(Errc::InvalidInput, "theta dimension differs from n");
  const double L1 = box1.spacing * (box1.N - 1), L2 = box2.spacing * (box2.N - 1);
  CommutatorResult R;
  const int M = 32;
  for (int N : Ns) {
    if (N < 8) fail(Errc::InsufficientResolution, "resolution too coarse");
    StencilSpec S{box1, box2, L1 / N, L2 / N, 2.0 / N};
    double worst = 0;
    PolarFn Zf = [&](double a, double b, const Vec& th) { return apply_field_fd(c, Z, f, a, b, th, S, zi, zj); };
    PolarFn Bf = [&](double a, double b, const Vec& th) { return box_fd(c, n, f, a, b, th, S); };
    for (int p = 0; p <= M; ++p)
      for (int q = 0; q <= M; ++q) {
        const double q1 = box1.to_q(box1.origin + L1 * p / M), q2 = box2.to_q(box2.origin + L2 * q / M);
        double r = box_fd(c, n, Zf, q1, q2, theta, S) - apply_field_fd(c, Z, Bf, q1, q2, theta, S, zi, zj);
        if (c == Chart::Omega0 && Z == CommutatorField::Z00) {
          // no conformal rescaling in the interior chart: [Box_m, S] = 2 Box_m
          r -= 2 * box_fd(c, n, f, q1, q2, theta, S);
        }
        if (Z == CommutatorField::RhoDRho) {
          // claimed: Box - (rho d_rho)^2 - rho d_rho - Delta_theta
          PolarFn Rf = [&](double a, double b, const Vec& th) { return b * dq2_fd(f, a, b, th, S); };
          const double claimed = box_fd(c, n, f, q1, q2, theta, S) - q2 * dq2_fd(Rf, q1, q2, theta, S) -
                                 q2 * dq2_fd(f, q1, q2, theta, S) - laplace_theta_fd(f, q1, q2, theta, S);
          r -= claimed;
        }
        worst = std::max(worst, std::abs(r));
      }
    R.N.push_back(N);
    R.err.push_back(worst);
  }
  R.orders = observed_orders(R.err);
  return R;
}

// ---- time-like functions --------------------------------------------------

enum class TKind { T, Prime, DoublePrime };

struct TimelikeFunction {
  int domain = 2;  // 1..4
  TKind kind = TKind::T;
  double dp = 0.2;      // delta'
  double alpha = 5.9375;  // only T4'
  double tau0 = 10.0;

  Chart chart() const { return static_cast<Chart>(domain); }
};

struct TGrad {
  double value = 0, d1 = 0, d2 = 0;  // T and its coordinate derivatives
  double gradsq = 0;                  // <grad T, grad T> in the conformal metric
};

inline bool in_domain(int domain, double q1, double q2, double tau0 = 10.0) {
  switch (domain) {
    case 1: return std::abs(q1) < 7.0 / 8 && q2 >= 0 && q2 <= 1;
    case 2: return q1 >= 0 && q1 < 7.0 / 8 && q2 >= 0 && q2 <= 1;
    case 3: return std::abs(q1) <= tau0 && q2 >= 0 && q2 <= 1;
    case 4: return q1 >= 0 && q1 <= 7.0 / 8 && q2 >= 0 && q2 <= 1;
    default: return false;
  }
}

inline double ip(const ChartMetric& g, double a1, double a2, double b1, double b2) {
  return g.g11 * a1 * b1 + g.g12 * (a1 * b2 + a2 * b1) + g.g22 * a2 * b2;
}

inline TGrad timelike_gradient(const TimelikeFunction& T, double q1, double q2) {
  if (!in_domain(T.domain, q1, q2, T.tau0)) fail(Errc::OutOfDomain, "point outside the time function's domain");
  const double dp = T.dp, h = 0.5;
  TGrad G;
  switch (T.domain) {
    case 1:  // T1 = t / psi1(r) = s for r >= 1
      G = {q1, 1, 0};
      break;
    case 2:
      if (T.kind == TKind::T)
        G = {-2 / (1 + 2 * dp) * std::pow(q1, dp + h) + std::log(q2), -std::pow(q1, dp - h), 1 / q2};
      else if (T.kind == TKind::Prime) G = {-q1, -1, 0};
      else G = {std::log(q2), 0, 1 / q2};
      break;
    case 3:
      if (T.kind == TKind::T) G = {q1 - 2 / (2 * dp + 1) * std::pow(q2, dp + h), 1, -std::pow(q2, dp - h)};
      else G = {-q2 * (2 * T.tau0 - q1), q2, -(2 * T.tau0 - q1)};
      break;
    case 4: {
      const double P = q1 * (2 - q1) / 2, dP = 1 - q1;
      if (T.kind == TKind::T) {
        G = {-2 / (2 * dp + 1) * std::pow(P, dp + h) + std::log(2 - q1) - std::log(q2),
             -std::pow(P, dp - h) * dP - 1 / (2 - q1), -1 / q2};
      } else {
        const double al = T.alpha, w = (2 - q1) / 2;
        const double pw = std::pow(w, 1 - al), bb = std::pow(q2, al);
        G = {-pw * q1 * bb, -(pw - q1 * (1 - al) * std::pow(w, -al) / 2) * bb, -pw * q1 * al * std::pow(q2, al - 1)};
      }
      break;
    }
    default: fail(Errc::OutOfDomain, "unknown domain");
  }
  if (!std::isfinite(G.value) || !std::isfinite(G.d1) || !std::isfinite(G.d2))
    fail(Errc::OutOfDomain, "time function singular at this point");
  G.gradsq = ip(chart_metric(T.chart(), q1, q2), G.d1, G.d2, G.d1, G.d2);
  return G;
}

// psi1 smoothing of r near the origin (T1 = t / psi1(r) in the interior)
inline double psi1(double r) { return r <= 1 ? 0.375 + 0.75 * r * r - 0.125 * r * r * r * r : r; }

// ---- quadratic forms --------------------------------------------------------

// first-order jet of one mode: coordinate derivatives v1 = d_q1 v, v2 = d_q2 v,
// A = |angular gradient| in the round metric
struct JetSample {
  double q1 = 0, q2 = 0;
  double v = 0, v1 = 0, v2 = 0, A = 0;
};

enum class Pairing { Same, Prime, DoublePrime };
enum class FluxVariant { Printed, Derived };

struct FormParams {
  int n = 4;
  double dp = 0.2;
  double alpha = 5.9375;
  double tau0 = 10.0;
  FluxVariant variant = FluxVariant::Printed;
};

// gamma0 defaults used in energy pairings per domain
inline double domain_gamma0(int domain, int n) {
  switch (domain) {
    case 1: return -(n + 1.0) * (n - 3.0) / 4;
    case 2:
    case 3: return -(n - 1.0) * (n - 3.0) / 4;
    case 4: return -(n * n - 1.0) / 4;
    default: fail(Errc::OutOfDomain, "unknown domain");
  }
}

namespace detail {

inline void check_form_domain(int domain, const JetSample& j, double tau0) {
  bool ok = in_domain(domain, j.q1, j.q2, tau0);
  if (domain == 2 || domain == 4) ok = ok && j.q1 > 0;
  // the T3 forms live where -1 <= T3' <= 0
  if (domain == 3) ok = ok && j.q2 > 0 && j.q2 * (2 * tau0 - j.q1) <= 1 + 1e-12;
  if (domain == 4) ok = ok && j.q2 > 0;
  if (!ok) fail(Errc::OutOfDomain, "jet outside the form's domain");
}

struct Dom4 {
  double C1, C2, C3, D1, D2, D3, D4, D5;
};

inline Dom4 dom4_coeffs(double ab, double dp, double al, int n) {
  const double h = 0.5, P = ab * (2 - ab) / 2;
  const double Pm = std::pow(P, dp - h), Pp = std::pow(P, dp + h);
  const double w = 1 - ab, z = 2 - ab, nn = n;
  Dom4 d;
  d.C1 = w * w / z * Pm + w / (z * z) + al / (z * z) * Pp + al * ab / (z * z) * (h - Pp);
  d.C2 = al * ab * w * (1 - Pp) - ab * w;
  d.C3 = al * ab / 2 + w * w / z + (al - 2) * w * w / z * Pp;
  d.D1 = (h - dp) * w * w / z * Pm - ab / (2 * z * z) + 1 / z * Pp;
  d.D2 = -ab * w;
  d.D3 = (nn - 1) / z * (h - Pp);
  d.D4 = (1 + 2 * dp) * w * w / z * Pp + (nn - 2) * ab * (h - Pp);
  d.D5 = (1 + 2 * dp) * w * w / z * Pp + nn * ab * (h - Pp);
  return d;
}

}  // namespace detail

inline double flux_form(int domain, Pairing pairing, const JetSample& j, double g0, const FormParams& P = {}) {
  detail::check_form_domain(domain, j, P.tau0);
  const double h = 0.5, dp = P.dp;
  const double ang = j.A * j.A - g0 * j.v * j.v;
  switch (domain) {
    case 1: {
      if (pairing != Pairing::Same) fail(Errc::InvalidInput, "domain 1 pairs T1 with itself");
      const double s = j.q1, rdr = j.q2 * j.v2;
      const double mix = P.variant == FluxVariant::Printed ? rdr : s * rdr;
      return h * sq((1 - s * s) * j.v1 - mix) + h * rdr * rdr + h * (1 - s * s) * ang;
    }
    case 2: {
      const double a = j.q1, bdb = j.q2 * j.v2;
      if (pairing == Pairing::Prime) {
        const double X = bdb - a * (2 - a) * j.v1;
        return h * std::pow(a, dp - h) * (bdb * bdb + X * X) + h * a * (2 - a) * j.v1 * j.v1 +
               h * (1 + std::pow(a, dp + h) * (2 - a)) * ang;
      }
      if (pairing == Pairing::DoublePrime)
        return j.v1 * j.v1 + h * std::pow(a, dp - h) * (a * (2 - a) * j.v1 * j.v1 + ang);
      fail(Errc::InvalidInput, "domain 2 pairs T2 with T2' or T2''");
    }
    case 3: {
      const double r = j.q2, c = 2 * P.tau0 - j.q1;
      const double S = j.v1 * j.v1 + sq(j.v1 + r * r * j.v2);
      const double rp = std::pow(r, dp + 3 * h);
      if (pairing == Pairing::Same)
        return h * std::pow(r, 2 * dp - 1) * S + (1 - rp) * j.v2 * j.v2 + std::pow(r, dp - h) * (1 - h * rp) * ang;
      if (pairing == Pairing::Prime)
        return h * std::pow(r, dp - h) * c * S + (1 - h * r * c - h * rp) * r * j.v2 * j.v2 +
               h * (c + std::pow(r, dp + h) * (1 - r * c)) * ang;
      fail(Errc::InvalidInput, "domain 3 pairs T3 with T3 or T3'");
    }
    case 4: {
      if (pairing != Pairing::Prime) fail(Errc::InvalidInput, "domain 4 pairs T4 with T4'");
      const double ab = j.q1, bb = j.q2;
      const auto d = detail::dom4_coeffs(ab, dp, P.alpha, P.n);
      const double Y1 = ab * (2 - ab) * j.v1 - bb * j.v2, Y2 = bb * j.v2;
      const double an = j.A * j.A / sq(1 - ab);
      return std::pow((2 - ab) / 2, 1 - P.alpha) * std::pow(bb, P.alpha) *
             (d.C1 * (Y1 * Y1 + Y2 * Y2) + d.C2 * j.v1 * j.v1 + d.C3 * (an - g0 * j.v * j.v));
    }
    default: fail(Errc::OutOfDomain, "unknown domain");
  }
}

inline double bulk_form_Q(int domain, const JetSample& j, double g0, const FormParams& P = {}) {
  detail::check_form_domain(domain, j, P.tau0);
  const double h = 0.5, dp = P.dp;
  const double ang = j.A * j.A - g0 * j.v * j.v;
  switch (domain) {
    case 1: return -j.q1 * ang;
    case 2: {
      const double a = j.q1, bdb = j.q2 * j.v2, X = bdb - a * (2 - a) * j.v1;
      return h * (h - dp) * std::pow(a, dp - 3 * h) * (bdb * bdb + X * X) + (1 - a) * j.v1 * j.v1 -
             h * std::pow(a, dp - h) * (1 + 2 * dp - (3 * h + dp) * a) * ang;
    }
    case 3: {
      const double r = j.q2;
      const double S = j.v1 * j.v1 + sq(j.v1 + r * r * j.v2);
      return h * (h - dp) * std::pow(r, dp - 3 * h) * S - r * j.v2 * j.v2 + h * (dp + 3 * h) * std::pow(r, dp + h) * ang;
    }
    case 4: {
      const double ab = j.q1, bb = j.q2;
      const auto d = detail::dom4_coeffs(ab, dp, P.alpha, P.n);
      const double Y1 = ab * (2 - ab) * j.v1 - bb * j.v2, Y2 = bb * j.v2;
      const double an = j.A * j.A / sq(1 - ab);
      const double aQ = d.D1 * (Y1 * Y1 + Y2 * Y2) + d.D2 * j.v1 * j.v1 + d.D3 * (Y1 * Y1 - Y2 * Y2) + d.D4 * an +
                        d.D5 * (-g0 * j.v * j.v);
      return aQ / ab;
    }
    default: fail(Errc::OutOfDomain, "unknown domain");
  }
}

// symmetric 4x4 matrix over (v, v1, v2, A) by polarization
using FormMatrix = std::array<double, 16>;

template <class Form>
FormMatrix assemble_form(Form&& form, double q1, double q2) {
  auto jet = [&](const std::array<double, 4>& x) { return JetSample{q1, q2, x[0], x[1], x[2], x[3]}; };
  FormMatrix M{};
  std::array<double, 4> diag{};
  for (int i = 0; i < 4; ++i) {
    std::array<double, 4> e{};
    e[i] = 1;
    diag[i] = form(jet(e));
    M[i * 4 + i] = diag[i];
  }
  for (int i = 0; i < 4; ++i)
    for (int k = i + 1; k < 4; ++k) {
      std::array<double, 4> e{};
      e[i] = e[k] = 1;
      const double m = 0.5 * (form(jet(e)) - diag[i] - diag[k]);
      M[i * 4 + k] = M[k * 4 + i] = m;
    }
  return M;
}

inline double form_eval(const FormMatrix& M, const JetSample& j) {
  const double x[4] = {j.v, j.v1, j.v2, j.A};
  double s = 0;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) s += x[i] * M[i * 4 + k] * x[k];
  return s;
}

// eigenvalues of a small symmetric matrix (cyclic Jacobi)
inline Vec sym_eigenvalues(Vec A, std::size_t m) {
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = p + 1; q < m; ++q) off += A[p * m + q] * A[p * m + q];
    if (off < 1e-300) break;
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = p + 1; q < m; ++q) {
        const double apq = A[p * m + q];
        if (apq == 0) continue;
        const double theta = (A[q * m + q] - A[p * m + p]) / (2 * apq);
        const double t = (theta >= 0 ? 1 : -1) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = A[k * m + p], akq = A[k * m + q];
          A[k * m + p] = c * akp - s * akq;
          A[k * m + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double apk = A[p * m + k], aqk = A[q * m + k];
          A[p * m + k] = c * apk - s * aqk;
          A[q * m + k] = s * apk + c * aqk;
        }
      }
  }
  Vec ev(m);
  for (std::size_t i = 0; i < m; ++i) ev[i] = A[i * m + i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

inline double min_eigenvalue(const FormMatrix& M) { return sym_eigenvalues(Vec(M.begin(), M.end()), 4).front(); }

// ---- divergence identity ---------------------------------------------------
//
// div(e^{-2T''} F) = e^{-2T''} ( -2 <F, grad T''> + <grad v, grad T> f + Q ),
// F = <grad T, grad v> grad v - 1/2 (|grad v|^2 - gamma0 v^2) grad T,
// f = (Box + gamma0) v.  For a mode, |angular grad v|^2 integrates to lambda v^2.

struct LogWeight {  // T'' = coef * log(q_k)
  double coef = 0;
  int coord = 1;
  double value(double q1, double q2) const { return coef == 0 ? 0.0 : coef * std::log(coord == 0 ? q1 : q2); }
  std::array<double, 2> grad(double q1, double q2) const {
    if (coef == 0) return {0, 0};
    return coord == 0 ? std::array<double, 2>{coef / q1, 0} : std::array<double, 2>{0, coef / q2};
  }
};

struct DivergenceResult {
  double boundary = 0, bulk = 0;
  double residual = 0;  // |boundary - bulk| / flux scale
  double flux_scale = 0;
};

// v and f sampled on the same grid (uniform axes over the box); T from the domain's family
inline DivergenceResult divergence_residual(const ModeGrid& v, const ModeGrid& f, const TimelikeFunction& T,
                                            const LogWeight& w, double g0, const FormParams& P) {
  if (v.chart != T.chart() || f.chart != v.chart) fail(Errc::InvalidInput, "grid chart differs from domain chart");
  if (v.N1() < 5 || v.N2() < 5) fail(Errc::InsufficientResolution, "box grid too coarse");
  const int n = v.n;
  const double lam = angular_eigenvalue(v.l, n);
  const ModeGrid v1 = d_q(v, 0), v2 = d_q(v, 1);
  const std::size_t N1 = v.N1(), N2 = v.N2();
  ModeGrid X1 = v.like(), X2 = v.like(), B = v.like();
  for (std::size_t i = 0; i < N1; ++i)
    for (std::size_t k = 0; k < N2; ++k) {
      const double q1 = v.q1(i), q2 = v.q2(k);
      const ChartMetric g = chart_metric(v.chart, q1, q2);
      const TGrad G = timelike_gradient(T, q1, q2);
      const double mu = g.sqrtg * std::pow(g.W, n - 1);
      const double u = v(i, k), du1 = v1(i, k), du2 = v2(i, k);
      const double TV = ip(g, G.d1, G.d2, du1, du2);
      const double VV = ip(g, du1, du2, du1, du2) + lam * u * u / (g.W * g.W);
      const double coefT = -0.5 * (VV - g0 * u * u);
      // F^a = TV (ginv dv)^a + coefT (ginv dT)^a
      const double F1 = TV * (g.g11 * du1 + g.g12 * du2) + coefT * (g.g11 * G.d1 + g.g12 * G.d2);
      const double F2 = TV * (g.g12 * du1 + g.g22 * du2) + coefT * (g.g12 * G.d1 + g.g22 * G.d2);
      const double e = std::exp(-2 * w.value(q1, q2));
      X1(i, k) = mu * e * F1;
      X2(i, k) = mu * e * F2;
      const auto gw = w.grad(q1, q2);
      const double FdW = F1 * gw[0] + F2 * gw[1];  // <F, grad T''> = F^a d_a T''
      JetSample J{q1, q2, u, du1, du2, std::sqrt(lam) * std::abs(u)};
      const double Q = bulk_form_Q(T.domain, J, g0, P);
      B(i, k) = mu * e * (-2 * FdW + TV * f(i, k) + Q);
    }
  // boundary integral: right - left (X1 over q2) + top - bottom (X2 over q1); trapezoid in q
  auto edge = [&](const ModeGrid& X, bool along1, std::size_t fixed) {
    Vec qv, fv;
    const std::size_t M = along1 ? N1 : N2;
    for (std::size_t m = 0; m < M; ++m) {
      qv.push_back(along1 ? v.q1(m) : v.q2(m));
      fv.push_back(along1 ? X(m, fixed) : X(fixed, m));
    }
    double s = 0;
    for (std::size_t m = 1; m < M; ++m) s += 0.5 * (fv[m] + fv[m - 1]) * (qv[m] - qv[m - 1]);
    return s;
  };
  DivergenceResult R;
  const double e1 = edge(X1, false, N1 - 1), e2 = edge(X1, false, 0);
  const double e3 = edge(X2, true, N2 - 1), e4 = edge(X2, true, 0);
  R.boundary = e1 - e2 + e3 - e4;
  R.flux_scale = std::abs(e1) + std::abs(e2) + std::abs(e3) + std::abs(e4);
  // bulk: trapezoid in both chart coordinates
  Vec rows(N1);
  for (std::size_t i = 0; i < N1; ++i) {
    double s = 0;
    for (std::size_t k = 1; k < N2; ++k) s += 0.5 * (B(i, k) + B(i, k - 1)) * (v.q2(k) - v.q2(k - 1));
    rows[i] = s;
  }
  for (std::size_t i = 1; i < N1; ++i) R.bulk += 0.5 * (rows[i] + rows[i - 1]) * (v.q1(i) - v.q1(i - 1));
  R.residual = R.flux_scale > 0 ? std::abs(R.boundary - R.bulk) / R.flux_scale : std::abs(R.boundary - R.bulk);
  return R;
}

// ---- weighted inequality in the last domain -------------------------------

struct JetInequalityParams {
  int n = 4;
  double delta = 0.25, dp = 0.2, lambda = 0.5, alpha = 5.9375;
};

inline void check_jet_inequality_hypotheses(const JetInequalityParams& p) {
  std::string why;
  if (p.n < 3) why += "n >= 3 required; ";
  if (!(p.delta > 0 && p.delta < 0.5)) why += "delta in (0,1/2) required; ";
  if (!(p.dp > 0 && p.dp < p.delta)) why += "0 < delta' < delta required; ";
  if (!(0.5 - p.dp < 1 - 2 * p.delta)) why += "1/2 - delta' < 1 - 2 delta required; ";
  if (!(p.lambda >= 0.5 - p.dp && p.lambda <= 1 - 2 * p.delta)) why += "lambda in [1/2-delta', 1-2delta] required; ";
  const double hi = (p.n - 1) / p.lambda;
  if (!(p.alpha > hi - 0.125 && p.alpha < hi)) why += "alpha in ((n-1)/lambda - 1/8, (n-1)/lambda) required; ";
  if (!why.empty()) fail(Errc::BadParameters, why);
}

struct JetInequalityResult {
  std::size_t samples = 0, violations = 0;
  double worst_ratio = 0;  // max of lhs / (lambda * flux) over samples with flux > 0
};

// jets: sampler returning a JetSample with q1 = abar in (0,7/8], q2 = bbar in (0,1]
inline JetInequalityResult jet_inequality_check(const JetInequalityParams& p, const std::function<JetSample()>& jets,
                                   std::size_t count) {
  check_jet_inequality_hypotheses(p);
  FormParams F{p.n, p.dp, p.alpha, 10.0, FluxVariant::Printed};
  const double g0 = domain_gamma0(4, p.n);
  TimelikeFunction T4p{4, TKind::Prime, p.dp, p.alpha};
  JetInequalityResult R;
  for (std::size_t k = 0; k < count; ++k) {
    const JetSample j = jets();
    const double Tp = std::abs(timelike_gradient(T4p, j.q1, j.q2).value);
    const double lhs = Tp * bulk_form_Q(4, j, g0, F);
    const double rhs = p.lambda * flux_form(4, Pairing::Prime, j, g0, F);
    const double scale = std::abs(lhs) + std::abs(rhs);
    if (lhs > rhs + 1e-12 * scale) ++R.violations;
    if (rhs > 0) R.worst_ratio = std::max(R.worst_ratio, lhs / rhs);
    ++R.samples;
  }
  return R;
}

inline std::function<JetSample()> random_jet_sampler(Rng& rng) {
  return [&rng]() {
    JetSample j;
    j.q1 = (7.0 / 8) * (1 - rng.uniform());  // (0, 7/8]
    j.q2 = 1 - rng.uniform();                // (0, 1]
    j.v = rng.normal();
    j.v1 = rng.normal();
    j.v2 = rng.normal();
    j.A = std::abs(rng.normal());
    return j;
  };
}

}  // namespace radlab
