#pragma once
// Compactification atlas: six charts, transitions, boundary defining functions,
// b-frames and a discrete weighted b-Sobolev norm on radial slices.

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "radlab/common.hpp"

namespace radlab {

enum class Chart { Omega0 = 0, Omega1, Omega2, Omega3, Omega4, Omega5, Scri };

inline const char* chart_name(Chart c) {
  static const char* names[] = {"Omega0", "Omega1", "Omega2", "Omega3", "Omega4", "Omega5", "Scri"};
  return names[static_cast<int>(c)];
}

inline Chart parse_chart(const std::string& s) {
  for (int i = 0; i <= 6; ++i)
    if (s == chart_name(static_cast<Chart>(i))) return static_cast<Chart>(i);
  fail(Errc::InvalidInput, "unknown chart label '" + s + "'");
}

// charts whose points carry (q1, q2, theta)
inline bool is_polar(Chart c) { return c >= Chart::Omega1 && c <= Chart::Omega4; }

struct AtlasParams {
  double tau0 = 10.0;
  double range_tol = 1e-12;
};

struct CartPoint {
  double t = 0;
  Vec x;
};

// coords: Omega0 (t, x...), Omega1-4 (q1, q2) with theta in S^{n-1}, Omega5 (phi, y...)
struct ChartPoint {
  Chart chart = Chart::Omega0;
  Vec coords;
  Vec theta;

  double q1() const { return coords.at(0); }
  double q2() const { return coords.at(1); }
  std::size_t dim() const { return is_polar(chart) ? theta.size() : coords.size() - 1; }
};

struct DefiningFunctions {
  double rho0 = 1, rho1 = 1, rho2 = 1, rhoTilde = 1;
};

// ---- range checks -------------------------------------------------------
// upper bounds of rho, b, bbar, phi are taken closed (interior side of the chart)

inline bool in_range(const ChartPoint& p, const AtlasParams& ap = {}) {
  const double e = ap.range_tol;
  const auto& c = p.coords;
  if (is_polar(p.chart)) {
    if (c.size() != 2) return false;
    if (std::abs(norm2(p.theta) - 1.0) > 1e-12) return false;
  }
  switch (p.chart) {
    case Chart::Omega0: {
      double s = 0;
      for (double v : c) s += v * v;
      return c.size() >= 2 && s < 1000.0;
    }
    case Chart::Omega1: return std::abs(c[0]) < 7.0 / 8 && c[1] >= -e && c[1] <= 1.0;
    case Chart::Omega2: return c[0] >= -e && c[0] < 7.0 / 8 && c[1] >= -e && c[1] <= 1.0;
    case Chart::Omega3: return std::abs(c[0]) <= ap.tau0 + e && c[1] >= -e && c[1] <= 1.0;
    case Chart::Omega4: return c[0] >= -e && c[0] < 7.0 / 8 && c[1] >= -e && c[1] <= 1.0;
    case Chart::Omega5: {
      if (c.size() < 2) return false;
      double y2 = 0;
      for (std::size_t i = 1; i < c.size(); ++i) y2 += c[i] * c[i];
      return c[0] >= -e && c[0] <= 1.0 && std::sqrt(y2) < 7.0 / 8;
    }
    default: return false;
  }
}

// ---- transitions --------------------------------------------------------

inline ChartPoint to_chart(const CartPoint& P, Chart chart, const AtlasParams& ap = {}) {
  if (P.t < 0) fail(Errc::OutOfChart, "backward region (t<0) is not stored");
  const double r = norm2(P.x);
  const double t = P.t;
  ChartPoint q;
  q.chart = chart;
  auto theta = [&]() {
    if (r == 0) fail(Errc::OutOfChart, "angular chart undefined at r=0");
    Vec th(P.x.size());
    for (std::size_t i = 0; i < th.size(); ++i) th[i] = P.x[i] / r;
    return th;
  };
  switch (chart) {
    case Chart::Omega0:
      q.coords.push_back(t);
      q.coords.insert(q.coords.end(), P.x.begin(), P.x.end());
      break;
    case Chart::Omega1:
      q.theta = theta();
      q.coords = {t / r, 1.0 / r};
      break;
    case Chart::Omega2:
      if (r <= t) fail(Errc::OutOfChart, "Omega2 needs r > t");
      q.theta = theta();
      q.coords = {1.0 - t / r, 1.0 / (r - t)};
      break;
    case Chart::Omega3:
      q.theta = theta();
      q.coords = {t - r, 1.0 / r};
      break;
    case Chart::Omega4:
      if (t <= r) fail(Errc::OutOfChart, "Omega4 needs t > r");
      q.theta = theta();
      q.coords = {1.0 - r / t, 1.0 / (t - r)};
      break;
    case Chart::Omega5:
      if (t <= 0) fail(Errc::OutOfChart, "Omega5 needs t > 0");
      q.coords.push_back(1.0 / t);
      for (double xi : P.x) q.coords.push_back(xi / t);
      break;
    default: fail(Errc::OutOfChart, "not a coordinate chart");
  }
  if (!in_range(q, ap)) fail(Errc::OutOfChart, std::string("point outside ") + chart_name(chart));
  return q;
}

inline DefiningFunctions defining_functions(const ChartPoint& p) {
  const auto& c = p.coords;
  DefiningFunctions d;
  switch (p.chart) {
    case Chart::Omega0: break;
    case Chart::Omega1: d.rho0 = c[1]; break;
    case Chart::Omega2: d.rho0 = c[1]; d.rho1 = c[0]; break;
    case Chart::Omega3: d.rho1 = c[1]; break;
    case Chart::Omega4: d.rho1 = c[0]; d.rho2 = c[1]; break;
    case Chart::Omega5: d.rho2 = c[0]; break;
    default: fail(Errc::InvalidInput, "no defining functions on this label");
  }
  d.rhoTilde = d.rho0 * d.rho1 * d.rho2;
  return d;
}

inline CartPoint from_chart(const ChartPoint& p, const AtlasParams& ap = {}) {
  if (!in_range(p, ap)) fail(Errc::OutOfChart, std::string("point outside ") + chart_name(p.chart));
  const auto d = defining_functions(p);
  if (d.rho0 == 0 || d.rho1 == 0 || d.rho2 == 0)
    fail(Errc::BoundaryPoint, "point on the boundary has no Cartesian preimage");
  const auto& c = p.coords;
  CartPoint P;
  double r = 0;
  switch (p.chart) {
    case Chart::Omega0:
      P.t = c[0];
      P.x.assign(c.begin() + 1, c.end());
      return P;
    case Chart::Omega1: r = 1.0 / c[1]; P.t = c[0] * r; break;
    case Chart::Omega2: r = 1.0 / (c[0] * c[1]); P.t = (1.0 - c[0]) * r; break;
    case Chart::Omega3: r = 1.0 / c[1]; P.t = c[0] + r; break;
    case Chart::Omega4: P.t = 1.0 / (c[0] * c[1]); r = (1.0 - c[0]) * P.t; break;
    case Chart::Omega5:
      P.t = 1.0 / c[0];
      for (std::size_t i = 1; i < c.size(); ++i) P.x.push_back(c[i] * P.t);
      return P;
    default: break;
  }
  P.x.resize(p.theta.size());
  for (std::size_t i = 0; i < P.x.size(); ++i) P.x[i] = r * p.theta[i];
  return P;
}

// ---- b-frames -----------------------------------------------------------
//
// A vector field is stored by its coefficients on the chart's b-basis.
//   Omega1: {d_s, rho d_rho, dslash}     Omega2: {a d_a, b d_b, dslash}
//   Omega3: {d_tau, rho d_rho, dslash}   Omega4: {abar d_abar, bbar d_bbar, dslash}
//   Omega5: {phi d_phi, d_y^1..d_y^n}    Omega0: {d_t, d_x^1..d_x^n}
// The angular part is a tangent vector w at theta; sum_i c_i dslash_i <-> w = P_theta c.

struct FrameVec {
  Vec b;    // non-angular b-basis coefficients
  Vec ang;  // angular tangent vector (polar charts only)
};

enum class FrameKind { Partial, Z, Basis };

struct FrameField {
  Chart chart;
  FrameKind kind;
  std::string name;  // e.g. "d_0", "d_2", "Z_00", "Z_0i" with i, "Z_ij", "B_1"
  int mu = -1, nu = -1;
  std::function<FrameVec(const ChartPoint&)> coeff;
};

inline Vec tangential(const Vec& th, std::size_t i) {
  Vec w(th.size());
  for (std::size_t k = 0; k < th.size(); ++k) w[k] = (k == i ? 1.0 : 0.0) - th[i] * th[k];
  return w;
}

namespace detail {

inline FrameVec partial_t(const ChartPoint& p) {
  const auto& c = p.coords;
  const std::size_t n = p.dim();
  switch (p.chart) {
    case Chart::Omega0: return {unit(n + 1, 0), {}};
    case Chart::Omega1: return {{c[1], 0.0}, Vec(n, 0.0)};
    case Chart::Omega2: return {{-c[1], c[1]}, Vec(n, 0.0)};
    case Chart::Omega3: return {{1.0, 0.0}, Vec(n, 0.0)};
    case Chart::Omega4: return {{c[1] * (1 - c[0]), -c[1]}, Vec(n, 0.0)};
    case Chart::Omega5: {
      Vec b(n + 1);
      b[0] = -c[0];
      for (std::size_t j = 1; j <= n; ++j) b[j] = -c[0] * c[j];
      return {b, {}};
    }
    default: fail(Errc::InvalidInput, "frame on non-chart");
  }
}

inline FrameVec partial_i(const ChartPoint& p, std::size_t i) {  // i in 1..n
  const auto& c = p.coords;
  const std::size_t n = p.dim();
  if (p.chart == Chart::Omega0) return {unit(n + 1, i), {}};
  if (p.chart == Chart::Omega5) {
    Vec b(n + 1, 0.0);
    b[i] = c[0];
    return {b, {}};
  }
  const double th = p.theta[i - 1];
  Vec w = tangential(p.theta, i - 1);
  double s1 = 0, s2 = 0, f = 0;
  switch (p.chart) {
    case Chart::Omega1: s1 = -c[1] * c[0] * th; s2 = -c[1] * th; f = c[1]; break;
    case Chart::Omega2: s1 = c[1] * th * (1 - c[0]); s2 = -c[1] * th; f = c[0] * c[1]; break;
    case Chart::Omega3: s1 = -th; s2 = -c[1] * th; f = c[1]; break;
    case Chart::Omega4: s1 = -c[1] * th; s2 = c[1] * th; f = c[0] * c[1] / (1 - c[0]); break;
    default: break;
  }
  for (double& x : w) x *= f;
  return {{s1, s2}, w};
}

inline FrameVec z00(const ChartPoint& p) {
  const auto& c = p.coords;
  const std::size_t n = p.dim();
  switch (p.chart) {
    case Chart::Omega0: {
      Vec b(n + 1);
      b[0] = c[0];
      for (std::size_t j = 1; j <= n; ++j) b[j] = c[j];
      return {b, {}};
    }
    case Chart::Omega1: return {{0.0, -1.0}, Vec(n, 0.0)};
    case Chart::Omega2: return {{0.0, -1.0}, Vec(n, 0.0)};
    case Chart::Omega3: return {{c[0], -1.0}, Vec(n, 0.0)};
    case Chart::Omega4: return {{0.0, -1.0}, Vec(n, 0.0)};
    case Chart::Omega5: {
      Vec b(n + 1, 0.0);
      b[0] = -1.0;
      return {b, {}};
    }
    default: fail(Errc::InvalidInput, "frame on non-chart");
  }
}

inline FrameVec z0i(const ChartPoint& p, std::size_t i) {
  const auto& c = p.coords;
  const std::size_t n = p.dim();
  if (p.chart == Chart::Omega0) {
    Vec b(n + 1, 0.0);
    b[0] = c[i];
    b[i] = c[0];
    return {b, {}};
  }
  if (p.chart == Chart::Omega5) {
    Vec b(n + 1, 0.0);
    b[i] = 1.0;
    b[0] = -c[i];
    for (std::size_t j = 1; j <= n; ++j) b[j] -= c[i] * c[j];
    return {b, {}};
  }
  const double th = p.theta[i - 1];
  Vec w = tangential(p.theta, i - 1);
  double s1 = 0, s2 = 0, f = 0;
  switch (p.chart) {
    case Chart::Omega1: s1 = th * (1 - c[0] * c[0]); s2 = -th * c[0]; f = c[0]; break;
    case Chart::Omega2: s1 = -th * (2 - c[0]); s2 = th; f = 1 - c[0]; break;
    case Chart::Omega3: s1 = -th * c[0]; s2 = -th * (1 + c[1] * c[0]); f = 1 + c[1] * c[0]; break;
    case Chart::Omega4: s1 = -th * (2 - c[0]); s2 = th; f = 1.0 / (1 - c[0]); break;
    default: break;
  }
  for (double& x : w) x *= f;
  return {{s1, s2}, w};
}

inline FrameVec zij(const ChartPoint& p, std::size_t i, std::size_t j) {
  const auto& c = p.coords;
  const std::size_t n = p.dim();
  if (p.chart == Chart::Omega0 || p.chart == Chart::Omega5) {
    Vec b(n + 1, 0.0);
    b[j] += c[i];
    b[i] -= c[j];
    return {b, {}};
  }
  Vec w(n, 0.0);
  const Vec wi = tangential(p.theta, i - 1), wj = tangential(p.theta, j - 1);
  for (std::size_t k = 0; k < n; ++k) w[k] = p.theta[i - 1] * wj[k] - p.theta[j - 1] * wi[k];
  return {{0.0, 0.0}, w};
}

}  // namespace detail

// b-basis coefficients -> coefficients on the coordinate vector fields d/dq
inline FrameVec to_coordinate_frame(const ChartPoint& p, const FrameVec& f) {
  const auto& c = p.coords;
  FrameVec out = f;
  switch (p.chart) {
    case Chart::Omega1: out.b[1] *= c[1]; break;
    case Chart::Omega2: out.b[0] *= c[0]; out.b[1] *= c[1]; break;
    case Chart::Omega3: out.b[1] *= c[1]; break;
    case Chart::Omega4: out.b[0] *= c[0]; out.b[1] *= c[1]; break;
    case Chart::Omega5: out.b[0] *= c[0]; break;
    default: break;
  }
  return out;
}

// Basis element k of the chart's b-basis as a FrameVec (k over non-angular slots)
inline FrameVec basis_element(const ChartPoint& p, std::size_t k) {
  FrameVec f;
  if (is_polar(p.chart)) {
    f.b = {0.0, 0.0};
    f.ang = Vec(p.dim(), 0.0);
  } else {
    f.b = Vec(p.dim() + 1, 0.0);
  }
  f.b.at(k) = 1.0;
  return f;
}

inline std::vector<FrameField> frame_fields(Chart chart, std::size_t n) {
  using namespace detail;
  std::vector<FrameField> out;
  const std::size_t nb = is_polar(chart) ? 2 : n + 1;
  for (std::size_t k = 0; k < nb; ++k)
    out.push_back({chart, FrameKind::Basis, "B_" + std::to_string(k), int(k), -1,
                   [k](const ChartPoint& p) { return basis_element(p, k); }});
  out.push_back({chart, FrameKind::Partial, "d_0", 0, -1, [](const ChartPoint& p) { return partial_t(p); }});
  for (std::size_t i = 1; i <= n; ++i)
    out.push_back({chart, FrameKind::Partial, "d_" + std::to_string(i), int(i), -1,
                   [i](const ChartPoint& p) { return partial_i(p, i); }});
  out.push_back({chart, FrameKind::Z, "Z_00", 0, 0, [](const ChartPoint& p) { return z00(p); }});
  for (std::size_t i = 1; i <= n; ++i)
    out.push_back({chart, FrameKind::Z, "Z_0" + std::to_string(i), 0, int(i),
                   [i](const ChartPoint& p) { return z0i(p, i); }});
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j)
      out.push_back({chart, FrameKind::Z, "Z_" + std::to_string(i) + std::to_string(j), int(i), int(j),
                     [i, j](const ChartPoint& p) { return zij(p, i, j); }});
  return out;
}

inline const FrameField& find_frame(const std::vector<FrameField>& ff, const std::string& name) {
  for (const auto& f : ff)
    if (f.name == name) return f;
  fail(Errc::InvalidInput, "no frame field " + name);
}

// Scalar field on a chart: polar charts F(q1, q2, theta); others F(coords).
using ChartFunction = std::function<double(const Vec& coords, const Vec& theta)>;

// Apply a frame field to F at p by centred differences of step h
// (angular directions act on the degree-0 homogeneous extension of F).
inline double apply_frame(const FrameField& X, const ChartFunction& F, const ChartPoint& p, double h) {
  const FrameVec f = to_coordinate_frame(p, X.coeff(p));
  double s = 0;
  for (std::size_t k = 0; k < f.b.size(); ++k) {
    if (f.b[k] == 0) continue;
    Vec cp = p.coords, cm = p.coords;
    cp[k] += h;
    cm[k] -= h;
    s += f.b[k] * (F(cp, p.theta) - F(cm, p.theta)) / (2 * h);
  }
  if (!f.ang.empty() && norm2(f.ang) > 0) {
    auto ext = [&](double e) {
      Vec th = p.theta;
      for (std::size_t k = 0; k < th.size(); ++k) th[k] += e * f.ang[k];
      const double r = norm2(th);
      for (double& x : th) x /= r;
      return F(p.coords, th);
    };
    s += (ext(h) - ext(-h)) / (2 * h);
  }
  return s;
}

// ---- weighted b-Sobolev norm on a radial slice ---------------------------

struct SliceField {
  Vec rho;  // geometric grid (uniform in log rho), ascending
  Vec v;
  int l = 0;  // spherical-harmonic degree (angular b-derivatives contribute lambda_l per order)
  int n = 3;
};

struct BNorm {
  double value = 0;
  bool diverging = false;
  double inner_exponent = 0;  // fitted exponent of rho^{-lambda} v at the inner end
};

namespace detail {

// 4th-order first derivative on a uniform grid (5-point stencils, one-sided at edges)
inline Vec d1_o4(const Vec& f, double h) {
  const std::size_t m = f.size();
  Vec d(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (i >= 2 && i + 2 < m) {
      d[i] = (f[i - 2] - 8 * f[i - 1] + 8 * f[i + 1] - f[i + 2]) / (12 * h);
    } else if (i < 2) {
      const double* g = &f[0];
      if (i == 0) d[i] = (-25 * g[0] + 48 * g[1] - 36 * g[2] + 16 * g[3] - 3 * g[4]) / (12 * h);
      else d[i] = (-3 * g[0] - 10 * g[1] + 18 * g[2] - 6 * g[3] + g[4]) / (12 * h);
    } else {
      const double* g = &f[m - 5];
      if (i == m - 1) d[i] = (25 * g[4] - 48 * g[3] + 36 * g[2] - 16 * g[1] + 3 * g[0]) / (12 * h);
      else d[i] = (3 * g[4] + 10 * g[3] - 18 * g[2] + 6 * g[1] - g[0]) / (12 * h);
    }
  }
  return d;
}

}  // namespace detail

inline BNorm b_norm(const SliceField& s, int N, double lambda) {
  const std::size_t m = s.rho.size();
  if (m != s.v.size() || m < 2) fail(Errc::InvalidInput, "slice grid and values differ in size");
  if (N < 0) fail(Errc::InvalidInput, "negative derivative order");
  if (m < static_cast<std::size_t>(5 * (N + 1))) fail(Errc::InsufficientResolution, "grid too short for N b-derivatives");
  const double hs = std::log(s.rho[1] / s.rho[0]);
  for (std::size_t i = 1; i < m; ++i) {
    if (!(s.rho[i - 1] > 0) || std::abs(std::log(s.rho[i] / s.rho[i - 1]) - hs) > 1e-9 * std::max(1.0, hs))
      fail(Errc::InvalidInput, "slice grid must be geometric");
  }
  Vec w(m);
  bool zero = true;
  for (std::size_t i = 0; i < m; ++i) {
    w[i] = std::pow(s.rho[i], -lambda) * s.v[i];
    if (w[i] != 0) zero = false;
  }
  BNorm out;
  if (zero) return out;
  const double lam_l = static_cast<double>(s.l) * (s.l + s.n - 2);
  std::vector<Vec> D{w};
  for (int k = 1; k <= N; ++k) D.push_back(detail::d1_o4(D.back(), hs));
  Vec integrand(m, 0.0);
  for (int k = 0; k <= N; ++k)
    for (int j = 0; k + j <= N; ++j)
      for (std::size_t i = 0; i < m; ++i) integrand[i] += std::pow(lam_l, j) * sq(D[k][i]);
  // inner exponent from the first few nodes
  const std::size_t q = std::min<std::size_t>(6, m);
  Vec lx, ly;
  for (std::size_t i = 0; i < q; ++i) {
    if (w[i] == 0) continue;
    lx.push_back(std::log(s.rho[i]));
    ly.push_back(std::log(std::abs(w[i])));
  }
  const double p = lx.size() >= 2 ? fit_line(lx, ly).slope : 0.0;
  out.inner_exponent = p;
  if (p <= 1e-6) {
    out.diverging = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const double body = simpson(integrand, hs);
  const double tail = integrand[0] / (2 * p);
  out.value = std::sqrt(body + tail);
  return out;
}

inline Vec geometric_grid(double rmin, double rmax, std::size_t m) {
  Vec g(m);
  const double a = std::log(rmin), b = std::log(rmax);
  for (std::size_t i = 0; i < m; ++i) g[i] = std::exp(a + (b - a) * i / (m - 1));
  return g;
}

}  // namespace radlab
