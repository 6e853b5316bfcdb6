#pragma once
// Two-dimensional grids carrying one spherical-harmonic mode over a chart domain.
// Each axis is uniform in a computational variable xi; the chart coordinate is
// q = map(xi) (identity, exp, or scaled sinh) so that grids can be geometric
// toward a boundary face or stretched in tau.

#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <regex>
#include <sstream>

#include "radlab/geometry.hpp"

namespace radlab {

enum class AxisMap { Identity, Log, Sinh };

struct Axis {
  std::string name = "q";  // chart coordinate name (tau, rho, a, b, ...)
  AxisMap map = AxisMap::Identity;
  double scale = 1.0;  // Sinh: q = scale * sinh(xi)
  double origin = 0, spacing = 1;
  std::size_t N = 1;

  double xi(std::size_t i) const { return origin + spacing * static_cast<double>(i); }
  double to_q(double x) const {
    switch (map) {
      case AxisMap::Log: return std::exp(x);
      case AxisMap::Sinh: return scale * std::sinh(x);
      default: return x;
    }
  }
  double to_xi(double q) const {
    switch (map) {
      case AxisMap::Log:
        if (q <= 0) fail(Errc::InterpolationOutOfRange, "log axis needs q > 0");
        return std::log(q);
      case AxisMap::Sinh: return std::asinh(q / scale);
      default: return q;
    }
  }
  double q(std::size_t i) const { return to_q(xi(i)); }
  double dq(double x) const {  // dq/dxi
    switch (map) {
      case AxisMap::Log: return std::exp(x);
      case AxisMap::Sinh: return scale * std::cosh(x);
      default: return 1.0;
    }
  }
  double d2q(double x) const {
    switch (map) {
      case AxisMap::Log: return std::exp(x);
      case AxisMap::Sinh: return scale * std::sinh(x);
      default: return 0.0;
    }
  }
  double lo() const { return q(0); }
  double hi() const { return q(N - 1); }

  // header token: "rho", "log(rho)", "asinh(tau/2.5)"
  std::string token() const {
    std::ostringstream o;
    o << std::setprecision(17);
    switch (map) {
      case AxisMap::Log: o << "log(" << name << ")"; break;
      case AxisMap::Sinh: o << "asinh(" << name << "/" << scale << ")"; break;
      default: o << name;
    }
    return o.str();
  }
};

inline Axis uniform_axis(std::string name, double lo, double hi, std::size_t N) {
  if (N < 2 || !(hi > lo)) fail(Errc::InvalidInput, "axis needs N>=2 and hi>lo");
  return {std::move(name), AxisMap::Identity, 1.0, lo, (hi - lo) / (N - 1), N};
}
inline Axis log_axis(std::string name, double lo, double hi, std::size_t N) {
  if (N < 2 || !(lo > 0) || !(hi > lo)) fail(Errc::InvalidInput, "log axis needs 0<lo<hi");
  return {std::move(name), AxisMap::Log, 1.0, std::log(lo), (std::log(hi) - std::log(lo)) / (N - 1), N};
}
inline Axis sinh_axis(std::string name, double lo, double hi, std::size_t N, double scale) {
  if (N < 2 || !(hi > lo) || !(scale > 0)) fail(Errc::InvalidInput, "bad sinh axis");
  const double a = std::asinh(lo / scale), b = std::asinh(hi / scale);
  return {std::move(name), AxisMap::Sinh, scale, a, (b - a) / (N - 1), N};
}

struct ModeGrid {
  Chart chart = Chart::Omega3;
  int n = 3;
  int l = 0;
  std::array<Axis, 2> ax;
  Vec v;  // row-major, index i*N2 + j

  ModeGrid() = default;
  ModeGrid(Chart c, int n_, int l_, Axis a1, Axis a2, double fill = 0.0)
      : chart(c), n(n_), l(l_), ax{std::move(a1), std::move(a2)}, v(ax[0].N * ax[1].N, fill) {}

  std::size_t N1() const { return ax[0].N; }
  std::size_t N2() const { return ax[1].N; }
  double& operator()(std::size_t i, std::size_t j) { return v[i * ax[1].N + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * ax[1].N + j]; }
  double q1(std::size_t i) const { return ax[0].q(i); }
  double q2(std::size_t j) const { return ax[1].q(j); }

  ModeGrid like(double fill = 0.0) const {
    ModeGrid g = *this;
    std::fill(g.v.begin(), g.v.end(), fill);
    return g;
  }

  template <class F>
  static ModeGrid sample(Chart c, int n, int l, Axis a1, Axis a2, F&& f) {
    ModeGrid g(c, n, l, std::move(a1), std::move(a2));
    for (std::size_t i = 0; i < g.N1(); ++i)
      for (std::size_t j = 0; j < g.N2(); ++j) g(i, j) = f(g.q1(i), g.q2(j));
    return g;
  }
};

inline double max_abs(const ModeGrid& g) {
  double m = 0;
  for (double x : g.v) m = std::max(m, std::abs(x));
  return m;
}

// ---- finite differences (2nd order; one-sided 2nd order at edges) ---------

namespace detail {

inline double fd1(const double* f, std::ptrdiff_t stride, std::size_t i, std::size_t N, double h) {
  auto F = [&](std::size_t k) { return f[static_cast<std::ptrdiff_t>(k) * stride]; };
  if (i == 0) return (-3 * F(0) + 4 * F(1) - F(2)) / (2 * h);
  if (i == N - 1) return (3 * F(N - 1) - 4 * F(N - 2) + F(N - 3)) / (2 * h);
  return (F(i + 1) - F(i - 1)) / (2 * h);
}

inline double fd2(const double* f, std::ptrdiff_t stride, std::size_t i, std::size_t N, double h) {
  auto F = [&](std::size_t k) { return f[static_cast<std::ptrdiff_t>(k) * stride]; };
  if (i == 0) return (2 * F(0) - 5 * F(1) + 4 * F(2) - F(3)) / (h * h);
  if (i == N - 1) return (2 * F(N - 1) - 5 * F(N - 2) + 4 * F(N - 3) - F(N - 4)) / (h * h);
  return (F(i + 1) - 2 * F(i) + F(i - 1)) / (h * h);
}

}  // namespace detail

// derivative with respect to the computational variable xi of axis k
inline ModeGrid d_xi(const ModeGrid& g, int k) {
  if (g.ax[k].N < 4) fail(Errc::InsufficientResolution, "need >= 4 nodes per axis");
  ModeGrid out = g.like();
  const std::size_t N1 = g.N1(), N2 = g.N2();
  for (std::size_t i = 0; i < N1; ++i)
    for (std::size_t j = 0; j < N2; ++j) {
      if (k == 0) out(i, j) = detail::fd1(&g.v[j], N2, i, N1, g.ax[0].spacing);
      else out(i, j) = detail::fd1(&g.v[i * N2], 1, j, N2, g.ax[1].spacing);
    }
  return out;
}

inline ModeGrid d2_xi(const ModeGrid& g, int k) {
  if (g.ax[k].N < 4) fail(Errc::InsufficientResolution, "need >= 4 nodes per axis");
  ModeGrid out = g.like();
  const std::size_t N1 = g.N1(), N2 = g.N2();
  for (std::size_t i = 0; i < N1; ++i)
    for (std::size_t j = 0; j < N2; ++j) {
      if (k == 0) out(i, j) = detail::fd2(&g.v[j], N2, i, N1, g.ax[0].spacing);
      else out(i, j) = detail::fd2(&g.v[i * N2], 1, j, N2, g.ax[1].spacing);
    }
  return out;
}

// first chart-coordinate derivative d/dq_k
inline ModeGrid d_q(const ModeGrid& g, int k) {
  ModeGrid out = d_xi(g, k);
  for (std::size_t i = 0; i < g.N1(); ++i)
    for (std::size_t j = 0; j < g.N2(); ++j) out(i, j) /= g.ax[k].dq(g.ax[k].xi(k == 0 ? i : j));
  return out;
}

// second chart-coordinate derivative d^2/dq_k^2
inline ModeGrid d2_q(const ModeGrid& g, int k) {
  ModeGrid f1 = d_xi(g, k), f2 = d2_xi(g, k);
  for (std::size_t i = 0; i < g.N1(); ++i)
    for (std::size_t j = 0; j < g.N2(); ++j) {
      const double x = g.ax[k].xi(k == 0 ? i : j);
      const double a = g.ax[k].dq(x), b = g.ax[k].d2q(x);
      f2(i, j) = (f2(i, j) - b / a * f1(i, j)) / (a * a);
    }
  return f2;
}

inline ModeGrid d12_q(const ModeGrid& g) { return d_q(d_q(g, 0), 1); }

// ---- interpolation (cubic Lagrange in xi, tensor product) -----------------

namespace detail {
inline void cubic_weights(double x, double origin, double h, std::size_t N, std::size_t& i0, double w[4]) {
  const double s = (x - origin) / h;
  const double eps = 1e-9;
  if (s < -eps || s > static_cast<double>(N - 1) + eps) fail(Errc::InterpolationOutOfRange, "point outside grid");
  std::ptrdiff_t k = static_cast<std::ptrdiff_t>(std::floor(s)) - 1;
  k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(N) - 4);
  i0 = static_cast<std::size_t>(k);
  for (int a = 0; a < 4; ++a) {
    double p = 1;
    for (int b = 0; b < 4; ++b)
      if (b != a) p *= (s - static_cast<double>(k + b)) / static_cast<double>(a - b);
    w[a] = p;
  }
}
}  // namespace detail

inline double interp(const ModeGrid& g, double q1, double q2) {
  if (g.N1() < 4 || g.N2() < 4) fail(Errc::InsufficientResolution, "cubic interpolation needs 4x4 nodes");
  std::size_t i0, j0;
  double wi[4], wj[4];
  detail::cubic_weights(g.ax[0].to_xi(q1), g.ax[0].origin, g.ax[0].spacing, g.N1(), i0, wi);
  detail::cubic_weights(g.ax[1].to_xi(q2), g.ax[1].origin, g.ax[1].spacing, g.N2(), j0, wj);
  double s = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) s += wi[a] * wj[b] * g(i0 + a, j0 + b);
  return s;
}

inline bool contains(const ModeGrid& g, double q1, double q2) {
  auto in = [](const Axis& a, double q) {
    if (a.map == AxisMap::Log && q <= 0) return false;
    const double s = (a.to_xi(q) - a.origin) / a.spacing;
    return s >= -1e-9 && s <= static_cast<double>(a.N - 1) + 1e-9;
  };
  return in(g.ax[0], q1) && in(g.ax[1], q2);
}

// ---- field files ------------------------------------------------------------

inline void write_field(std::ostream& o, const ModeGrid& g) {
  o << "#radlab-field v1\n";
  o << "n=" << g.n << "\n";
  o << "chart=" << chart_name(g.chart) << "\n";
  o << "l=" << g.l << "\n";
  o << "shape=" << g.N1() << " " << g.N2() << "\n";
  o << "coords=" << g.ax[0].token() << " " << g.ax[1].token() << "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g %.17g", g.ax[0].origin, g.ax[1].origin);
  o << "origin=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%.17g %.17g", g.ax[0].spacing, g.ax[1].spacing);
  o << "spacing=" << buf << "\n";
  for (std::size_t i = 0; i < g.N1(); ++i) {
    for (std::size_t j = 0; j < g.N2(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", g(i, j));
      o << (j ? " " : "") << buf;
    }
    o << "\n";
  }
}

inline void write_field(const std::string& path, const ModeGrid& g) {
  std::ofstream f(path);
  if (!f) fail(Errc::Io, "cannot write " + path);
  write_field(f, g);
}

namespace detail {
inline Axis parse_axis_token(const std::string& tok) {
  static const std::regex log_re(R"(log\((\w+)\))"), sinh_re(R"(asinh\((\w+)/([0-9eE+.\-]+)\))");
  std::smatch m;
  Axis a;
  if (std::regex_match(tok, m, log_re)) {
    a.name = m[1];
    a.map = AxisMap::Log;
  } else if (std::regex_match(tok, m, sinh_re)) {
    a.name = m[1];
    a.map = AxisMap::Sinh;
    a.scale = std::stod(m[2]);
  } else {
    a.name = tok;
  }
  return a;
}
}  // namespace detail

inline ModeGrid read_field(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#radlab-field v1", 0) != 0) fail(Errc::Io, "missing field header");
  ModeGrid g;
  std::size_t N1 = 0, N2 = 0;
  std::string c1, c2;
  double o1 = 0, o2 = 0, h1 = 1, h2 = 1;
  int seen = 0;
  while (seen < 7 && std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(Errc::Io, "bad header line: " + line);
    const std::string key = line.substr(0, eq);
    std::istringstream val(line.substr(eq + 1));
    if (key == "n") val >> g.n;
    else if (key == "chart") {
      std::string s;
      val >> s;
      g.chart = parse_chart(s);
    } else if (key == "l") val >> g.l;
    else if (key == "shape") val >> N1 >> N2;
    else if (key == "coords") val >> c1 >> c2;
    else if (key == "origin") val >> o1 >> o2;
    else if (key == "spacing") val >> h1 >> h2;
    else fail(Errc::Io, "unknown header key " + key);
    if (val.fail()) fail(Errc::Io, "bad value for " + key);
    ++seen;
  }
  if (seen != 7) fail(Errc::Io, "truncated header");
  g.ax[0] = detail::parse_axis_token(c1);
  g.ax[1] = detail::parse_axis_token(c2);
  g.ax[0].origin = o1;
  g.ax[1].origin = o2;
  g.ax[0].spacing = h1;
  g.ax[1].spacing = h2;
  g.ax[0].N = N1;
  g.ax[1].N = N2;
  g.v.resize(N1 * N2);
  for (double& x : g.v)
    if (!(in >> x)) fail(Errc::Io, "field body too short");
  return g;
}

inline ModeGrid read_field(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::Io, "cannot read " + path);
  return read_field(f);
}

}  // namespace radlab
