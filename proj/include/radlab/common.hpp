#pragma once
// Shared error type, small vector helpers and numeric utilities.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace radlab {

using Vec = std::vector<double>;

enum class Errc {
  OutOfChart,
  BoundaryPoint,
  InsufficientResolution,
  OutOfDomain,
  BadParameters,
  AliasRisk,
  CFLViolation,
  BoundaryContamination,
  FoliationLeak,
  NotConverged,
  DegenerateData,
  NonDecaying,
  MeanObstruction,
  ZeroModeAmbiguity,
  MetricDegenerate,
  SingularSystem,
  InterpolationOutOfRange,
  BlowupDetected,
  NoContraction,
  InsufficientRange,
  InvalidInput,
  Usage,
  Config,
  Io,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::OutOfChart: return "OutOfChart";
    case Errc::BoundaryPoint: return "BoundaryPoint";
    case Errc::InsufficientResolution: return "InsufficientResolution";
    case Errc::OutOfDomain: return "OutOfDomain";
    case Errc::BadParameters: return "BadParameters";
    case Errc::AliasRisk: return "AliasRisk";
    case Errc::CFLViolation: return "CFLViolation";
    case Errc::BoundaryContamination: return "BoundaryContamination";
    case Errc::FoliationLeak: return "FoliationLeak";
    case Errc::NotConverged: return "NotConverged";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::NonDecaying: return "NonDecaying";
    case Errc::MeanObstruction: return "MeanObstruction";
    case Errc::ZeroModeAmbiguity: return "ZeroModeAmbiguity";
    case Errc::MetricDegenerate: return "MetricDegenerate";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::InterpolationOutOfRange: return "InterpolationOutOfRange";
    case Errc::BlowupDetected: return "BlowupDetected";
    case Errc::NoContraction: return "NoContraction";
    case Errc::InsufficientRange: return "InsufficientRange";
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::Usage: return "Usage";
    case Errc::Config: return "Config";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc c, const std::string& what)
      : std::runtime_error(std::string(errc_name(c)) + ": " + what), code_(c) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc c, const std::string& what) { throw Error(c, what); }

inline double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec unit(std::size_t n, std::size_t i) {
  Vec e(n, 0.0);
  e[i] = 1.0;
  return e;
}

inline double sq(double x) { return x * x; }

// L2 norm of a sampled sequence (plain Euclidean; callers scale by cell size if needed)
inline double l2(const Vec& v) { return norm2(v); }

inline double rel_l2(const Vec& a, const Vec& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += sq(a[i] - b[i]);
    den += sq(b[i]);
  }
  if (den == 0) return std::sqrt(num);
  return std::sqrt(num / den);
}

// least-squares fit y = c + k x; returns {k, c, rms residual}
struct LineFit {
  double slope = 0, intercept = 0, rms = 0;
};
inline LineFit fit_line(const Vec& x, const Vec& y) {
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit f;
  const double den = m * sxx - sx * sx;
  f.slope = den != 0 ? (m * sxy - sx * sy) / den : 0.0;
  f.intercept = (sy - f.slope * sx) / m;
  double r = 0;
  for (std::size_t i = 0; i < x.size(); ++i) r += sq(y[i] - f.intercept - f.slope * x[i]);
  f.rms = std::sqrt(r / m);
  return f;
}

// observed convergence order from errors at successive halvings
inline Vec observed_orders(const Vec& err) {
  Vec p;
  for (std::size_t i = 1; i < err.size(); ++i) p.push_back(std::log2(err[i - 1] / err[i]));
  return p;
}

// Gauss-Legendre nodes/weights on [-1,1] (Newton on P_n)
inline void gauss_legendre(int n, Vec& x, Vec& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1, p2 = 0;
      for (int j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1);
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1 - z * z) * pp * pp);
  }
}

// composite Simpson on uniform samples (odd count); falls back to trapezoid end correction
inline double simpson(const Vec& f, double h) {
  const std::size_t m = f.size();
  if (m < 2) return 0;
  if (m == 2) return 0.5 * h * (f[0] + f[1]);
  double s = 0;
  std::size_t last = (m % 2 == 1) ? m - 1 : m - 2;
  for (std::size_t i = 0; i + 2 <= last; i += 2) s += h / 3 * (f[i] + 4 * f[i + 1] + f[i + 2]);
  if (last != m - 1) {  // one extra interval: 3-point quadratic over the last segment
    s += h * (5 * f[m - 1] + 8 * f[m - 2] - f[m - 3]) / 12;
  }
  return s;
}

inline double trapezoid(const Vec& f, double h) {
  if (f.size() < 2) return 0;
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
  return s * h;
}

// area of the unit sphere S^{n-1}
inline double sphere_area(int n) {
  return 2 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

}  // namespace radlab
