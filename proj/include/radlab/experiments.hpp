#pragma once
// Batch experiments behind the command-line driver: configuration, validation,
// the seven named runs, and report emission. Each run is a list of checks with
// a metrics table; module errors inside a check fail that check with the message.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "radlab/constraint_data.hpp"
#include "radlab/geometry.hpp"
#include "radlab/linear_wave.hpp"
#include "radlab/operators.hpp"
#include "radlab/semilinear.hpp"

#ifndef RADLAB_VERSION
#define RADLAB_VERSION "0.1.0"
#endif

namespace radlab {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> v{"atlas-selftest", "data-build",    "data-residual",   "ops-verify",
                                          "semilinear-decay", "wave-isometry", "wave-radiate"};
  return v;
}

inline bool known_experiment(const std::string& e) {
  for (const auto& x : experiment_names())
    if (x == e) return true;
  return false;
}

// ---- configuration -------------------------------------------------------------------

struct ExperimentConfig {
  std::string experiment;
  int n = 3;
  int l_max = 4;
  double delta = 0.25, delta_p = 0.2, lambda = 0.5;
  double alpha = std::numeric_limits<double>::quiet_NaN();  // NaN: (n-1)/lambda - 1/16
  double tau0 = 10;
  int N = 32;                           // torus nodes per axis
  Vec h{0.05, 0.025};                   // lattice steps
  std::vector<int> levels{64, 128, 256};  // commutator resolutions
  long samples = 0;
  Vec eps{1e-3};
  std::uint64_t seed = 1;
  std::string out;  // empty: no files

  double alpha_value() const { return std::isnan(alpha) ? (n - 1) / lambda - 1.0 / 16 : alpha; }
};

inline ExperimentConfig default_config(const std::string& e) {
  if (!known_experiment(e)) fail(Errc::Usage, "unknown experiment '" + e + "'");
  ExperimentConfig c;
  c.experiment = e;
  if (e == "atlas-selftest") c.samples = 4000;
  if (e == "ops-verify") {
    c.n = 4;
    c.samples = 100000;
  }
  if (e == "wave-radiate") {
    c.l_max = 2;
    c.h = {0.005};
  }
  if (e == "wave-isometry") {
    c.samples = 20;
    c.h = {0.01};
  }
  if (e == "data-residual") {
    c.N = 64;
    c.eps = {1e-2, 1e-3, 1e-4};
  }
  if (e == "semilinear-decay") c.n = 5;
  return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline bool parse_double(const std::string& s, double& v) {
  std::size_t pos = 0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

inline bool parse_long(const std::string& s, long& v) {
  std::size_t pos = 0;
  try {
    v = std::stol(s, &pos);
  } catch (...) {
    return false;
  }
  return pos == s.size();
}

}  // namespace detail

// flat key = value text, '#' starts a comment
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream in(text);
  std::string line, errs;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errs += "line " + std::to_string(no) + ": expected key = value; ";
      continue;
    }
    const std::string k = detail::trim(line.substr(0, eq)), v = detail::trim(line.substr(eq + 1));
    if (k.empty() || v.empty()) errs += "line " + std::to_string(no) + ": empty key or value; ";
    else kv[k] = v;
  }
  if (!errs.empty()) fail(Errc::Config, errs);
  return kv;
}

inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::Config, "cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

// applies settings on top of c; every unknown key or malformed value is reported
inline void apply_settings(ExperimentConfig& c, const std::map<std::string, std::string>& kv) {
  std::string errs;
  auto bad = [&](const std::string& k, const std::string& v) { errs += "bad value for " + k + ": '" + v + "'; "; };
  for (const auto& [k, v] : kv) {
    double d = 0;
    long i = 0;
    if (k == "experiment") {
      if (v != c.experiment) errs += "config is for experiment '" + v + "'; ";
    } else if (k == "n" || k == "l_max" || k == "N") {
      if (!detail::parse_long(v, i)) bad(k, v);
      else (k == "n" ? c.n : k == "l_max" ? c.l_max : c.N) = static_cast<int>(i);
    } else if (k == "samples") {
      if (!detail::parse_long(v, i)) bad(k, v);
      else c.samples = i;
    } else if (k == "seed") {
      std::size_t pos = 0;
      try {
        c.seed = std::stoull(v, &pos);
      } catch (...) {
        pos = 0;
      }
      if (pos != v.size() || v.front() == '-') bad(k, v);
    } else if (k == "delta" || k == "delta_p" || k == "lambda" || k == "alpha" || k == "tau0") {
      if (!detail::parse_double(v, d)) bad(k, v);
      else (k == "delta" ? c.delta : k == "delta_p" ? c.delta_p : k == "lambda" ? c.lambda : k == "alpha" ? c.alpha : c.tau0) = d;
    } else if (k == "eps" || k == "h") {
      Vec xs;
      for (const auto& s : detail::split_list(v)) {
        if (!detail::parse_double(s, d)) {
          bad(k, v);
          break;
        }
        xs.push_back(d);
      }
      (k == "eps" ? c.eps : c.h) = xs;
    } else if (k == "levels") {
      std::vector<int> xs;
      for (const auto& s : detail::split_list(v)) {
        if (!detail::parse_long(s, i)) {
          bad(k, v);
          break;
        }
        xs.push_back(static_cast<int>(i));
      }
      c.levels = xs;
    } else if (k == "out") {
      c.out = v;
    } else {
      errs += "unknown key '" + k + "'; ";
    }
  }
  if (!errs.empty()) fail(Errc::Config, errs);
}

// every violated cross-parameter condition, empty when the config is usable
inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> v;
  if (!known_experiment(c.experiment)) v.push_back("unknown experiment '" + c.experiment + "'");
  if (c.n < 3 || c.n > 6) v.push_back("n in [3, 6] fails");
  if (c.l_max < 0 || c.l_max > 8) v.push_back("l_max in [0, 8] fails");
  if (!(c.delta > 0 && c.delta < 0.5)) v.push_back("0<δ<1/2 fails");
  if (!(c.delta_p > 0)) v.push_back("δ′>0 fails");
  if (!(c.delta_p < c.delta)) v.push_back("δ′<δ fails");
  if (!(0.5 - c.delta_p < 1 - 2 * c.delta)) v.push_back("1/2−δ′<1−2δ fails");
  if (!(c.lambda >= 0.5 - c.delta_p && c.lambda <= 1 - 2 * c.delta)) v.push_back("λ in [1/2−δ′, 1−2δ] fails");
  const double hi = (c.n - 1) / c.lambda, a = c.alpha_value();
  if (!(a > hi - 0.125 && a < hi)) v.push_back("α in ((n−1)/λ−1/8, (n−1)/λ) fails");
  if (!(c.tau0 > 8)) v.push_back("τ₀>8 fails");
  if (c.N < 8 || c.N > 256 || c.N % 2) v.push_back("N even in [8, 256] fails");
  if (c.h.empty()) v.push_back("h list is empty");
  for (double x : c.h)
    if (!(x > 0 && x <= 0.1)) v.push_back("lattice step h in (0, 0.1] fails");
  if (c.levels.size() < 2) v.push_back("levels needs at least two resolutions");
  for (std::size_t k = 0; k < c.levels.size(); ++k)
    if (c.levels[k] < 8 || (k && c.levels[k] <= c.levels[k - 1])) v.push_back("levels must increase from >= 8");
  if (c.samples < 0) v.push_back("samples >= 0 fails");
  if (c.eps.empty()) v.push_back("eps list is empty");
  for (double e : c.eps)
    if (!(e > 0)) v.push_back("eps > 0 fails");
  if (c.experiment == "data-residual") {
    if (c.eps.size() < 2) v.push_back("data-residual needs at least two eps values");
    for (double e : c.eps)
      if (!(e < 0.1)) v.push_back("data-residual needs eps < 0.1 (nonlinear residual refuses |h| >= 0.1)");
  }
  if (c.experiment == "wave-isometry" && c.samples < 2) v.push_back("wave-isometry needs samples >= 2");
  return v;
}

// ---- reports ---------------------------------------------------------------------------

enum class Status { Pass, Fail, Skip };

struct CheckResult {
  std::string name;
  Status status = Status::Fail;
  std::string detail;
};

struct MetricRow {
  std::string check, metric;
  double value = 0;
};

struct RunReport {
  std::string experiment;
  std::vector<std::string> parameters;
  std::vector<CheckResult> checks;
  std::vector<MetricRow> metrics;
  std::vector<std::string> files;

  void metric(const std::string& check, const std::string& name, double v) { metrics.push_back({check, name, v}); }
  void add(const std::string& name, bool pass, const std::string& detail) {
    checks.push_back({name, pass ? Status::Pass : Status::Fail, detail});
  }
  void skip(const std::string& name, const std::string& why) { checks.push_back({name, Status::Skip, why}); }
  bool all_pass() const {
    for (const auto& c : checks)
      if (c.status == Status::Fail) return false;
    return true;
  }
  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

inline std::string fmt(double x, int prec = 3) {
  char b[48];
  std::snprintf(b, sizeof b, "%.*g", prec, x);
  return b;
}

inline std::string num17(double x) {
  char b[48];
  std::snprintf(b, sizeof b, "%.17g", x);
  return b;
}

// module errors become a failed check carrying the error text
inline void guarded(RunReport& rep, const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const Error& e) {
    rep.add(name, false, std::string("error: ") + e.what());
  }
}

inline std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

template <class T>
std::string list_str(const std::vector<T>& v) {
  std::vector<std::string> s;
  for (const T& x : v) s.push_back(fmt(static_cast<double>(x), 6));
  return join(s, ",");
}

inline Vec unit_vector(Rng& r, int n) {
  Vec v(n);
  for (double& x : v) x = r.normal();
  const double m = norm2(v);
  for (double& x : v) x /= m;
  return v;
}

inline std::string file_in(const ExperimentConfig& c, const std::string& name) {
  return (std::filesystem::path(c.out) / name).string();
}

}  // namespace detail

// canonical parameter text; its FNV-1a hash goes into the report provenance
inline std::string canonical_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "experiment=" << c.experiment << "\nn=" << c.n << "\nl_max=" << c.l_max << "\ndelta=" << detail::num17(c.delta)
    << "\ndelta_p=" << detail::num17(c.delta_p) << "\nlambda=" << detail::num17(c.lambda)
    << "\nalpha=" << detail::num17(c.alpha_value()) << "\ntau0=" << detail::num17(c.tau0) << "\nN=" << c.N
    << "\nh=" << detail::list_str(c.h) << "\nlevels=" << detail::list_str(c.levels) << "\nsamples=" << c.samples
    << "\neps=" << detail::list_str(c.eps) << "\nseed=" << c.seed << "\n";
  return o.str();
}

inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char b[20];
  std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(h));
  return b;
}

// ---- atlas-selftest ----------------------------------------------------------------------

inline void run_atlas_selftest(const ExperimentConfig& c, RunReport& rep) {
  const Chart all[] = {Chart::Omega0, Chart::Omega1, Chart::Omega2, Chart::Omega3, Chart::Omega4, Chart::Omega5};
  detail::guarded(rep, "chart_transitions", [&] {
    Rng rng(c.seed, 1);
    double worst = 0;
    long overlaps = 0;
    for (long k = 0; k < c.samples; ++k) {
      const double r = std::exp(std::log(1e-2) + rng.uniform() * std::log(1e5));
      CartPoint P{r * 2.5 * rng.uniform(), detail::unit_vector(rng, c.n)};
      for (double& x : P.x) x *= r;
      std::vector<ChartPoint> in;
      for (Chart ch : all) {
        try {
          in.push_back(to_chart(P, ch));
        } catch (const Error&) {
        }
      }
      const double scale = 1 + std::abs(P.t) + norm2(P.x);
      for (const auto& a : in) {
        const CartPoint A = from_chart(a);
        worst = std::max(worst, std::abs(A.t - P.t) / scale);
        for (std::size_t i = 0; i < P.x.size(); ++i) worst = std::max(worst, std::abs(A.x[i] - P.x[i]) / scale);
        for (const auto& b : in) {
          const ChartPoint bb = to_chart(A, b.chart);
          for (std::size_t i = 0; i < b.coords.size(); ++i)
            worst = std::max(worst, std::abs(bb.coords[i] - b.coords[i]) / (1 + std::abs(b.coords[i])));
          ++overlaps;
        }
      }
    }
    rep.metric("chart_transitions", "points", static_cast<double>(c.samples));
    rep.metric("chart_transitions", "chart_pairs", static_cast<double>(overlaps));
    rep.metric("chart_transitions", "max_rel_error", worst);
    rep.add("chart_transitions", worst <= 1e-12 && overlaps > c.samples,
            "max round-trip error " + detail::fmt(worst) + " <= 1e-12 over " + std::to_string(overlaps) + " chart pairs");
  });
  detail::guarded(rep, "worked_examples", [&] {
    const ChartPoint q = to_chart(CartPoint{1, {2, 0, 0}}, Chart::Omega2);
    const CartPoint P = from_chart({Chart::Omega3, {0, 0.25}, {1, 0, 0}});
    const double e = std::abs(q.coords[0] - 0.5) + std::abs(q.coords[1] - 1) + std::abs(P.t - 4) + std::abs(P.x[0] - 4);
    rep.metric("worked_examples", "abs_error", e);
    rep.add("worked_examples", e <= 1e-15, "(t,x)=(1,2e1) -> Omega2 (0.5,1); Omega3 (0,0.25) -> (4,4e1)");
  });
  detail::guarded(rep, "defining_functions", [&] {
    Rng rng(c.seed, 2);
    double lo = 1e300, hi = 0;
    for (long k = 0; k < 5 * c.samples; ++k) {
      const double r = std::exp(std::log(1e-2) + rng.uniform() * std::log(1e7));
      CartPoint P{r * 2.5 * rng.uniform(), detail::unit_vector(rng, c.n)};
      for (double& x : P.x) x *= r;
      std::vector<DefiningFunctions> d;
      for (Chart ch : all) {
        try {
          d.push_back(defining_functions(to_chart(P, ch)));
        } catch (const Error&) {
        }
      }
      for (const auto& a : d)
        for (const auto& b : d)
          for (auto m : {&DefiningFunctions::rho0, &DefiningFunctions::rho1, &DefiningFunctions::rho2}) {
            lo = std::min(lo, a.*m / (b.*m));
            hi = std::max(hi, a.*m / (b.*m));
          }
    }
    rep.metric("defining_functions", "min_ratio", lo);
    rep.metric("defining_functions", "max_ratio", hi);
    rep.add("defining_functions", lo > 1e-2 && hi < 1e2,
            "overlap ratios in [" + detail::fmt(lo) + ", " + detail::fmt(hi) + "] within [1e-2, 1e2]");
  });
  detail::guarded(rep, "gamma0_table", [&] {
    int bad = 0;
    for (int n : {3, 4, 5, 6}) {
      for (Chart ch : {Chart::Omega1, Chart::Omega2, Chart::Omega3}) {
        const double g = gamma0(ch, n);
        rep.metric("gamma0_table", std::string(chart_name(ch)) + "_n" + std::to_string(n), g + 0.0);
        bad += g != -(n - 1.0) * (n - 3.0) / 4;
      }
      for (Chart ch : {Chart::Omega4, Chart::Omega5}) {
        const double g = gamma0(ch, n);
        rep.metric("gamma0_table", std::string(chart_name(ch)) + "_n" + std::to_string(n), g + 0.0);
        bad += g != -(n * n - 1.0) / 4;
      }
    }
    rep.add("gamma0_table", bad == 0,
            std::to_string(20 - bad) + "/20 exact: -(n-1)(n-3)/4 on Omega1-3, -(n^2-1)/4 on Omega4-5, n=3..6");
  });
}

// ---- ops-verify ------------------------------------------------------------------------------

namespace detail {

inline std::vector<PolarFn> commutator_fields() {
  auto unitv = [](const Vec& th) {
    const double r = norm2(th);
    Vec u = th;
    for (double& x : u) x /= r;
    return u;
  };
  return {
      [=](double a, double b, const Vec& th) {
        const Vec u = unitv(th);
        return std::exp(0.3 * a) * std::cos(b) * (u[0] + u[1] * u[2]);
      },
      [=](double a, double b, const Vec& th) {
        const Vec u = unitv(th);
        return std::sin(2 * b) / (1 + a * a) * u[0] * u[0];
      },
      [=](double a, double b, const Vec& th) {
        const Vec u = unitv(th);
        return std::cos(a * b) * std::exp(u[1] - u[2]);
      },
  };
}

// stretched/uniform boxes: on a log map x d_x is an exact lattice shift and the
// discrete commutator would vanish identically
inline std::pair<Axis, Axis> commutator_box(Chart c) {
  switch (c) {
    case Chart::Omega0: return {sinh_axis("t", 0.5, 1.5, 2, 1), uniform_axis("r", 0.5, 1.5, 2)};
    case Chart::Omega1: return {sinh_axis("s", -0.5, 0.5, 2, 1), uniform_axis("rho", 0.2, 0.8, 2)};
    case Chart::Omega2: return {uniform_axis("a", 0.2, 0.7, 2), sinh_axis("b", 0.2, 0.8, 2, 0.5)};
    case Chart::Omega3: return {sinh_axis("tau", -2, 2, 2, 1), uniform_axis("rho", 0.1, 0.6, 2)};
    case Chart::Omega4: return {uniform_axis("abar", 0.2, 0.7, 2), sinh_axis("bbar", 0.2, 0.8, 2, 0.5)};
    default: return {sinh_axis("phi", 0.2, 0.8, 2, 0.5), uniform_axis("Y", 0.2, 0.7, 2)};
  }
}

struct Poly2 {  // sum c[k][j] q1^k q2^j
  std::vector<std::vector<double>> c;
  double eval(double x, double y, int dx = 0, int dy = 0) const {
    double s = 0;
    for (std::size_t k = 0; k < c.size(); ++k)
      for (std::size_t j = 0; j < c[k].size(); ++j) {
        if (static_cast<int>(k) < dx || static_cast<int>(j) < dy) continue;
        double f = c[k][j];
        for (int m = 0; m < dx; ++m) f *= static_cast<double>(k - m);
        for (int m = 0; m < dy; ++m) f *= static_cast<double>(j - m);
        s += f * std::pow(x, static_cast<double>(k - dx)) * std::pow(y, static_cast<double>(j - dy));
      }
    return s;
  }
  double box(Chart ch, int n, int l, double x, double y) const {
    const auto o = chart_operator(ch, x, y, n);
    return o.A11 * eval(x, y, 2, 0) + 2 * o.A12 * eval(x, y, 1, 1) + o.A22 * eval(x, y, 0, 2) + o.B1 * eval(x, y, 1, 0) +
           o.B2 * eval(x, y, 0, 1) - o.C * angular_eigenvalue(l, n) * eval(x, y);
  }
};

// manufactured solution v = p, source (Box + gamma0) p; residuals at 33, 65, 129 nodes
inline Vec divergence_errors(Chart ch, const TimelikeFunction& T, const LogWeight& w, const Axis& a1, const Axis& a2,
                             int n, int l, const Poly2& p) {
  FormParams P;
  P.n = n;
  P.dp = T.dp;
  const double g0 = gamma0(ch, n);
  Vec e;
  for (int N : {33, 65, 129}) {
    Axis b1 = uniform_axis(a1.name, a1.lo(), a1.hi(), N), b2 = uniform_axis(a2.name, a2.lo(), a2.hi(), N);
    auto v = ModeGrid::sample(ch, n, l, b1, b2, [&](double x, double y) { return p.eval(x, y); });
    auto f = ModeGrid::sample(ch, n, l, b1, b2, [&](double x, double y) { return p.box(ch, n, l, x, y) + g0 * p.eval(x, y); });
    e.push_back(divergence_residual(v, f, T, w, g0, P).residual);
  }
  return e;
}

}  // namespace detail

inline void run_ops_verify(const ExperimentConfig& c, RunReport& rep) {
  detail::guarded(rep, "commutators", [&] {
    Rng rng(c.seed, 3);
    const Vec theta = detail::unit_vector(rng, c.n);
    const auto fields = detail::commutator_fields();
    double worst_order = 1e300, worst_err = 0;
    int cases = 0, exact = 0, bad = 0;
    std::string where;
    for (Chart ch : {Chart::Omega0, Chart::Omega1, Chart::Omega2, Chart::Omega3, Chart::Omega4, Chart::Omega5}) {
      const auto [A1, A2] = detail::commutator_box(ch);
      std::vector<CommutatorField> Zs{CommutatorField::Z00, CommutatorField::Zij};
      if (ch == Chart::Omega3) {
        Zs.push_back(CommutatorField::DTau);
        Zs.push_back(CommutatorField::RhoDRho);
      }
      for (auto Z : Zs) {
        double chart_min = 1e300;
        for (std::size_t k = 0; k < fields.size(); ++k) {
          const auto R = commutator_residual(ch, Z, fields[k], A1, A2, c.levels, c.n, theta, 0, 2);
          ++cases;
          // lattice operators that commute exactly leave only roundoff, which grows
          // under refinement (second differences amplify it ~N^3); truncation error shrinks
          const bool at_roundoff = *std::max_element(R.err.begin(), R.err.end()) < 1e-6 && R.err.back() > R.err.front();
          worst_err = std::max(worst_err, R.err.back());
          if (at_roundoff) {
            ++exact;
            continue;
          }
          chart_min = std::min(chart_min, R.min_order());
          if (R.min_order() < 1.9 || R.err.back() >= 1e-2) {
            ++bad;
            where += std::string(chart_name(ch)) + "/" + field_name(Z) + "/f" + std::to_string(k) + " ";
          }
        }
        worst_order = std::min(worst_order, chart_min);
        rep.metric("commutators", std::string(chart_name(ch)) + "_" + field_name(Z) + "_min_order",
                   chart_min == 1e300 ? std::numeric_limits<double>::infinity() : chart_min);
      }
    }
    rep.metric("commutators", "cases", cases);
    rep.metric("commutators", "cases_at_roundoff", exact);
    rep.metric("commutators", "finest_max_residual", worst_err);
    rep.add("commutators", bad == 0,
            "min order " + detail::fmt(worst_order) + " >= 1.9 over " + std::to_string(cases - exact) + " cases (" +
                std::to_string(exact) + " at roundoff), levels " + detail::list_str(c.levels) +
                (bad ? "; failing: " + where : ""));
  });
  detail::guarded(rep, "divergence_identity", [&] {
    const detail::Poly2 p{{{1.0, 0.5, -0.4, 0.2}, {0.3, 0.2, 0.1}, {-0.2, 0.3}, {0.1}}};
    double worst = 1e300;
    for (int l : {0, 2}) {
      const Vec e2 = detail::divergence_errors(Chart::Omega2, {2, TKind::T, c.delta_p}, {0.25, 1},
                                               uniform_axis("a", 0.1, 0.5, 2), uniform_axis("b", 0.2, 0.8, 2), c.n, l, p);
      const Vec e3 = detail::divergence_errors(Chart::Omega3, {3, TKind::T, c.delta_p, 5.9375, c.tau0}, {0.1, 1},
                                               uniform_axis("tau", -1, 1, 2), uniform_axis("rho", 0.02, 0.04, 2), c.n, l, p);
      for (const auto& [name, e] : {std::pair{"Omega2", e2}, std::pair{"Omega3", e3}}) {
        const Vec o = observed_orders(e);
        const double m = *std::min_element(o.begin(), o.end());
        worst = std::min(worst, m);
        rep.metric("divergence_identity", std::string(name) + "_l" + std::to_string(l) + "_min_order", m);
        rep.metric("divergence_identity", std::string(name) + "_l" + std::to_string(l) + "_finest_residual", e.back());
      }
    }
    rep.add("divergence_identity", worst >= 1.9, "manufactured-solution order " + detail::fmt(worst) + " >= 1.9 (Omega2, Omega3 boxes, l=0,2)");
  });
  detail::guarded(rep, "jet_inequality", [&] {
    JetInequalityParams p{c.n, c.delta, c.delta_p, c.lambda, c.alpha_value()};
    Rng rng(c.seed, 4);
    const auto R = jet_inequality_check(p, random_jet_sampler(rng), static_cast<std::size_t>(c.samples));
    rep.metric("jet_inequality", "samples", static_cast<double>(R.samples));
    rep.metric("jet_inequality", "violations", static_cast<double>(R.violations));
    rep.metric("jet_inequality", "worst_ratio", R.worst_ratio);
    rep.add("jet_inequality", R.violations == 0,
            std::to_string(R.violations) + " violations in " + std::to_string(R.samples) + " jets (n=" +
                std::to_string(c.n) + ", alpha=" + detail::fmt(c.alpha_value(), 6) + "), worst ratio " +
                detail::fmt(R.worst_ratio));
  });
}

// ---- wave-radiate / wave-isometry ---------------------------------------------------------

namespace detail {

struct BumpSpec {
  int l;
  double a0, c0, w0, a1, c1, w1;
  double support() const { return std::max(a0 != 0 ? c0 + w0 : 0.0, a1 != 0 ? c1 + w1 : 0.0); }
};

inline CauchyModeData bump_mode(int n, const BumpSpec& b) {
  return make_mode_data(
      n, b.l, b.support(), [&](double r) { return b.a0 * std::pow(r, b.l) * bump((r - b.c0) / b.w0); },
      [&](double r) { return b.a1 * std::pow(r, b.l) * bump((r - b.c1) / b.w1); });
}

inline std::vector<BumpSpec> radiate_data(int l_max) {
  std::vector<BumpSpec> v{{0, 1.0, 1.5, 1.2, 0.6, 1.2, 1.0},
                          {1, 1.0, 1.5, 1.2, 0.5, 1.2, 1.0},
                          {2, 0.5, 1.5, 1.2, 1.0, 1.2, 1.0},
                          {0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.8},
                          {1, 1.0, 1.2, 0.9, -0.4, 1.2, 0.9}};
  for (auto& b : v) b.l = std::min(b.l, l_max);
  return v;
}

// closed-form n = 3, l = 0 radiation field: R(tau) = (U1(-tau) - U0'(-tau)) / 2 with odd extensions
inline RadiationField radial_oracle_field(const CauchyModeData& d, double T, double dt) {
  RadiationField R;
  R.n = 3;
  R.tau0 = -T;
  R.dtau = dt;
  R.Ntau = static_cast<std::size_t>(std::llround(2 * T / dt)) + 1;
  RadiationMode M;
  for (std::size_t k = 0; k < R.Ntau; ++k) {
    const double s = -R.tau(k);
    const double U1 = s >= 0 ? d.U1(s) : -d.U1(-s);
    M.values.push_back(0.5 * (U1 - d.U0(std::abs(s), 1)));
  }
  R.modes.push_back(std::move(M));
  return R;
}

}  // namespace detail

inline void run_wave_radiate(const ExperimentConfig& c, RunReport& rep) {
  const auto data = detail::radiate_data(c.l_max);
  RadiationOptions o;
  o.h = o.dr = c.h.front();
  detail::guarded(rep, "two_path_agreement", [&] {
    double worst = 0;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto d = detail::bump_mode(c.n, data[k]);
      const auto A = radiation_field(d, RadMethod::CartesianLimit, o);
      const auto B = radiation_field(d, RadMethod::Compactified, o);
      const double e = radiation_rel_l2(A, B);
      worst = std::max(worst, e);
      rep.metric("two_path_agreement", "datum" + std::to_string(k) + "_l" + std::to_string(data[k].l) + "_rel_l2", e);
      if (!c.out.empty()) {
        const std::string base = "radiation_" + std::to_string(k);
        write_radiation(detail::file_in(c, base + "_cartesian.field"), A);
        write_radiation(detail::file_in(c, base + "_compactified.field"), B);
        rep.files.push_back(base + "_cartesian.field");
        rep.files.push_back(base + "_compactified.field");
      }
    }
    rep.add("two_path_agreement", worst <= 1e-3,
            "max rel L2 " + detail::fmt(worst) + " <= 1e-3 over " + std::to_string(data.size()) + " data (n=" +
                std::to_string(c.n) + ", h=" + detail::fmt(o.h) + ")");
  });
  if (c.n % 2 == 0) {
    rep.skip("strong_huygens", "sharp support only holds in odd n");
    return;
  }
  // the oracle is for radial data; l > 0 modes carry an O(h^2) tail from the
  // discretised potential, reported but not gated
  detail::guarded(rep, "strong_huygens", [&] {
    RadiationOptions q = o;
    q.tau_min = -6;
    q.tau_max = 6;
    double worst_tail = 0, min_inside = 1e300;
    int radial = 0;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const auto d = detail::bump_mode(c.n, data[k]);
      const double Rs = data[k].support();
      for (auto m : {RadMethod::CartesianLimit, RadMethod::Compactified}) {
        const auto R = radiation_field(d, m, q);
        double inside = 0, tail = 0;
        for (std::size_t j = 0; j < R.Ntau; ++j) {
          const double t = R.tau(j), v = std::abs(R.modes[0].values[j]);
          if (std::abs(t) <= Rs + 2 * R.dtau) inside = std::max(inside, v);
          else tail = std::max(tail, v);
        }
        const double rel = inside > 0 ? tail / inside : tail;
        rep.metric("strong_huygens",
                   "datum" + std::to_string(k) + "_l" + std::to_string(data[k].l) +
                       (m == RadMethod::CartesianLimit ? "_cartesian" : "_compactified") + "_relative_tail",
                   rel);
        if (data[k].l != 0) continue;
        ++radial;
        min_inside = std::min(min_inside, inside);
        worst_tail = std::max(worst_tail, rel);
      }
    }
    if (radial == 0) fail(Errc::InvalidInput, "no radial datum in the set");
    rep.add("strong_huygens", worst_tail <= 1e-6 && min_inside > 0,
            "radial data: tail beyond |tau| <= R + 2 cells " + detail::fmt(worst_tail) +
                " <= 1e-6 of the peak (both methods; l > 0 tails listed in metrics)");
  });
}

inline void run_wave_isometry(const ExperimentConfig& c, RunReport& rep) {
  detail::guarded(rep, "isometry_cv", [&] {
    Rng rng(c.seed, 5);
    std::vector<SphericalData> samples;
    for (long s = 0; s < c.samples; ++s) {
      SphericalData D;
      for (int l = 0; l <= c.l_max; ++l) {
        const double c0 = rng.normal(), c1 = rng.normal(), ctr = rng.uniform(1.0, 2.0), w = rng.uniform(0.6, 1.0);
        auto d = make_mode_data(c.n, l, ctr + w, [&](double r) { return c0 * std::pow(r, l) * bump((r - ctr) / w); },
                                [&](double r) { return c1 * std::pow(r, l) * bump((r - ctr) / w); });
        D.push_back({rng.uniform() < 0.5 ? l : -l, std::move(d)});
      }
      samples.push_back(std::move(D));
    }
    RadiationOptions o;
    o.h = c.h.front();
    o.tau_min = -4;
    o.tau_max = 4;
    const auto S = isometry_check(samples, RadMethod::Compactified, o);
    rep.metric("isometry_cv", "kappa_mean", S.mean);
    rep.metric("isometry_cv", "kappa_cv", S.cv);
    for (std::size_t k = 0; k < S.kappa.size(); ++k) rep.metric("isometry_cv", "kappa_" + std::to_string(k), S.kappa[k]);
    if (!c.out.empty()) {
      write_radiation(detail::file_in(c, "radiation_sample0.field"), radiation_field(samples[0], RadMethod::Compactified, o));
      rep.files.push_back("radiation_sample0.field");
    }
    rep.add("isometry_cv", S.cv <= 1e-3,
            "CV(kappa) " + detail::fmt(S.cv) + " <= 1e-3 over " + std::to_string(S.kappa.size()) +
                " data, l <= " + std::to_string(c.l_max) + "; mean kappa " + detail::fmt(S.mean, 6));
  });
  if (c.n != 3) {
    rep.skip("inversion_roundtrip", "radial inversion is implemented for n = 3 only");
    return;
  }
  detail::guarded(rep, "inversion_roundtrip", [&] {
    const auto d = make_mode_data(
        3, 0, 8.0, [](double r) { return std::exp(-r * r / 1.44); },
        [](double r) { return 0.8 * std::exp(-r * r / 1.44) * (1 - r * r / 4); }, 1e-3);
    const auto R = detail::radial_oracle_field(d, 7.0, 0.005);
    const auto e = invert_radial_n3(R);
    RadiationOptions o;
    o.h = 0.005;
    o.tau_min = -7;
    o.tau_max = 7;
    const double err = radiation_rel_l2(R, radiation_field(e, RadMethod::Compactified, o));
    rep.metric("inversion_roundtrip", "rel_l2", err);
    rep.add("inversion_roundtrip", err <= 1e-6, "l=0 field -> data -> field rel L2 " + detail::fmt(err) + " <= 1e-6");
  });
}

// ---- data-build / data-residual -----------------------------------------------------------

namespace detail {

inline TorusGrid torus(const ExperimentConfig& c) { return TorusGrid{c.n, c.N, 2 * std::numbers::pi}; }

inline double rel_diff(const Field& a, const Field& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += sq(a[i] - b[i]);
    den += sq(b[i]);
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace detail

inline void run_data_build(const ExperimentConfig& c, RunReport& rep) {
  const TorusGrid g = detail::torus(c);
  Spectral S(g);
  const int kmax = std::min(5, c.N / 2 - 1);
  detail::guarded(rep, "half_laplacian", [&] {
    Rng r(c.seed, 6);
    double worst = 0;
    for (int t = 0; t < 10; ++t) {
      const Field f = random_field(S, r, kmax);
      Field lap(g.size(), 0.0);
      for (int a = 0; a < g.n; ++a) detail::axpy(lap, -1.0, S.dd(f, a, a));
      worst = std::max(worst, detail::rel_diff(S.half_lap(S.half_lap(f)), lap));
    }
    rep.metric("half_laplacian", "max_rel_error", worst);
    rep.add("half_laplacian", worst <= 1e-12,
            "||P^2 f - Lap f|| / ||Lap f|| " + detail::fmt(worst) + " <= 1e-12 on 10 fields, n=" + std::to_string(g.n) +
                ", N=" + std::to_string(g.N));
  });
  detail::guarded(rep, "hodge_split", [&] {
    Rng r(c.seed, 7);
    OneForm u;
    for (int a = 0; a < g.n; ++a) u.push_back(random_field(S, r, kmax));
    const HodgeSplit h = hodge_project(S, u);
    const Field du = codiff(S, u);
    double e = detail::rel_diff(codiff(S, h.closed), du);
    e = std::max(e, max_abs(codiff(S, h.coclosed)) / max_abs(du));
    double um = 0;
    for (const Field& f : u) um = std::max(um, max_abs(f));
    for (const auto& [ij, f] : exterior_d(S, h.closed)) e = std::max(e, max_abs(f) / um);
    rep.metric("hodge_split", "max_rel_error", e);
    rep.add("hodge_split", e <= 1e-12, "closed/coclosed identities " + detail::fmt(e) + " <= 1e-12");
  });
  SymTensorPair lin, gauge;
  detail::guarded(rep, "linear_constraints", [&] {
    Rng r(c.seed, 8);
    lin = solve_linear_constraints(S, random_free_data(S, r, std::min(3, kmax), true));
    const Residual res = constraint_residual(S, lin, Order::Linear);
    rep.metric("linear_constraints", "relative_residual", res.relative());
    rep.metric("linear_constraints", "scale", res.scale);
    Rng r2(c.seed, 8);
    const SymTensorPair again = solve_linear_constraints(S, random_free_data(S, r2, std::min(3, kmax), true));
    const bool same = again.h0 == lin.h0 && again.h1 == lin.h1;
    rep.add("linear_constraints", res.relative() <= 1e-10 && same,
            "linearised constraint residual " + detail::fmt(res.relative()) + " <= 1e-10 (relative)" +
                (same ? "; rerun bit-identical" : "; rerun differs"));
  });
  detail::guarded(rep, "gauge_data", [&] {
    Rng r(c.seed, 9);
    gauge = solve_harmonic_gauge_data(S, random_free_data(S, r, std::min(3, kmax), false));
    const double gr = gauge_residual(S, gauge, Order::Linear).relative();
    const double cr = constraint_residual(S, gauge, Order::Linear).relative();
    rep.metric("gauge_data", "gauge_relative_residual", gr);
    rep.metric("gauge_data", "constraint_relative_residual", cr);
    rep.add("gauge_data", gr <= 1e-10 && cr <= 1e-9,
            "gauge residual " + detail::fmt(gr) + " <= 1e-10; constraint residual " + detail::fmt(cr) + " <= 1e-9");
  });
  if (!c.out.empty()) {
    if (!lin.h0.empty()) {
      write_pair(detail::file_in(c, "constraint_data.field"), lin);
      rep.files.push_back("constraint_data.field");
    }
    if (!gauge.h0.empty()) {
      write_pair(detail::file_in(c, "gauge_data.field"), gauge);
      rep.files.push_back("gauge_data.field");
    }
  }
}

inline void run_data_residual(const ExperimentConfig& c, RunReport& rep) {
  detail::guarded(rep, "full_residual_slope", [&] {
    const TorusGrid g = detail::torus(c);
    Spectral S(g);
    Rng r(c.seed, 10);
    SymTensorPair d = solve_linear_constraints(S, random_free_data(S, r, std::min(3, c.N / 2 - 1), true));
    d = d.scaled(1.0 / d.max_h0());
    const double lin = constraint_residual(S, d, Order::Linear).relative();
    rep.metric("full_residual_slope", "unit_linear_relative_residual", lin);
    Vec le, lr;
    std::ostringstream csv;
    csv << "eps,max_rms";
    for (int e = 0; e <= g.n; ++e) csv << ",rms" << e;
    csv << "\n";
    for (double e : c.eps) {
      const Residual R = constraint_residual(S, d.scaled(e), Order::Full);
      le.push_back(std::log(e));
      lr.push_back(std::log(R.max_rms()));
      rep.metric("full_residual_slope", "max_rms_eps_" + detail::fmt(e), R.max_rms());
      csv << detail::num17(e) << "," << detail::num17(R.max_rms());
      for (double x : R.rms) csv << "," << detail::num17(x);
      csv << "\n";
    }
    const double slope = fit_line(le, lr).slope;
    rep.metric("full_residual_slope", "slope", slope);
    if (!c.out.empty()) {
      std::ofstream f(detail::file_in(c, "residual.csv"));
      if (!f) fail(Errc::Io, "cannot write residual.csv");
      f << csv.str();
      rep.files.push_back("residual.csv");
    }
    rep.add("full_residual_slope", slope >= 1.9 && slope <= 2.1 && lin <= 1e-10,
            "nonlinear residual slope " + detail::fmt(slope, 4) + " in [1.9, 2.1] over eps " + detail::list_str(c.eps) +
                " (n=" + std::to_string(g.n) + ", N=" + std::to_string(g.N) + "); linear part " + detail::fmt(lin));
  });
}

// ---- semilinear-decay ----------------------------------------------------------------------

inline void run_semilinear_decay(const ExperimentConfig& c, RunReport& rep) {
  auto spec = [&](double h) {
    ModelSpec s;
    s.n = c.n;
    s.eps = c.eps.front();
    s.delta = c.delta;
    s.dp = c.delta_p;
    s.tau0 = c.tau0;
    s.R = std::max(30.0, c.tau0 + 20);
    s.h = h;
    return s;
  };
  detail::guarded(rep, "decay_slopes", [&] {
    std::map<int, Vec> slopes;
    double bound = 0, worst = 1e300;
    for (double h : c.h) {
      const auto s = spec(h);
      const auto L = evolve_semilinear(s, model_data(s));
      for (int dom : {2, 3}) {
        auto rep_e = weighted_energy_M(energy_grid(L, dom, s), dom, 2, s.delta, s);
        const auto F = decay_fit(rep_e, s.delta, 0);
        bound = F.bound;
        worst = std::min(worst, F.slope);
        slopes[dom].push_back(F.slope);
        rep.metric("decay_slopes", "domain" + std::to_string(dom) + "_h" + detail::fmt(h) + "_slope", F.slope);
        if (!c.out.empty()) {
          const std::string name = "energy_domain" + std::to_string(dom) + "_h" + detail::fmt(h) + ".csv";
          std::ofstream f(detail::file_in(c, name));
          if (!f) fail(Errc::Io, "cannot write " + name);
          write_energy_csv(f, rep_e);
          rep.files.push_back(name);
        }
      }
    }
    rep.add("decay_slopes", worst >= bound,
            "min fitted slope of M0 " + detail::fmt(worst, 4) + " >= -(1/2-delta)-0.1 = " + detail::fmt(bound, 4) +
                " (domains 2, 3; n=" + std::to_string(c.n) + ", eps=" + detail::fmt(c.eps.front()) + ")");
    if (c.h.size() < 2) {
      rep.skip("decay_stability", "needs two lattice steps");
      return;
    }
    double spread = 0;
    for (const auto& [dom, v] : slopes) spread = std::max(spread, std::abs(v[0] - v[1]));
    rep.metric("decay_stability", "max_slope_change", spread);
    rep.add("decay_stability", spread <= 0.03,
            "slope change between h=" + detail::fmt(c.h[0]) + " and " + detail::fmt(c.h[1]) + ": " + detail::fmt(spread) +
                " <= 0.03");
  });
  detail::guarded(rep, "picard", [&] {
    double worst_ratio = 0, worst_limit = 0;
    for (double h : c.h) {
      const auto s = spec(h);
      const auto d = model_data(s);
      const auto P = picard_iterate(s, d, 5);
      for (int l = 1; l <= 5; ++l)
        rep.metric("picard", "h" + detail::fmt(h) + "_ratio_" + std::to_string(l), P.states[l].ratio);
      for (int l = 2; l <= 5; ++l) worst_ratio = std::max(worst_ratio, P.states[l].ratio);
      const double lim = lattice_rel_l2(P.last, evolve_semilinear(s, d));
      rep.metric("picard", "h" + detail::fmt(h) + "_limit_vs_direct", lim);
      worst_limit = std::max(worst_limit, lim);
    }
    rep.add("picard_contraction", worst_ratio <= 0.5,
            "max mu_{l+1}/mu_l for l=1..4: " + detail::fmt(worst_ratio) + " <= 0.5");
    rep.add("picard_limit", worst_limit <= 1e-6, "iterate 5 vs direct evolution rel L2 " + detail::fmt(worst_limit) + " <= 1e-6");
  });
  detail::guarded(rep, "holder_linear", [&] {
    const auto d = detail::bump_mode(3, {1, 1.0, 1.5, 1.2, 0.5, 1.2, 1.0});
    CompactOptions co;
    co.h = 0.01;
    co.u_max = 4;
    const auto L = evolve_mode_compactified(d, co);
    const auto H = holder_fit(lattice_to_chart(L, Chart::Omega3, uniform_axis("tau", -2, 2, 81), uniform_axis("rho", 0, 0.02, 41)), 1.0);
    rep.metric("holder_linear", "slope", H.slope);
    rep.add("holder_linear", !H.exact && H.slope >= 0.95, "smooth linear run: Hoelder slope " + detail::fmt(H.slope, 4) + " >= 0.95");
  });
  detail::guarded(rep, "holder_semilinear", [&] {
    double worst = 1e300;
    for (double h : c.h) {
      const auto s = spec(h);
      const auto L = evolve_semilinear(s, model_data(s));
      const auto g = lattice_to_chart(L, Chart::Omega3, uniform_axis("tau", -8, 8, 81), uniform_axis("rho", 0, 0.02, 41));
      const auto H = holder_fit(g, s.delta);
      if (H.exact) fail(Errc::DegenerateData, "semilinear trace is constant near null infinity");
      worst = std::min(worst, H.slope);
      rep.metric("holder_semilinear", "h" + detail::fmt(h) + "_slope", H.slope);
      if (!c.out.empty() && h == c.h.front()) {
        write_field(detail::file_in(c, "semilinear_scri.field"), g);
        rep.files.push_back("semilinear_scri.field");
      }
    }
    rep.add("holder_semilinear", worst >= c.delta - 0.05,
            "semilinear run: Hoelder slope " + detail::fmt(worst, 4) + " >= delta - 0.05 = " + detail::fmt(c.delta - 0.05));
  });
}

// ---- driver -----------------------------------------------------------------------------

inline RunReport run_experiment(const ExperimentConfig& c) {
  const auto v = validate_config(c);
  if (!v.empty()) fail(Errc::Config, detail::join(v, "; "));
  if (!c.out.empty()) std::filesystem::create_directories(c.out);
  RunReport rep;
  rep.experiment = c.experiment;
  std::stringstream ss(canonical_config(c));
  std::string line;
  while (std::getline(ss, line))
    if (line.rfind("experiment=", 0) != 0) rep.parameters.push_back(line);
  const std::string& e = c.experiment;
  if (e == "atlas-selftest") run_atlas_selftest(c, rep);
  else if (e == "ops-verify") run_ops_verify(c, rep);
  else if (e == "wave-radiate") run_wave_radiate(c, rep);
  else if (e == "wave-isometry") run_wave_isometry(c, rep);
  else if (e == "data-build") run_data_build(c, rep);
  else if (e == "data-residual") run_data_residual(c, rep);
  else run_semilinear_decay(c, rep);
  return rep;
}

inline const char* status_name(Status s) { return s == Status::Pass ? "PASS" : s == Status::Fail ? "FAIL" : "SKIP"; }

inline void write_report_txt(std::ostream& o, const RunReport& r, const ExperimentConfig& c) {
  o << "radlab " << r.experiment << "\n";
  o << "version " << RADLAB_VERSION << ", config hash " << config_hash(c) << "\n\nparameters\n";
  for (const auto& p : r.parameters) o << "  " << p << "\n";
  o << "\nchecks\n";
  std::size_t pass = 0, fail_n = 0;
  for (const auto& ch : r.checks) {
    o << "  " << status_name(ch.status) << "  " << ch.name << "  " << ch.detail << "\n";
    pass += ch.status == Status::Pass;
    fail_n += ch.status == Status::Fail;
  }
  o << "\nmetrics\n";
  for (const auto& m : r.metrics) o << "  " << m.check << "  " << m.metric << "  " << detail::num17(m.value) << "\n";
  if (!r.files.empty()) {
    o << "\nfiles\n";
    for (const auto& f : r.files) o << "  " << f << "\n";
  }
  o << "\nresult: " << (fail_n ? "FAIL" : "PASS") << " (" << pass << " pass, " << fail_n << " fail, "
    << r.checks.size() - pass - fail_n << " skipped)\n";
}

// body rows are deterministic; the timestamp lives in a comment line
inline void write_report_csv(std::ostream& o, const RunReport& r, const ExperimentConfig& c) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char ts[32];
  std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  o << "# radlab " << r.experiment << " version=" << RADLAB_VERSION << " config_hash=" << config_hash(c)
    << " generated=" << ts << "\n";
  o << "check,metric,value\n";
  for (const auto& ch : r.checks) {
    o << ch.name << ",status," << status_name(ch.status) << "\n";
  }
  for (const auto& m : r.metrics) o << m.check << "," << m.metric << "," << detail::num17(m.value) << "\n";
}

inline void write_reports(const RunReport& r, const ExperimentConfig& c) {
  if (c.out.empty()) return;
  std::ofstream t(detail::file_in(c, "report.txt")), v(detail::file_in(c, "report.csv"));
  if (!t || !v) fail(Errc::Io, "cannot write reports in " + c.out);
  write_report_txt(t, r, c);
  write_report_csv(v, r, c);
}

}  // namespace radlab
