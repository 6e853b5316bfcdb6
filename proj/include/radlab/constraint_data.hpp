#pragma once
// Initial data on the periodic torus [0,L)^n: Fourier multipliers (P = |xi|, the
// Laplacian and their inverses), the Hodge split of 1-forms, the linear constraint
// and harmonic-gauge solves, nonlinear residuals, the coordinate-change group and
// the induced (g0, k0).
//
// Conventions
//   Lap = -sum_j d_j^2 (positive), symbol |k|^2; P = |k|.
//   Wavenumbers on Nyquist planes are zero, so every derivative symbol vanishes
//   there. Band-limited data carry no Nyquist content; fields with content in the
//   kernel (mean or Nyquist planes) are refused by the inverses.
//   Symmetric (n+1)x(n+1) tensors are stored per independent component in the
//   order 00,01,..,0n,11,..,nn. Index 0 is time, 1..n are the torus axes.

#include <fftw3.h>

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "radlab/common.hpp"
#include "radlab/rng.hpp"

namespace radlab {

using cplx = std::complex<double>;
using Field = std::vector<double>;
using CVec = std::vector<cplx>;

struct TorusGrid {
  int n = 3;
  int N = 32;
  double L = 2 * std::numbers::pi;

  std::size_t size() const {
    std::size_t s = 1;
    for (int d = 0; d < n; ++d) s *= static_cast<std::size_t>(N);
    return s;
  }
  std::size_t spec_size() const { return size() / N * (N / 2 + 1); }
  double h() const { return L / N; }
  void validate() const {
    if (n < 1 || n > 6) fail(Errc::BadParameters, "torus dimension must be in 1..6");
    if (N < 4 || N % 2) fail(Errc::BadParameters, "points per axis must be even and >= 4");
    if (!(L > 0) || !std::isfinite(L)) fail(Errc::BadParameters, "torus side must be positive");
  }
  bool operator==(const TorusGrid&) const = default;
};

// coordinates of node p (row-major, axis 0 slowest)
inline std::array<double, 6> node_coords(const TorusGrid& g, std::size_t p) {
  std::array<double, 6> x{};
  for (int d = g.n - 1; d >= 0; --d) {
    x[d] = (p % g.N) * g.h();
    p /= g.N;
  }
  return x;
}

inline double rms(const Field& f) {
  if (f.empty()) return 0;
  double s = 0;
  for (double v : f) s += v * v;
  return std::sqrt(s / f.size());
}
inline double max_abs(const Field& f) {
  double m = 0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

// ---- wavenumbers --------------------------------------------------------------

struct Wavenumbers {
  std::vector<Vec> k;               // k[axis][s]
  std::vector<std::vector<int>> m;  // signed mode numbers
  Vec k2;                           // |k|^2
};

inline Wavenumbers wavenumbers(const TorusGrid& g) {
  g.validate();
  const std::size_t S = g.spec_size();
  const int Nh = g.N / 2 + 1;
  Wavenumbers w;
  w.k.assign(g.n, Vec(S));
  w.m.assign(g.n, std::vector<int>(S));
  w.k2.assign(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    std::size_t r = s;
    for (int d = g.n - 1; d >= 0; --d) {
      const int len = d == g.n - 1 ? Nh : g.N;
      int m = static_cast<int>(r % len);
      r /= len;
      if (m > g.N / 2) m -= g.N;
      const double kk = (m == g.N / 2) ? 0.0 : 2 * std::numbers::pi * m / g.L;
      w.m[d][s] = m;
      w.k[d][s] = kk;
      w.k2[s] += kk * kk;
    }
  }
  return w;
}

// ---- FFT engine ---------------------------------------------------------------
// Owns its plans and scratch buffers: one instance per worker.

class Spectral {
 public:
  explicit Spectral(const TorusGrid& g) : g_(g), w_(wavenumbers(g)) {
    std::vector<int> dims(g.n, g.N);
    r_ = fftw_alloc_real(g.size());
    c_ = fftw_alloc_complex(g.spec_size());
    fwd_ = fftw_plan_dft_r2c(g.n, dims.data(), r_, c_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(g.n, dims.data(), c_, r_, FFTW_ESTIMATE);
  }
  ~Spectral() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(r_);
    fftw_free(c_);
  }
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  const TorusGrid& grid() const { return g_; }
  const Wavenumbers& wn() const { return w_; }
  const Vec& k(int axis) const { return w_.k[axis]; }
  const Vec& k2() const { return w_.k2; }

  // normalised coefficients: f(x) = sum_k c_k e^{ik.x}
  CVec forward(const Field& f) const {
    check_size(f);
    std::copy(f.begin(), f.end(), r_);
    fftw_execute(fwd_);
    const double s = 1.0 / g_.size();
    CVec c(g_.spec_size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = cplx(c_[i][0], c_[i][1]) * s;
    return c;
  }
  Field backward(const CVec& c) const {
    for (std::size_t i = 0; i < c.size(); ++i) {
      c_[i][0] = c[i].real();
      c_[i][1] = c[i].imag();
    }
    fftw_execute(bwd_);
    return Field(r_, r_ + g_.size());
  }

  template <class Sym>
  Field apply(const Field& f, Sym sym) const {
    CVec c = forward(f);
    for (std::size_t s = 0; s < c.size(); ++s) c[s] *= sym(s);
    return backward(c);
  }

  // d/dx^{axis+1}
  Field d(const Field& f, int axis) const {
    const Vec& k = w_.k[axis];
    return apply(f, [&](std::size_t s) { return cplx(0, k[s]); });
  }
  Field dd(const Field& f, int a, int b) const {
    const Vec &ka = w_.k[a], &kb = w_.k[b];
    return apply(f, [&](std::size_t s) { return cplx(-ka[s] * kb[s], 0); });
  }
  Field lap(const Field& f) const {
    return apply(f, [&](std::size_t s) { return cplx(w_.k2[s], 0); });
  }
  Field half_lap(const Field& f) const {
    return apply(f, [&](std::size_t s) { return cplx(std::sqrt(w_.k2[s]), 0); });
  }
  Field inv_lap(const Field& f, const std::string& what = "field") const {
    return inverse(f, what, [&](std::size_t s) { return 1.0 / w_.k2[s]; });
  }
  Field inv_half_lap(const Field& f, const std::string& what = "field") const {
    return inverse(f, what, [&](std::size_t s) { return 1.0 / std::sqrt(w_.k2[s]); });
  }

  // largest kernel coefficient relative to the largest coefficient
  double kernel_content(const CVec& c) const {
    double ker = 0, all = 0;
    for (std::size_t s = 0; s < c.size(); ++s) {
      all = std::max(all, std::abs(c[s]));
      if (w_.k2[s] == 0) ker = std::max(ker, std::abs(c[s]));
    }
    return all > 0 ? ker / all : 0.0;
  }

 private:
  void check_size(const Field& f) const {
    if (f.size() != g_.size()) fail(Errc::InvalidInput, "field size does not match the torus grid");
  }
  template <class Inv>
  Field inverse(const Field& f, const std::string& what, Inv inv) const {
    CVec c = forward(f);
    if (kernel_content(c) > 1e-12)
      fail(Errc::MeanObstruction, what + " has nonzero mean (or Nyquist) content; cannot invert");
    for (std::size_t s = 0; s < c.size(); ++s) c[s] = w_.k2[s] == 0 ? cplx(0) : c[s] * inv(s);
    return backward(c);
  }

  TorusGrid g_;
  Wavenumbers w_;
  double* r_ = nullptr;
  fftw_complex* c_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

// ---- spectral fields / P --------------------------------------------------------

struct SpectralField {
  TorusGrid grid;
  CVec c;
};

inline SpectralField to_spectral(const Spectral& S, const Field& f) { return {S.grid(), S.forward(f)}; }
inline Field to_real(const Spectral& S, const SpectralField& f) {
  if (!(f.grid == S.grid())) fail(Errc::InvalidInput, "spectral field belongs to another grid");
  return S.backward(f.c);
}

inline SpectralField half_laplacian(const SpectralField& f) {
  const Wavenumbers w = wavenumbers(f.grid);
  if (f.c.size() != w.k2.size()) fail(Errc::InvalidInput, "coefficient count does not match the grid");
  SpectralField r = f;
  for (std::size_t s = 0; s < r.c.size(); ++s) r.c[s] *= std::sqrt(w.k2[s]);
  return r;
}
inline Field half_laplacian(const Spectral& S, const Field& f) { return S.half_lap(f); }

// random real band-limited field, modes |m_d| <= kmax, zero mean, unit-normal coefficients
inline Field random_field(const Spectral& S, Rng& rng, int kmax) {
  const TorusGrid& g = S.grid();
  if (kmax >= g.N / 2) fail(Errc::AliasRisk, "band limit must stay below Nyquist");
  const Wavenumbers& w = S.wn();
  const int Nh = g.N / 2 + 1;
  CVec c(g.spec_size());
  auto flat = [&](const std::array<int, 6>& m) {
    std::size_t s = 0;
    for (int d = 0; d < g.n; ++d) {
      const int len = d == g.n - 1 ? Nh : g.N;
      s = s * len + static_cast<std::size_t>((m[d] + g.N) % g.N);
    }
    return s;
  };
  for (std::size_t s = 0; s < c.size(); ++s) {
    bool in = w.k2[s] > 0;
    std::array<int, 6> m{}, mm{};
    for (int d = 0; d < g.n; ++d) {
      m[d] = w.m[d][s];
      mm[d] = -m[d];
      if (std::abs(m[d]) > kmax) in = false;
    }
    if (!in) continue;
    if (m[g.n - 1] > 0) {
      c[s] = cplx(rng.normal(), rng.normal());
      continue;
    }
    // last-axis zero plane: keep Hermitian symmetry
    const std::size_t p = flat(mm);
    if (s < p) {
      c[s] = cplx(rng.normal(), rng.normal());
      c[p] = std::conj(c[s]);
    }
  }
  return S.backward(c);
}

// ---- forms ----------------------------------------------------------------------

using OneForm = std::vector<Field>;  // n components

inline OneForm gradient(const Spectral& S, const Field& f) {
  OneForm u;
  for (int a = 0; a < S.grid().n; ++a) u.push_back(S.d(f, a));
  return u;
}
// codifferential on 1-forms: delta u = -sum d_i u_i
inline Field codiff(const Spectral& S, const OneForm& u) {
  Field r(S.grid().size(), 0.0);
  for (int a = 0; a < S.grid().n; ++a) {
    const Field da = S.d(u[a], a);
    for (std::size_t p = 0; p < r.size(); ++p) r[p] -= da[p];
  }
  return r;
}
// 2-forms stored as w[(i,j)] for i<j
using TwoForm = std::map<std::pair<int, int>, Field>;
inline TwoForm exterior_d(const Spectral& S, const OneForm& u) {
  TwoForm w;
  const int n = S.grid().n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      Field a = S.d(u[j], i), b = S.d(u[i], j);
      for (std::size_t p = 0; p < a.size(); ++p) a[p] -= b[p];
      w[{i, j}] = std::move(a);
    }
  return w;
}
// (delta w)_j = -sum_i d_i w_ij
inline OneForm codiff(const Spectral& S, const TwoForm& w) {
  const int n = S.grid().n;
  OneForm u(n, Field(S.grid().size(), 0.0));
  for (const auto& [ij, f] : w) {
    const auto [i, j] = ij;
    const Field di = S.d(f, i), dj = S.d(f, j);
    for (std::size_t p = 0; p < f.size(); ++p) {
      u[j][p] -= di[p];  // w_ij
      u[i][p] += dj[p];  // w_ji = -w_ij
    }
  }
  return u;
}

struct HodgeSplit {
  OneForm closed, coclosed;
};

// closed = d Lap^{-1} delta u, coclosed = the rest
inline HodgeSplit hodge_project(const Spectral& S, const OneForm& u) {
  const TorusGrid& g = S.grid();
  if (static_cast<int>(u.size()) != g.n) fail(Errc::InvalidInput, "1-form needs n components");
  std::vector<CVec> c;
  for (const Field& f : u) {
    c.push_back(S.forward(f));
    if (S.kernel_content(c.back()) > 1e-12)
      fail(Errc::ZeroModeAmbiguity, "constant 1-forms are both closed and coclosed");
  }
  const Wavenumbers& w = S.wn();
  HodgeSplit h;
  for (int a = 0; a < g.n; ++a) {
    CVec r(g.spec_size());
    for (std::size_t s = 0; s < r.size(); ++s) {
      if (w.k2[s] == 0) continue;
      cplx kd = 0;
      for (int b = 0; b < g.n; ++b) kd += w.k[b][s] * c[b][s];
      r[s] = w.k[a][s] * kd / w.k2[s];
    }
    h.closed.push_back(S.backward(r));
    Field cc = u[a];
    for (std::size_t p = 0; p < cc.size(); ++p) cc[p] -= h.closed[a][p];
    h.coclosed.push_back(std::move(cc));
  }
  return h;
}

// ---- symmetric tensor pairs ----------------------------------------------------------

inline int sym_count(int n) { return (n + 1) * (n + 2) / 2; }
inline int sym_index(int n, int a, int b) {
  if (a > b) std::swap(a, b);
  return a * (n + 1) - a * (a - 1) / 2 + (b - a);
}
inline std::string sym_label(int a, int b) { return std::to_string(a) + std::to_string(b); }

struct SymTensorPair {
  TorusGrid grid;
  std::vector<Field> h0, h1;

  static SymTensorPair zeros(const TorusGrid& g) {
    SymTensorPair d;
    d.grid = g;
    d.h0.assign(sym_count(g.n), Field(g.size(), 0.0));
    d.h1 = d.h0;
    return d;
  }
  Field& c0(int a, int b) { return h0[sym_index(grid.n, a, b)]; }
  Field& c1(int a, int b) { return h1[sym_index(grid.n, a, b)]; }
  const Field& c0(int a, int b) const { return h0[sym_index(grid.n, a, b)]; }
  const Field& c1(int a, int b) const { return h1[sym_index(grid.n, a, b)]; }

  void validate() const {
    const std::size_t m = sym_count(grid.n);
    if (h0.size() != m || h1.size() != m) fail(Errc::InvalidInput, "tensor pair has the wrong component count");
    for (const auto* v : {&h0, &h1})
      for (const Field& f : *v) {
        if (f.size() != grid.size()) fail(Errc::InvalidInput, "tensor component size mismatch");
        for (double x : f)
          if (!std::isfinite(x)) fail(Errc::InvalidInput, "non-finite tensor component");
      }
  }
  SymTensorPair scaled(double e) const {
    SymTensorPair r = *this;
    for (auto* v : {&r.h0, &r.h1})
      for (Field& f : *v)
        for (double& x : f) x *= e;
    return r;
  }
  double max_h0() const {
    double m = 0;
    for (const Field& f : h0) m = std::max(m, max_abs(f));
    return m;
  }
};

inline double max_difference(const SymTensorPair& a, const SymTensorPair& b) {
  double m = 0;
  for (std::size_t c = 0; c < a.h0.size(); ++c)
    for (std::size_t p = 0; p < a.h0[c].size(); ++p)
      m = std::max({m, std::abs(a.h0[c][p] - b.h0[c][p]), std::abs(a.h1[c][p] - b.h1[c][p])});
  return m;
}

// ---- free data --------------------------------------------------------------------
// Names accepted by set(): h0_00, A_l (l>=2), A_ij (i<j), B'_k, C_l, C_ij, h1_0m.
// A_1, C_1 and B''_k are always solved; h1_0m is solved by the gauge system.

inline int off_count(int n) { return n * (n - 1) / 2; }
// (i,j) spatial, 1-based, i<j
inline int off_index(int n, int i, int j) {
  if (i > j) std::swap(i, j);
  int idx = 0;
  for (int a = 1; a < i; ++a) idx += n - a;
  return idx + (j - i - 1);
}

struct FreeData {
  TorusGrid grid;
  Field h0_00;
  std::vector<Field> A, A_off;  // A[l-2], A_off[off_index]
  OneForm Bp;                   // closed part of h0_{0k}
  std::vector<Field> C, C_off;
  std::vector<Field> h1_0;  // h1_{0mu}; empty when the gauge system supplies it

  static FreeData zeros(const TorusGrid& g, bool with_h1_0) {
    FreeData f;
    f.grid = g;
    const Field z(g.size(), 0.0);
    f.h0_00 = z;
    f.A.assign(g.n - 1, z);
    f.A_off.assign(off_count(g.n), z);
    f.Bp.assign(g.n, z);
    f.C = f.A;
    f.C_off = f.A_off;
    if (with_h1_0) f.h1_0.assign(g.n + 1, z);
    return f;
  }

  void set(const std::string& name, Field v) {
    if (v.size() != grid.size()) fail(Errc::InvalidInput, "free component " + name + " has the wrong size");
    *slot(name) = std::move(v);
  }

  Field* slot(const std::string& name) {
    const int n = grid.n;
    auto digit = [&](char ch) {
      if (ch < '0' || ch > '9') fail(Errc::InvalidInput, "bad component name " + name);
      return ch - '0';
    };
    auto solved = [&]() -> Field* { fail(Errc::InvalidInput, name + " is a solved component, not free data"); };
    if (name == "h0_00") return &h0_00;
    if (name.rfind("B''_", 0) == 0) return solved();
    if (name.rfind("B'_", 0) == 0 && name.size() == 4) {
      const int k = digit(name[3]);
      if (k < 1 || k > n) fail(Errc::InvalidInput, "bad component name " + name);
      return &Bp[k - 1];
    }
    if (name.rfind("h1_0", 0) == 0 && name.size() == 5) {
      const int m = digit(name[4]);
      if (m > n) fail(Errc::InvalidInput, "bad component name " + name);
      if (h1_0.empty()) return solved();
      return &h1_0[m];
    }
    if ((name[0] == 'A' || name[0] == 'C') && name.size() >= 3 && name[1] == '_') {
      auto& diag = name[0] == 'A' ? A : C;
      auto& off = name[0] == 'A' ? A_off : C_off;
      if (name.size() == 3) {
        const int l = digit(name[2]);
        if (l == 1) return solved();
        if (l < 2 || l > n) fail(Errc::InvalidInput, "bad component name " + name);
        return &diag[l - 2];
      }
      if (name.size() == 4) {
        const int i = digit(name[2]), j = digit(name[3]);
        if (!(1 <= i && i < j && j <= n)) fail(Errc::InvalidInput, "bad component name " + name);
        return &off[off_index(n, i, j)];
      }
    }
    fail(Errc::InvalidInput, "unknown free component " + name);
  }
};

// B' is drawn as the gradient of a random scalar, so it is closed by construction
inline FreeData random_free_data(const Spectral& S, Rng& rng, int kmax, bool with_h1_0) {
  FreeData f = FreeData::zeros(S.grid(), with_h1_0);
  f.h0_00 = random_field(S, rng, kmax);
  for (Field& v : f.A) v = random_field(S, rng, kmax);
  for (Field& v : f.A_off) v = random_field(S, rng, kmax);
  f.Bp = gradient(S, random_field(S, rng, kmax));
  for (Field& v : f.C) v = random_field(S, rng, kmax);
  for (Field& v : f.C_off) v = random_field(S, rng, kmax);
  for (Field& v : f.h1_0) v = random_field(S, rng, kmax);
  return f;
}

namespace detail {

inline void axpy(Field& y, double a, const Field& x) {
  for (std::size_t p = 0; p < y.size(); ++p) y[p] += a * x[p];
}

// spatial block of h from (A_1, A_l, A_ij): trace T = n/(n-1) A_1,
// h_ll = T/n - A_l (l>=2), h_11 = T/n + sum A_l
inline void assemble_spatial(int n, const Field& A1, const std::vector<Field>& A, const std::vector<Field>& Aoff,
                             std::vector<Field>& h) {
  const double tn = 1.0 / (n - 1);  // (n/(n-1))/n
  Field d1 = A1;
  for (double& v : d1) v *= tn;
  for (int l = 2; l <= n; ++l) {
    Field hl = A1;
    for (std::size_t p = 0; p < hl.size(); ++p) hl[p] = tn * A1[p] - A[l - 2][p];
    axpy(d1, 1.0, A[l - 2]);
    h[sym_index(n, l, l)] = std::move(hl);
  }
  h[sym_index(n, 1, 1)] = std::move(d1);
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) h[sym_index(n, i, j)] = Aoff[off_index(n, i, j)];
}

// symbol of -d_1^2 sum_l X_l + sum_l d_l^2 X_l - sum_{i!=j} d_i d_j X_ij applied in Fourier space
inline CVec trace_rhs(const Spectral& S, const std::vector<CVec>& X, const std::vector<CVec>& Xoff) {
  const int n = S.grid().n;
  const Wavenumbers& w = S.wn();
  CVec r(S.grid().spec_size());
  for (std::size_t s = 0; s < r.size(); ++s) {
    cplx v = 0;
    for (int l = 2; l <= n; ++l) v += (w.k[0][s] * w.k[0][s] - w.k[l - 1][s] * w.k[l - 1][s]) * X[l - 2][s];
    for (int i = 1; i <= n; ++i)
      for (int j = i + 1; j <= n; ++j) v += 2 * w.k[i - 1][s] * w.k[j - 1][s] * Xoff[off_index(n, i, j)][s];
    r[s] = v;
  }
  return r;
}

inline void check_free(const FreeData& f, bool with_h1_0) {
  const TorusGrid& g = f.grid;
  const int n = g.n;
  if (n < 2) fail(Errc::BadParameters, "constraint solve needs n >= 2");
  auto ok = [&](const std::vector<Field>& v, std::size_t m) {
    if (v.size() != m) return false;
    for (const Field& x : v)
      if (x.size() != g.size()) return false;
    return true;
  };
  if (f.h0_00.size() != g.size() || !ok(f.A, n - 1) || !ok(f.A_off, off_count(n)) || !ok(f.Bp, n) ||
      !ok(f.C, n - 1) || !ok(f.C_off, off_count(n)))
    fail(Errc::InvalidInput, "free data has the wrong shape");
  if (with_h1_0 && !ok(f.h1_0, n + 1)) fail(Errc::InvalidInput, "free data lacks h1_0mu");
  if (!with_h1_0 && !f.h1_0.empty())
    fail(Errc::InvalidInput, "h1_0mu is solved by the gauge system and cannot be prescribed");
}

// everything except h1_{0mu}
inline SymTensorPair solve_core(const Spectral& S, const FreeData& f) {
  const TorusGrid& g = S.grid();
  if (!(f.grid == g)) fail(Errc::InvalidInput, "free data belongs to another grid");
  const int n = g.n;
  SymTensorPair d = SymTensorPair::zeros(g);

  // B' must be closed
  const HodgeSplit hb = hodge_project(S, f.Bp);
  double bn = 0, cn = 0;
  for (int a = 0; a < n; ++a) {
    bn = std::max(bn, max_abs(f.Bp[a]));
    cn = std::max(cn, max_abs(hb.coclosed[a]));
  }
  if (cn > 1e-10 * std::max(1.0, bn)) fail(Errc::InvalidInput, "B' is not a closed 1-form");

  // Lap A_1 = rhs
  std::vector<CVec> A, Aoff;
  for (const Field& v : f.A) A.push_back(S.forward(v));
  for (const Field& v : f.A_off) Aoff.push_back(S.forward(v));
  CVec ra = trace_rhs(S, A, Aoff);
  for (std::size_t s = 0; s < ra.size(); ++s) ra[s] = S.k2()[s] == 0 ? cplx(0) : ra[s] / S.k2()[s];
  const Field A1 = S.backward(ra);
  assemble_spatial(n, A1, f.A, f.A_off, d.h0);

  // P C_1 = rhs built from P^{-1} C_l, P^{-1} C_ij
  std::vector<CVec> C, Coff;
  for (int l = 2; l <= n; ++l) C.push_back(S.forward(S.inv_half_lap(f.C[l - 2], "C_" + std::to_string(l))));
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j)
      Coff.push_back(S.forward(S.inv_half_lap(f.C_off[off_index(n, i, j)], "C_" + std::to_string(i) + std::to_string(j))));
  const Field C1 = S.inv_half_lap(S.backward(trace_rhs(S, C, Coff)), "C_1 right-hand side");
  assemble_spatial(n, C1, f.C, f.C_off, d.h1);

  // Lap B'' = d_k tr h1 - sum_i d_i h1_ki
  Field T1(g.size(), 0.0);
  for (int i = 1; i <= n; ++i) axpy(T1, 1.0, d.c1(i, i));
  for (int k = 1; k <= n; ++k) {
    Field R = S.d(T1, k - 1);
    for (int i = 1; i <= n; ++i) axpy(R, -1.0, S.d(d.c1(k, i), i - 1));
    Field B = S.inv_lap(R, "B'' right-hand side");
    axpy(B, 1.0, f.Bp[k - 1]);
    d.c0(0, k) = std::move(B);
  }
  d.c0(0, 0) = f.h0_00;
  return d;
}

}  // namespace detail

inline SymTensorPair solve_linear_constraints(const Spectral& S, const FreeData& f) {
  detail::check_free(f, true);
  SymTensorPair d = detail::solve_core(S, f);
  for (int m = 0; m <= S.grid().n; ++m) d.c1(0, m) = f.h1_0[m];
  return d;
}

// linearised Gamma_mu = 0 fixes h1_{0mu}:
//   h1_00 = 2 sum_i d_i h0_0i - tr h1,   h1_0k = sum_i d_i h0_ki + (d_k h0_00 - d_k tr h0)/2
inline SymTensorPair solve_harmonic_gauge_data(const Spectral& S, const FreeData& f) {
  detail::check_free(f, false);
  SymTensorPair d = detail::solve_core(S, f);
  const int n = S.grid().n;
  const std::size_t m = S.grid().size();
  Field T0(m, 0.0), T1(m, 0.0), h00(m, 0.0);
  for (int i = 1; i <= n; ++i) {
    detail::axpy(T0, 1.0, d.c0(i, i));
    detail::axpy(T1, 1.0, d.c1(i, i));
    detail::axpy(h00, 2.0, S.d(d.c0(0, i), i - 1));
  }
  detail::axpy(h00, -1.0, T1);
  for (int k = 1; k <= n; ++k) {
    Field v(m, 0.0);
    for (int i = 1; i <= n; ++i) detail::axpy(v, 1.0, S.d(d.c0(k, i), i - 1));
    detail::axpy(v, 0.5, S.d(d.c0(0, 0), k - 1));
    detail::axpy(v, -0.5, S.d(T0, k - 1));
    d.c1(0, k) = std::move(v);
  }
  d.c1(0, 0) = std::move(h00);
  return d;
}

// ---- residuals ---------------------------------------------------------------------

enum class Order { Linear, Full };

struct Residual {
  std::vector<Field> eq;  // one grid per equation
  Vec rms;
  double scale = 0;  // largest RMS among the derivative fields entering the equations
  double max_rms() const { return rms.empty() ? 0.0 : *std::max_element(rms.begin(), rms.end()); }
  double relative() const { return scale > 0 ? max_rms() / scale : max_rms(); }
};

namespace detail {

constexpr int kMaxD = 7;

// spectral derivatives of a tensor pair
struct Jet {
  int n = 0;
  std::vector<Field> dh0, dh1;  // [axis * nc + c]
  std::vector<Field> ddh0;      // [(a * n + b) * nc + c], a <= b filled, mirrored by index
  double scale = 0;
};

inline Jet make_jet(const Spectral& S, const SymTensorPair& d, bool second) {
  const int n = S.grid().n, nc = sym_count(n);
  Jet J;
  J.n = n;
  J.dh0.resize(n * nc);
  J.dh1.resize(n * nc);
  if (second) J.ddh0.resize(n * n * nc);
  for (int c = 0; c < nc; ++c) {
    const CVec c0 = S.forward(d.h0[c]), c1 = S.forward(d.h1[c]);
    for (int a = 0; a < n; ++a) {
      const Vec& ka = S.k(a);
      CVec t(c0.size());
      for (std::size_t s = 0; s < t.size(); ++s) t[s] = cplx(0, ka[s]) * c0[s];
      J.dh0[a * nc + c] = S.backward(t);
      for (std::size_t s = 0; s < t.size(); ++s) t[s] = cplx(0, ka[s]) * c1[s];
      J.dh1[a * nc + c] = S.backward(t);
      if (!second) continue;
      for (int b = a; b < n; ++b) {
        const Vec& kb = S.k(b);
        for (std::size_t s = 0; s < t.size(); ++s) t[s] = -ka[s] * kb[s] * c0[s];
        J.ddh0[(a * n + b) * nc + c] = S.backward(t);
      }
    }
    J.scale = std::max(J.scale, rms(d.h1[c]));
  }
  for (const auto* v : {&J.dh0, &J.dh1, &J.ddh0})
    for (const Field& f : *v) J.scale = std::max(J.scale, rms(f));
  return J;
}

// nodal values; spacetime indices, 0 = time
struct Local {
  int D = 0;
  double h0[kMaxD][kMaxD], h1[kMaxD][kMaxD];
  double d0[kMaxD][kMaxD][kMaxD];  // d0[c][a][b] = d_c h_ab at t=0 (c=0 -> h1)
  double dh1[kMaxD][kMaxD][kMaxD];  // [i>=1]
  double dd0[kMaxD][kMaxD][kMaxD][kMaxD];  // [i>=1][j>=1]
  double gi[kMaxD][kMaxD];
  double E[kMaxD][kMaxD], Dm[kMaxD][kMaxD], F[kMaxD][kMaxD];
};

inline void load(Local& L, const SymTensorPair& d, const Jet& J, std::size_t p, bool second) {
  const int n = d.grid.n, D = n + 1, nc = sym_count(n);
  L.D = D;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) {
      const int c = sym_index(n, a, b);
      L.h0[a][b] = d.h0[c][p];
      L.h1[a][b] = L.d0[0][a][b] = d.h1[c][p];
      for (int i = 1; i <= n; ++i) {
        L.d0[i][a][b] = J.dh0[(i - 1) * nc + c][p];
        L.dh1[i][a][b] = J.dh1[(i - 1) * nc + c][p];
        if (!second) continue;
        for (int j = i; j <= n; ++j) L.dd0[i][j][a][b] = L.dd0[j][i][a][b] = J.ddh0[((i - 1) * n + (j - 1)) * nc + c][p];
      }
    }
}

// g^{-1} and, for the full order, the quadratic terms E, D, F at t = 0
inline void metric_terms(Local& L, Order order) {
  const int D = L.D;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) {
      L.E[a][b] = L.Dm[a][b] = L.F[a][b] = 0;
      L.gi[a][b] = a == b ? (a == 0 ? -1.0 : 1.0) : 0.0;
    }
  if (order == Order::Linear) return;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxD, kMaxD>;
  Mat g(D, D);
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) g(a, b) = (a == b ? (a == 0 ? -1.0 : 1.0) : 0.0) + L.h0[a][b];
  Eigen::PartialPivLU<Mat> lu(g);
  if (!(std::abs(lu.determinant()) > 1e-12)) fail(Errc::MetricDegenerate, "metric not invertible at a node");
  const Mat gi = lu.inverse();
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) L.gi[a][b] = gi(a, b);

  double dgi[kMaxD][kMaxD][kMaxD], GL[kMaxD][kMaxD][kMaxD], GU[kMaxD][kMaxD][kMaxD];
  for (int c = 0; c < D; ++c)
    for (int l = 0; l < D; ++l)
      for (int k = 0; k < D; ++k) {
        double s = 0;
        for (int a = 0; a < D; ++a)
          for (int b = 0; b < D; ++b) s += L.gi[l][a] * L.d0[c][a][b] * L.gi[b][k];
        dgi[c][l][k] = -s;
      }
  // Gamma_{ab mu} = d_a h_{mu b} + d_b h_{a mu} - d_mu h_{ab};  Gamma^nu_ab = g^{nu mu} Gamma_{ab mu} / 2
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b)
      for (int mu = 0; mu < D; ++mu) GL[a][b][mu] = L.d0[a][mu][b] + L.d0[b][a][mu] - L.d0[mu][a][b];
  for (int nu = 0; nu < D; ++nu)
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        double s = 0;
        for (int mu = 0; mu < D; ++mu) s += L.gi[nu][mu] * GL[a][b][mu];
        GU[nu][a][b] = 0.5 * s;
      }
  double tr[kMaxD];  // Gamma^d_{l d}
  for (int l = 0; l < D; ++l) {
    tr[l] = 0;
    for (int dd = 0; dd < D; ++dd) tr[l] += GU[dd][l][dd];
  }
  double div[kMaxD];  // d_l g^{l d}
  for (int dd = 0; dd < D; ++dd) {
    div[dd] = 0;
    for (int l = 0; l < D; ++l) div[dd] += dgi[l][l][dd];
  }
  for (int m = 0; m < D; ++m)
    for (int nn = 0; nn < D; ++nn) {
      double e = 0, dm = 0;
      for (int l = 0; l < D; ++l) {
        e += GU[l][m][nn] * tr[l];
        for (int dd = 0; dd < D; ++dd) {
          e -= GU[dd][m][l] * GU[l][nn][dd];
          e -= 0.5 * dgi[m][l][dd] * GL[l][nn][dd];
          dm += -dgi[m][l][dd] * L.d0[l][nn][dd] + 0.5 * dgi[m][l][dd] * L.d0[nn][l][dd];
        }
      }
      for (int dd = 0; dd < D; ++dd) e += 0.5 * div[dd] * GL[m][nn][dd];
      L.E[m][nn] = e;
      L.Dm[m][nn] = dm;
    }
  for (int m = 0; m < D; ++m)
    for (int nn = 0; nn < D; ++nn) L.F[m][nn] = 2 * L.E[m][nn] + L.Dm[m][nn] + L.Dm[nn][m];
}

// the n+1 constraint expressions
inline void constraint_eqs(const Local& L, double* out) {
  const int D = L.D;
  const auto& g = L.gi;
  double c = 0;
  for (int p = 1; p < D; ++p)
    for (int l = 1; l < D; ++l) {
      for (int i = 1; i < D; ++i) {
        for (int j = 1; j < D; ++j) c += g[p][l] * g[i][j] * (L.dd0[i][j][p][l] - L.dd0[i][p][j][l]);
        c += g[p][l] * g[0][i] * (L.dh1[i][p][l] - L.dh1[p][i][l] - L.dd0[i][p][0][l] + L.dd0[p][l][i][0]);
      }
      c -= g[p][l] * L.E[p][l];
    }
  out[0] = c + g[0][0] * L.E[0][0];
  for (int k = 1; k < D; ++k) {
    double v = 0;
    for (int i = 1; i < D; ++i)
      for (int j = 1; j < D; ++j)
        v += g[0][0] * g[i][j] * (L.dh1[i][k][j] - L.dh1[k][i][j] - L.dd0[i][j][k][0] + L.dd0[k][i][0][j]);
    for (int l = 1; l < D; ++l)
      for (int i = 1; i < D; ++i) {
        v += g[0][l] * g[0][i] * (L.dh1[k][i][l] - L.dh1[i][k][l] + L.dd0[i][l][k][0] - L.dd0[k][l][0][i]);
        for (int j = 1; j < D; ++j)
          v += g[0][l] * g[i][j] * (-L.dd0[i][j][k][l] + L.dd0[i][k][j][l] + L.dd0[i][l][k][j] - L.dd0[k][l][i][j]);
      }
    v += 2 * g[0][0] * L.E[0][k];
    for (int l = 1; l < D; ++l) v += 2 * g[0][l] * L.E[k][l];
    out[k] = v;
  }
}

// Gamma_mu at t=0 (first-order gauge conditions)
inline void gauge_first(const Local& L, double* out) {
  const int D = L.D;
  const auto& g = L.gi;
  double a = 0.5 * g[0][0] * L.h1[0][0];
  for (int i = 1; i < D; ++i) {
    for (int j = 1; j < D; ++j) a -= 0.5 * g[i][j] * L.h1[i][j];
    for (int b = 0; b < D; ++b) a += g[i][b] * L.d0[i][0][b];
  }
  out[0] = a;
  for (int k = 1; k < D; ++k) {
    double v = 0;
    for (int b = 0; b < D; ++b) {
      v += g[0][b] * L.h1[k][b];
      for (int i = 1; i < D; ++i) v += g[i][b] * L.d0[i][k][b];
      for (int al = 0; al < D; ++al) v -= 0.5 * g[al][b] * L.d0[k][al][b];
    }
    out[k] = v;
  }
}

// g^00 d_t Gamma_mu after eliminating d_t^2 h with the reduced equation
inline void gauge_second(const Local& L, double* out) {
  const int D = L.D;
  const auto& g = L.gi;
  double a = 0;
  for (int i = 1; i < D; ++i)
    for (int j = 1; j < D; ++j) a += g[0][0] * g[i][j] * (L.dh1[i][0][j] - 0.5 * L.dd0[i][j][0][0]);
  for (int p = 1; p < D; ++p)
    for (int l = 1; l < D; ++l) {
      for (int i = 1; i < D; ++i) {
        a += g[p][l] * g[0][i] * L.dh1[i][p][l];
        for (int j = 1; j < D; ++j) a += 0.5 * g[p][l] * g[i][j] * L.dd0[i][j][p][l];
      }
      a -= 0.5 * g[p][l] * L.F[p][l];
    }
  out[0] = a + g[0][0] * L.E[0][0];
  for (int k = 1; k < D; ++k) {
    double v = 0;
    for (int b = 0; b < D; ++b) {
      double t = 0;
      for (int i = 1; i < D; ++i) {
        t -= 2 * g[0][i] * L.dh1[i][k][b];
        for (int j = 1; j < D; ++j) t -= g[i][j] * L.dd0[i][j][k][b];
      }
      v += g[0][b] * (t + L.F[k][b]);
      for (int i = 1; i < D; ++i) v += g[0][0] * g[i][b] * L.dh1[i][k][b];
      for (int al = 0; al < D; ++al) v -= 0.5 * g[0][0] * g[al][b] * L.dh1[k][al][b];
    }
    out[k] = v - g[0][0] * L.Dm[0][k];
  }
}

inline void check_pair(const Spectral& S, const SymTensorPair& d, Order order) {
  if (!(d.grid == S.grid())) fail(Errc::InvalidInput, "tensor pair belongs to another grid");
  d.validate();
  if (order == Order::Full && d.max_h0() >= 0.1)
    fail(Errc::MetricDegenerate, "|h| >= 0.1: refusing the nonlinear evaluation");
}

template <class Eval>
Residual evaluate(const Spectral& S, const SymTensorPair& d, Order order, int neq, bool second, Eval eval) {
  const Jet J = make_jet(S, d, second);
  const std::size_t m = S.grid().size();
  Residual r;
  r.eq.assign(neq, Field(m));
  auto L = std::make_unique<Local>();
  double out[2 * kMaxD];
  for (std::size_t p = 0; p < m; ++p) {
    load(*L, d, J, p, second);
    metric_terms(*L, order);
    eval(*L, out);
    for (int e = 0; e < neq; ++e) r.eq[e][p] = out[e];
  }
  for (const Field& f : r.eq) r.rms.push_back(rms(f));
  r.scale = J.scale;
  return r;
}

}  // namespace detail

// n+1 constraint expressions (Hamiltonian first, then momentum k = 1..n)
inline Residual constraint_residual(const Spectral& S, const SymTensorPair& d, Order order) {
  detail::check_pair(S, d, order);
  return detail::evaluate(S, d, order, S.grid().n + 1, true,
                          [](const detail::Local& L, double* o) { detail::constraint_eqs(L, o); });
}

// 2(n+1) gauge expressions: Gamma_mu, then its eliminated time derivative
inline Residual gauge_residual(const Spectral& S, const SymTensorPair& d, Order order) {
  detail::check_pair(S, d, order);
  const int D = S.grid().n + 1;
  return detail::evaluate(S, d, order, 2 * D, true, [D](const detail::Local& L, double* o) {
    detail::gauge_first(L, o);
    detail::gauge_second(L, o + D);
  });
}

// ---- composition with Id + f0 --------------------------------------------------------

enum class Interp { Cubic, Trigonometric };

inline const char* interp_name(Interp m) { return m == Interp::Cubic ? "cubic" : "trigonometric"; }

// samples periodic grid fields at x + s(x), s = spatial shift (n components)
class Composer {
 public:
  Composer(const Spectral& S, const std::vector<Field>& shift, Interp mode) : S_(S), mode_(mode) {
    const TorusGrid& g = S.grid();
    if (static_cast<int>(shift.size()) != g.n) fail(Errc::InvalidInput, "shift needs n components");
    for (const Field& f : shift)
      for (double v : f)
        if (!std::isfinite(v) || std::abs(v) >= 0.5 * g.L)
          fail(Errc::InterpolationOutOfRange, "displacement is not within half a period");
    pts_.resize(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
      const auto x = node_coords(g, p);
      for (int d = 0; d < g.n; ++d) pts_[p][d] = x[d] + shift[d][p];
    }
  }

  std::vector<Field> operator()(const std::vector<Field>& fs) const {
    return mode_ == Interp::Cubic ? cubic(fs) : trig(fs);
  }
  Field operator()(const Field& f) const { return (*this)(std::vector<Field>{f})[0]; }

 private:
  std::vector<Field> cubic(const std::vector<Field>& fs) const {
    const TorusGrid& g = S_.grid();
    const int n = g.n, N = g.N;
    std::vector<Field> out(fs.size(), Field(g.size()));
    int nb = 1;
    for (int d = 0; d < n; ++d) nb *= 4;
    for (std::size_t p = 0; p < g.size(); ++p) {
      int base[6];
      double w[6][4];
      for (int d = 0; d < n; ++d) {
        const double u = pts_[p][d] / g.h();
        const double fl = std::floor(u), t = u - fl;
        base[d] = static_cast<int>(fl) - 1;
        w[d][0] = -t * (t - 1) * (t - 2) / 6;
        w[d][1] = (t + 1) * (t - 1) * (t - 2) / 2;
        w[d][2] = -(t + 1) * t * (t - 2) / 2;
        w[d][3] = (t + 1) * t * (t - 1) / 6;
      }
      for (int q = 0; q < nb; ++q) {
        int r = q;
        double wt = 1;
        std::size_t idx = 0;
        for (int d = 0; d < n; ++d) {
          const int o = r % 4;
          r /= 4;
          wt *= w[d][o];
          idx = idx * N + static_cast<std::size_t>(((base[d] + o) % N + N) % N);
        }
        for (std::size_t f = 0; f < fs.size(); ++f) out[f][p] += wt * fs[f][idx];
      }
    }
    return out;
  }

  // exact evaluation of the band-limited Fourier series (Nyquist dropped); O(N^n) per point
  std::vector<Field> trig(const std::vector<Field>& fs) const {
    const TorusGrid& g = S_.grid();
    const int n = g.n, N = g.N, Nh = N / 2 + 1;
    std::vector<CVec> cs;
    for (const Field& f : fs) cs.push_back(S_.forward(f));
    const std::size_t S = g.spec_size();
    const Wavenumbers& w = S_.wn();
    std::vector<double> wt(S);
    for (std::size_t s = 0; s < S; ++s) {
      const int ml = w.m[n - 1][s];
      wt[s] = ml == 0 ? 1.0 : (ml == N / 2 ? 0.0 : 2.0);
    }
    std::vector<Field> out(fs.size(), Field(g.size()));
    std::vector<CVec> e(n);
    CVec phase(S);
    for (std::size_t p = 0; p < g.size(); ++p) {
      for (int d = 0; d < n; ++d) {
        const int len = d == n - 1 ? Nh : N;
        e[d].resize(len);
        for (int i = 0; i < len; ++i) {
          int m = i > N / 2 ? i - N : i;
          const double k = m == N / 2 ? 0.0 : 2 * std::numbers::pi * m / g.L;
          e[d][i] = std::polar(1.0, k * pts_[p][d]);
        }
      }
      // phase[s] = prod_d e_d[i_d], built axis by axis
      std::size_t cnt = 1;
      phase[0] = 1.0;
      for (int d = 0; d < n; ++d) {
        const std::size_t len = e[d].size();
        for (std::size_t a = cnt; a-- > 0;)
          for (std::size_t i = len; i-- > 0;) phase[a * len + i] = phase[a] * e[d][i];
        cnt *= len;
      }
      for (std::size_t f = 0; f < fs.size(); ++f) {
        double v = 0;
        const CVec& c = cs[f];
        for (std::size_t s = 0; s < S; ++s) v += wt[s] * (c[s].real() * phase[s].real() - c[s].imag() * phase[s].imag());
        out[f][p] = v;
      }
    }
    return out;
  }

  const Spectral& S_;
  Interp mode_;
  std::vector<std::array<double, 6>> pts_;
};

// ---- gauge group ---------------------------------------------------------------------

struct GaugeElement {
  TorusGrid grid;
  std::vector<Field> f0, f1;  // n+1 components each, f0[0] == 0
  bool small = true;

  static GaugeElement identity(const TorusGrid& g) {
    GaugeElement e;
    e.grid = g;
    e.f0.assign(g.n + 1, Field(g.size(), 0.0));
    e.f1 = e.f0;
    return e;
  }
  void validate() const {
    const int D = grid.n + 1;
    if (static_cast<int>(f0.size()) != D || static_cast<int>(f1.size()) != D)
      fail(Errc::InvalidInput, "gauge element needs n+1 components");
    for (const auto* v : {&f0, &f1})
      for (const Field& f : *v) {
        if (f.size() != grid.size()) fail(Errc::InvalidInput, "gauge component size mismatch");
        for (double x : f)
          if (!std::isfinite(x)) fail(Errc::InvalidInput, "non-finite gauge component");
      }
    for (double x : f0[0])
      if (x != 0) fail(Errc::InvalidInput, "f0^0 must vanish: the Cauchy surface is preserved");
  }
  bool f0_zero() const {
    for (const Field& f : f0)
      for (double x : f)
        if (x != 0) return false;
    return true;
  }
};

constexpr double kGaugeSmall = 0.1;

// builds an element and sets the small flag (sup of f0, d f0, f1 below kGaugeSmall)
inline GaugeElement make_gauge_element(const Spectral& S, std::vector<Field> f0, std::vector<Field> f1) {
  GaugeElement e;
  e.grid = S.grid();
  e.f0 = std::move(f0);
  e.f1 = std::move(f1);
  e.validate();
  double m = 0;
  for (int a = 0; a <= e.grid.n; ++a) {
    m = std::max({m, max_abs(e.f0[a]), max_abs(e.f1[a])});
    if (a == 0) continue;
    for (int i = 0; i < e.grid.n; ++i) m = std::max(m, max_abs(S.d(e.f0[a], i)));
  }
  e.small = m < kGaugeSmall;
  return e;
}

namespace detail {

inline void require_small(const GaugeElement& f) {
  f.validate();
  if (!f.small) fail(Errc::InvalidInput, "gauge element is not small");
}

inline std::vector<Field> spatial(const std::vector<Field>& f) { return {f.begin() + 1, f.end()}; }

inline double eta(int a, int b) { return a == b ? (a == 0 ? -1.0 : 1.0) : 0.0; }

struct Pulled {
  SymTensorPair d;         // h1 still without the f2 contribution
  std::vector<Field> JTK;  // (J^T K)_{nu alpha}, row-major (n+1)^2
};

// data in the new coordinates for given (f0, f1), except the d_t^2 f terms:
// g = J^T (gbar o psi) J, J = [e0 + f1 | e_i + d_i f0]
inline Pulled pull(const Spectral& S, const GaugeElement& f, const SymTensorPair& hb, Interp mode) {
  const TorusGrid& g = S.grid();
  const int n = g.n, D = n + 1, nc = sym_count(n);
  const std::size_t m = g.size();
  // gbar, d_0 gbar = hbar1, d_i gbar at the shifted points
  std::vector<Field> src;
  for (int c = 0; c < nc; ++c) src.push_back(hb.h0[c]);
  for (int c = 0; c < nc; ++c) src.push_back(hb.h1[c]);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < nc; ++c) src.push_back(S.d(hb.h0[c], i));
  if (!f.f0_zero()) src = Composer(S, spatial(f.f0), mode)(src);
  std::vector<Field> df0(D * n);  // d_i f0^a
  for (int a = 1; a < D; ++a)
    for (int i = 0; i < n; ++i) df0[a * n + i] = S.d(f.f0[a], i);
  std::vector<Field> df1(D * n);
  for (int a = 0; a < D; ++a)
    for (int i = 0; i < n; ++i) df1[a * n + i] = S.d(f.f1[a], i);

  Pulled P;
  P.d = SymTensorPair::zeros(g);
  P.JTK.assign(D * D, Field(m));
  double J[kMaxD][kMaxD], Jt[kMaxD][kMaxD], K[kMaxD][kMaxD], X[kMaxD][kMaxD], KJ[kMaxD][kMaxD];
  for (std::size_t p = 0; p < m; ++p) {
    for (int a = 0; a < D; ++a) {
      J[a][0] = (a == 0 ? 1.0 : 0.0) + f.f1[a][p];
      Jt[a][0] = 0;
      for (int i = 1; i < D; ++i) {
        J[a][i] = (a == i ? 1.0 : 0.0) + (a == 0 ? 0.0 : df0[a * n + i - 1][p]);
        Jt[a][i] = df1[a * n + i - 1][p];
      }
    }
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        const int c = sym_index(n, a, b);
        K[a][b] = eta(a, b) + src[c][p];
        // X = J^gamma_0 d_gamma gbar
        double x = J[0][0] * src[nc + c][p];
        for (int i = 1; i < D; ++i) x += J[i][0] * src[(1 + i) * nc + c][p];
        X[a][b] = x;
      }
    for (int a = 0; a < D; ++a)
      for (int nu = 0; nu < D; ++nu) {
        double s = 0;
        for (int b = 0; b < D; ++b) s += K[a][b] * J[b][nu];
        KJ[a][nu] = s;  // (K J)_{a nu}
      }
    for (int nu = 0; nu < D; ++nu)
      for (int a = 0; a < D; ++a) P.JTK[nu * D + a][p] = KJ[a][nu];
    for (int mu = 0; mu < D; ++mu)
      for (int nu = mu; nu < D; ++nu) {
        double s0 = 0, s1 = 0;
        for (int a = 0; a < D; ++a) {
          s0 += J[a][mu] * KJ[a][nu];
          s1 += Jt[a][mu] * KJ[a][nu] + KJ[a][mu] * Jt[a][nu];
          for (int b = 0; b < D; ++b) s1 += J[a][mu] * X[a][b] * J[b][nu];
        }
        const int c = sym_index(n, mu, nu);
        P.d.h0[c][p] = s0 - eta(mu, nu);
        P.d.h1[c][p] = s1;
      }
  }
  return P;
}

// f2 from Gamma_mu = 0 on the transformed data; w = J^T K f2 enters h1_00 (twice) and h1_0k
inline std::vector<Field> f2_from(const Spectral& S, const Pulled& P) {
  const TorusGrid& g = S.grid();
  const int n = g.n, D = n + 1;
  if (P.d.max_h0() >= 0.1) fail(Errc::MetricDegenerate, "|h| >= 0.1 after the coordinate change");
  const Jet J = make_jet(S, P.d, false);
  std::vector<Field> f2(D, Field(g.size()));
  auto L = std::make_unique<Local>();
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxD, kMaxD>;
  using V = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxD, 1>;
  double G[kMaxD];
  for (std::size_t p = 0; p < g.size(); ++p) {
    load(*L, P.d, J, p, false);
    metric_terms(*L, Order::Full);
    gauge_first(*L, G);
    Mat M(D, D);
    V w(D);
    for (int nu = 0; nu < D; ++nu) {
      w(nu) = -G[nu] / L->gi[0][0];
      for (int a = 0; a < D; ++a) M(nu, a) = P.JTK[nu * D + a][p];
    }
    Eigen::PartialPivLU<Mat> lu(M);
    if (!(std::abs(lu.determinant()) > 1e-12)) fail(Errc::SingularSystem, "second time derivative of f undetermined at a node");
    const V x = lu.solve(w);
    for (int a = 0; a < D; ++a) f2[a][p] = x(a);
  }
  return f2;
}

inline void add_f2(const Pulled& P, const std::vector<Field>& f2, SymTensorPair& d) {
  const int n = d.grid.n, D = n + 1;
  for (std::size_t p = 0; p < d.grid.size(); ++p)
    for (int nu = 0; nu < D; ++nu) {
      double w = 0;
      for (int a = 0; a < D; ++a) w += P.JTK[nu * D + a][p] * f2[a][p];
      d.c1(0, nu)[p] += nu == 0 ? 2 * w : w;
    }
}

}  // namespace detail

// d_t^2 f at t=0 making the transformed data satisfy Gamma_mu = 0
inline std::vector<Field> solve_f2(const Spectral& S, const SymTensorPair& hbar, const GaugeElement& f,
                                   Interp mode = Interp::Cubic) {
  detail::check_pair(S, hbar, Order::Full);
  detail::require_small(f);
  return detail::f2_from(S, detail::pull(S, f, hbar, mode));
}

// action of (0, f1) written out component by component with gbar = m + hbar0 unshifted
inline SymTensorPair g1_action(const Spectral& S, const std::vector<Field>& f1, const std::vector<Field>& f2,
                               const SymTensorPair& hb) {
  const TorusGrid& g = S.grid();
  const int n = g.n, D = n + 1, nc = sym_count(n);
  std::vector<Field> dh0(n * nc), df1(n * D);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < nc; ++c) dh0[i * nc + c] = S.d(hb.h0[c], i);
    for (int a = 0; a < D; ++a) df1[i * D + a] = S.d(f1[a], i);
  }
  SymTensorPair d = SymTensorPair::zeros(g);
  constexpr int M = detail::kMaxD;
  double gb[M][M], X[M][M], v1[M], v2[M];
  for (std::size_t p = 0; p < g.size(); ++p) {
    for (int a = 0; a < D; ++a) {
      v1[a] = f1[a][p];
      v2[a] = f2[a][p];
    }
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        const int c = sym_index(n, a, b);
        gb[a][b] = detail::eta(a, b) + hb.h0[c][p];
        // hbar1 + hbar1 f1^0 + d_i hbar0 f1^i
        double x = hb.h1[c][p] * (1 + v1[0]);
        for (int i = 1; i < D; ++i) x += dh0[(i - 1) * nc + c][p] * v1[i];
        X[a][b] = x;
      }
    auto gv = [&](int a, const double* v) {
      double s = 0;
      for (int b = 0; b < D; ++b) s += gb[a][b] * v[b];
      return s;
    };
    auto vgv = [&](const double* u, const double* v) {
      double s = 0;
      for (int a = 0; a < D; ++a) s += u[a] * gv(a, v);
      return s;
    };
    auto Xv = [&](int a, const double* v) {
      double s = 0;
      for (int b = 0; b < D; ++b) s += X[a][b] * v[b];
      return s;
    };
    // h0
    d.c0(0, 0)[p] = hb.c0(0, 0)[p] + 2 * gv(0, v1) + vgv(v1, v1);
    for (int i = 1; i < D; ++i) d.c0(0, i)[p] = hb.c0(0, i)[p] + gv(i, v1);
    for (int i = 1; i < D; ++i)
      for (int j = i; j < D; ++j) d.c0(i, j)[p] = hb.c0(i, j)[p];
    // h1
    double xvv = 0;
    for (int a = 0; a < D; ++a) xvv += v1[a] * Xv(a, v1);
    d.c1(0, 0)[p] = X[0][0] + 2 * Xv(0, v1) + xvv + 2 * gv(0, v2) + 2 * vgv(v1, v2);
    double di[M][M];  // d_i f1^beta
    for (int i = 1; i < D; ++i)
      for (int b = 0; b < D; ++b) di[i][b] = df1[(i - 1) * D + b][p];
    for (int i = 1; i < D; ++i)
      d.c1(0, i)[p] = X[0][i] + Xv(i, v1) + gv(i, v2) + gv(0, di[i]) + vgv(v1, di[i]);
    for (int i = 1; i < D; ++i)
      for (int j = i; j < D; ++j) d.c1(i, j)[p] = X[i][j] + gv(i, di[j]) + gv(j, di[i]);
  }
  return d;
}

// general coordinate change x -> x + f, with d_t^2 f fixed by the gauge conditions
inline SymTensorPair gauge_action_general(const Spectral& S, const GaugeElement& f, const SymTensorPair& hbar,
                                          Interp mode = Interp::Cubic) {
  detail::check_pair(S, hbar, Order::Full);
  detail::require_small(f);
  detail::Pulled P = detail::pull(S, f, hbar, mode);
  const auto f2 = detail::f2_from(S, P);
  detail::add_f2(P, f2, P.d);
  return P.d;
}

inline SymTensorPair gauge_action(const Spectral& S, const GaugeElement& f, const SymTensorPair& hbar,
                                  Interp mode = Interp::Cubic) {
  detail::check_pair(S, hbar, Order::Full);
  detail::require_small(f);
  if (!f.f0_zero()) return gauge_action_general(S, f, hbar, mode);
  const auto f2 = solve_f2(S, hbar, f, mode);
  return g1_action(S, f.f1, f2, hbar);
}

// (ft0, ft1) * (f0, f1) = (ft0 + f0 o psi, ft1 + (1 + ft1^0) f1 o psi + ft1^i (d_i f0) o psi), psi = Id + ft0
inline GaugeElement group_compose(const Spectral& S, const GaugeElement& ft, const GaugeElement& f,
                                  Interp mode = Interp::Cubic) {
  detail::require_small(ft);
  detail::require_small(f);
  const int n = S.grid().n, D = n + 1;
  std::vector<Field> src;
  for (int a = 0; a < D; ++a) src.push_back(f.f0[a]);
  for (int a = 0; a < D; ++a) src.push_back(f.f1[a]);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < D; ++a) src.push_back(S.d(f.f0[a], i));
  if (!ft.f0_zero()) src = Composer(S, detail::spatial(ft.f0), mode)(src);
  std::vector<Field> g0(D), g1(D);
  for (int a = 0; a < D; ++a) {
    g0[a] = ft.f0[a];
    g1[a] = ft.f1[a];
    for (std::size_t p = 0; p < g0[a].size(); ++p) {
      g0[a][p] += src[a][p];
      double v = (1 + ft.f1[0][p]) * src[D + a][p];
      for (int i = 1; i < D; ++i) v += ft.f1[i][p] * src[(1 + i) * D + a][p];
      g1[a][p] += v;
    }
  }
  g0[0].assign(g0[0].size(), 0.0);  // both inputs have f0^0 = 0
  return make_gauge_element(S, std::move(g0), std::move(g1));
}

// f1' with (0, f1') * (f0, 0) = (f0, f1):  f1'^a + f1'^i d_i f0^a = f1^a
inline GaugeElement split_g1(const Spectral& S, const GaugeElement& f) {
  f.validate();
  const int n = S.grid().n, D = n + 1;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, detail::kMaxD, detail::kMaxD>;
  using V = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, detail::kMaxD, 1>;
  std::vector<Field> df0(D * n);
  for (int a = 1; a < D; ++a)
    for (int i = 0; i < n; ++i) df0[a * n + i] = S.d(f.f0[a], i);
  std::vector<Field> f1(D, Field(S.grid().size()));
  for (std::size_t p = 0; p < S.grid().size(); ++p) {
    Mat M = Mat::Identity(D, D);
    V b(D);
    for (int a = 0; a < D; ++a) {
      b(a) = f.f1[a][p];
      if (a == 0) continue;
      for (int i = 1; i < D; ++i) M(a, i) += df0[a * n + i - 1][p];
    }
    const V x = M.partialPivLu().solve(b);
    for (int a = 0; a < D; ++a) f1[a][p] = x(a);
  }
  return make_gauge_element(S, std::vector<Field>(D, Field(S.grid().size(), 0.0)), std::move(f1));
}

inline double max_difference(const GaugeElement& a, const GaugeElement& b) {
  double m = 0;
  for (std::size_t c = 0; c < a.f0.size(); ++c)
    for (std::size_t p = 0; p < a.f0[c].size(); ++p)
      m = std::max({m, std::abs(a.f0[c][p] - b.f0[c][p]), std::abs(a.f1[c][p] - b.f1[c][p])});
  return m;
}

// ---- induced data ---------------------------------------------------------------------

enum class KForm {
  Geometric,  // -(D_i b_j + D_j b_i - h1_ij) / (2 lapse), D the Levi-Civita derivative of g0
  Printed,    // -lapse (d_i b_j + d_j b_i - h1_ij)
};

inline int ssym_count(int n) { return n * (n + 1) / 2; }
// spatial symmetric index, 1-based i, j
inline int ssym_index(int n, int i, int j) {
  if (i > j) std::swap(i, j);
  return (i - 1) * n - (i - 1) * (i - 2) / 2 + (j - i);
}

struct InducedData {
  TorusGrid grid;
  std::vector<Field> g0, k0;
};

inline InducedData induced_data(const Spectral& S, const SymTensorPair& d, KForm form = KForm::Geometric) {
  detail::check_pair(S, d, Order::Linear);
  const TorusGrid& g = S.grid();
  const int n = g.n, ns = ssym_count(n);
  InducedData r;
  r.grid = g;
  r.g0.assign(ns, Field(g.size()));
  r.k0 = r.g0;
  std::vector<Field> db(n * n), dg(n * ns);  // d_i beta_j, d_k g_ij
  for (int i = 0; i < n; ++i) {
    for (int j = 1; j <= n; ++j) db[i * n + j - 1] = S.d(d.c0(0, j), i);
    for (int a = 1; a <= n; ++a)
      for (int b = a; b <= n; ++b) dg[i * ns + ssym_index(n, a, b)] = S.d(d.c0(a, b), i);
  }
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, detail::kMaxD, detail::kMaxD>;
  using V = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, detail::kMaxD, 1>;
  for (std::size_t p = 0; p < g.size(); ++p) {
    Mat G(n, n);
    V beta(n);
    for (int i = 1; i <= n; ++i) {
      beta(i - 1) = d.c0(0, i)[p];
      for (int j = 1; j <= n; ++j) G(i - 1, j - 1) = (i == j ? 1.0 : 0.0) + d.c0(i, j)[p];
    }
    Eigen::LLT<Mat> llt(G);
    if (llt.info() != Eigen::Success) fail(Errc::MetricDegenerate, "induced metric not positive definite");
    const Mat Gi = llt.solve(Mat::Identity(n, n));
    const double lapse2 = 1 - d.c0(0, 0)[p] + beta.dot(Gi * beta);
    if (!(lapse2 > 0)) fail(Errc::MetricDegenerate, "slice is not spacelike");
    const double lapse = std::sqrt(lapse2);
    auto dgv = [&](int k, int a, int b) { return dg[(k - 1) * ns + ssym_index(n, a, b)][p]; };
    for (int i = 1; i <= n; ++i)
      for (int j = i; j <= n; ++j) {
        const int c = ssym_index(n, i, j);
        r.g0[c][p] = G(i - 1, j - 1);
        double sym = db[(i - 1) * n + j - 1][p] + db[(j - 1) * n + i - 1][p];
        if (form == KForm::Printed) {
          r.k0[c][p] = -lapse * (sym - d.c1(i, j)[p]);
          continue;
        }
        // Gamma^l_ij beta_l with Gamma_{m,ij} = (d_i g_mj + d_j g_mi - d_m g_ij)/2
        double cb = 0;
        for (int l = 1; l <= n; ++l) {
          double Gl = 0;
          for (int m = 1; m <= n; ++m)
            Gl += Gi(l - 1, m - 1) * 0.5 * (dgv(i, m, j) + dgv(j, m, i) - dgv(m, i, j));
          cb += Gl * beta(l - 1);
        }
        sym -= 2 * cb;
        r.k0[c][p] = -(sym - d.c1(i, j)[p]) / (2 * lapse);
      }
  }
  return r;
}

// pullback of (g0, k0) by psi = Id + f0 (spatial part of f0)
inline InducedData pullback(const Spectral& S, const InducedData& in, const std::vector<Field>& f0, Interp mode) {
  const TorusGrid& g = S.grid();
  const int n = g.n, ns = ssym_count(n);
  std::vector<Field> src = in.g0;
  src.insert(src.end(), in.k0.begin(), in.k0.end());
  src = Composer(S, detail::spatial(f0), mode)(src);
  std::vector<Field> df(n * n);  // d_i f0^a
  for (int a = 1; a <= n; ++a)
    for (int i = 0; i < n; ++i) df[(a - 1) * n + i] = S.d(f0[a], i);
  InducedData r;
  r.grid = g;
  r.g0.assign(ns, Field(g.size()));
  r.k0 = r.g0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    auto Jm = [&](int a, int i) { return (a == i ? 1.0 : 0.0) + df[(a - 1) * n + i - 1][p]; };
    for (int i = 1; i <= n; ++i)
      for (int j = i; j <= n; ++j) {
        double sg = 0, sk = 0;
        for (int a = 1; a <= n; ++a)
          for (int b = 1; b <= n; ++b) {
            const double w = Jm(a, i) * Jm(b, j);
            sg += w * src[ssym_index(n, a, b)][p];
            sk += w * src[ns + ssym_index(n, a, b)][p];
          }
        r.g0[ssym_index(n, i, j)][p] = sg;
        r.k0[ssym_index(n, i, j)][p] = sk;
      }
  }
  return r;
}

inline double max_difference(const InducedData& a, const InducedData& b) {
  double m = 0;
  for (std::size_t c = 0; c < a.g0.size(); ++c)
    for (std::size_t p = 0; p < a.g0[c].size(); ++p)
      m = std::max({m, std::abs(a.g0[c][p] - b.g0[c][p]), std::abs(a.k0[c][p] - b.k0[c][p])});
  return m;
}

// ---- files -------------------------------------------------------------------------------
// field-file header with chart=Torus, then one block per independent component:
// h0 (00,01,..,nn) followed by h1, each block a "#block h0 01" line and N^n values.

inline void write_pair(std::ostream& o, const SymTensorPair& d) {
  const TorusGrid& g = d.grid;
  const int n = g.n;
  char buf[64];
  o << "#radlab-field v1\n";
  o << "n=" << n << "\n";
  o << "chart=Torus\n";
  o << "l=0\n";
  o << "shape=";
  for (int a = 0; a < n; ++a) o << (a ? " " : "") << g.N;
  o << "\ncoords=";
  for (int a = 1; a <= n; ++a) o << (a > 1 ? " " : "") << "x" << a;
  o << "\norigin=";
  for (int a = 0; a < n; ++a) o << (a ? " " : "") << 0;
  std::snprintf(buf, sizeof buf, "%.17g", g.h());
  o << "\nspacing=";
  for (int a = 0; a < n; ++a) o << (a ? " " : "") << buf;
  o << "\ncomponents=" << sym_count(n) << "\n";
  for (int which = 0; which < 2; ++which)
    for (int a = 0; a <= n; ++a)
      for (int b = a; b <= n; ++b) {
        o << "#block " << (which ? "h1 " : "h0 ") << sym_label(a, b) << "\n";
        const Field& f = which ? d.c1(a, b) : d.c0(a, b);
        for (std::size_t p = 0; p < f.size(); ++p) {
          std::snprintf(buf, sizeof buf, "%.17g", f[p]);
          o << buf << ((p + 1) % g.N ? " " : "\n");
        }
      }
}

inline void write_pair(const std::string& path, const SymTensorPair& d) {
  std::ofstream f(path);
  if (!f) fail(Errc::Io, "cannot write " + path);
  write_pair(f, d);
}

inline SymTensorPair read_pair(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#radlab-field v1", 0) != 0) fail(Errc::Io, "missing field header");
  std::map<std::string, std::string> kv;
  while (kv.size() < 8 && std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(Errc::Io, "bad header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* k : {"n", "chart", "shape", "spacing", "components"})
    if (!kv.count(k)) fail(Errc::Io, std::string("header lacks ") + k);
  if (kv["chart"] != "Torus") fail(Errc::Io, "not a torus tensor file");
  TorusGrid g;
  g.n = std::stoi(kv["n"]);
  std::istringstream sh(kv["shape"]), sp(kv["spacing"]);
  sh >> g.N;
  double h = 0;
  sp >> h;
  g.L = h * g.N;
  g.validate();
  if (std::stoi(kv["components"]) != sym_count(g.n)) fail(Errc::Io, "component count does not match n");
  SymTensorPair d = SymTensorPair::zeros(g);
  for (int which = 0; which < 2; ++which)
    for (int a = 0; a <= g.n; ++a)
      for (int b = a; b <= g.n; ++b) {
        const std::string want = std::string("#block ") + (which ? "h1 " : "h0 ") + sym_label(a, b);
        do {
          if (!std::getline(in, line)) fail(Errc::Io, "missing block " + want);
        } while (line.empty());
        if (line != want) fail(Errc::Io, "expected '" + want + "', found '" + line + "'");
        Field& f = which ? d.c1(a, b) : d.c0(a, b);
        for (double& x : f)
          if (!(in >> x)) fail(Errc::Io, "block " + want + " too short");
        std::getline(in, line);
      }
  return d;
}

inline SymTensorPair read_pair(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(Errc::Io, "cannot read " + path);
  return read_pair(f);
}

}  // namespace radlab
