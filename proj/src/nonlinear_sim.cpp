#include "emx/nonlinear_sim.hpp"

#include "emx/propagator.hpp"
#include "emx/summation.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

namespace emx
{

namespace
{

constexpr double kPi = std::numbers::pi;
const Complex kI(0, 1);

// Real-to-complex 3-D transform of an n^3 lattice; unnormalized both ways.
class Fft3
{
public:
  explicit Fft3(int n) : n_(n), real_size_(std::size_t(n) * n * n), spec_size_(std::size_t(n) * n * (n / 2 + 1))
  {
    rbuf_ = fftw_alloc_real(real_size_);
    cbuf_ = fftw_alloc_complex(spec_size_);
    // ESTIMATE keeps the chosen algorithm, and so the rounding, independent of timing.
    fwd_ = fftw_plan_dft_r2c_3d(n, n, n, rbuf_, cbuf_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_3d(n, n, n, cbuf_, rbuf_, FFTW_ESTIMATE);
  }
  ~Fft3()
  {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(rbuf_);
    fftw_free(cbuf_);
  }
  Fft3(const Fft3 &) = delete;
  Fft3 &operator=(const Fft3 &) = delete;

  void forward(const std::vector<double> &in, std::vector<Complex> &out)
  {
    std::copy(in.begin(), in.end(), rbuf_);
    fftw_execute(fwd_);
    out.resize(spec_size_);
    std::memcpy(static_cast<void *>(out.data()), cbuf_, spec_size_ * sizeof(fftw_complex));
  }

  // Includes the 1/n^3 normalization.
  void inverse(const std::vector<Complex> &in, std::vector<double> &out)
  {
    std::memcpy(cbuf_, in.data(), spec_size_ * sizeof(fftw_complex));
    fftw_execute(inv_);
    out.resize(real_size_);
    const double scale = 1.0 / static_cast<double>(real_size_);
    for (std::size_t i = 0; i < real_size_; ++i)
      out[i] = rbuf_[i] * scale;
  }

  std::vector<Complex> forward(const std::vector<double> &in)
  {
    std::vector<Complex> out;
    forward(in, out);
    return out;
  }

  std::vector<double> inverse(const std::vector<Complex> &in)
  {
    std::vector<double> out;
    inverse(in, out);
    return out;
  }

private:
  int n_;
  std::size_t real_size_, spec_size_;
  double *rbuf_;
  fftw_complex *cbuf_;
  fftw_plan fwd_, inv_;
};

// Wavevector bookkeeping for the half spectrum.
struct Lattice
{
  int n, nh;
  double box_len;
  std::vector<Vec3> k;
  std::vector<char> nyquist;   // any index at n/2 (dropped)
  std::vector<char> keep;      // inside the 2/3 dealiasing cube
  std::vector<double> weight;  // multiplicity in the full spectrum

  Lattice(int n_, double L) : n(n_), nh(n_ / 2 + 1), box_len(L)
  {
    const std::size_t m = std::size_t(n) * n * nh;
    k.resize(m);
    nyquist.resize(m);
    keep.resize(m);
    weight.resize(m);
    auto wave = [&](int i) { return i <= n / 2 ? i : i - n; };
    const int cut = n / 3;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < nh; ++l) {
          const std::size_t idx = index(i, j, l);
          const int mi = wave(i), mj = wave(j), ml = l;
          k[idx] = (2 * kPi / L) * Vec3(mi, mj, ml);
          const bool nyq = (n % 2 == 0) && (i == n / 2 || j == n / 2 || l == n / 2);
          nyquist[idx] = nyq;
          keep[idx] = !nyq && std::abs(mi) <= cut && std::abs(mj) <= cut && ml <= cut;
          weight[idx] = (l == 0 || (n % 2 == 0 && l == n / 2)) ? 1.0 : 2.0;
        }
  }

  std::size_t index(int i, int j, int l) const { return (std::size_t(i) * n + j) * nh + l; }
  std::size_t modes() const { return k.size(); }
  std::size_t points() const { return std::size_t(n) * n * n; }
};

using Spectrum = std::vector<Complex>;
using State = std::array<Spectrum, 10>;

void truncate(const Lattice &lat, Spectrum &f)
{
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!lat.keep[i])
      f[i] = 0;
}

Spectrum derivative(const Lattice &lat, const Spectrum &f, int d)
{
  Spectrum out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    out[i] = lat.nyquist[i] ? Complex(0) : kI * lat.k[i](d) * f[i];
  return out;
}

// (L^3 / n^6) sum over the full spectrum of Re(a conj b) = int_box a b dx.
double inner(const Lattice &lat, const Spectrum &a, const Spectrum &b)
{
  std::vector<double> terms(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    terms[i] = lat.weight[i] * std::real(a[i] * std::conj(b[i]));
  const double np = static_cast<double>(lat.points());
  return std::pow(lat.box_len, 3) / (np * np) * pairwise_sum(terms);
}

State to_spectral(Fft3 &fft, const GridField &f)
{
  State s;
  for (int c = 0; c < 10; ++c)
    s[c] = fft.forward(f.component(c));
  return s;
}

GridField from_spectral(Fft3 &fft, const State &s, const GridField &like)
{
  GridField f(like.n_grid, like.box_len, like.gamma);
  f.time = like.time;
  for (int c = 0; c < 10; ++c)
    f.component(c) = fft.inverse(s[c]);
  return f;
}

SpectralState mode(const State &s, const Lattice &lat, std::size_t i)
{
  SpectralState m;
  m.k = lat.k[i];
  m.rho = s[0][i];
  for (int d = 0; d < 3; ++d) {
    m.u(d) = s[1 + d][i];
    m.E(d) = s[4 + d][i];
    m.B(d) = s[7 + d][i];
  }
  return m;
}

void set_mode(State &s, std::size_t i, const SpectralState &m)
{
  s[0][i] = m.rho;
  for (int d = 0; d < 3; ++d) {
    s[1 + d][i] = m.u(d);
    s[4 + d][i] = m.E(d);
    s[7 + d][i] = m.B(d);
  }
}

// rho^ <- -ik.E^, B^ <- (I - k~ k~) B^, Nyquist planes zeroed.
void project_constraints(const Lattice &lat, State &s)
{
  for (std::size_t i = 0; i < lat.modes(); ++i) {
    if (lat.nyquist[i]) {
      for (auto &c : s)
        c[i] = 0;
      continue;
    }
    const Vec3 &k = lat.k[i];
    const double k2 = k.squaredNorm();
    Complex kE = 0, kB = 0;
    for (int d = 0; d < 3; ++d) {
      kE += k(d) * s[4 + d][i];
      kB += k(d) * s[7 + d][i];
    }
    s[0][i] = -kI * kE;
    if (k2 > 0)
      for (int d = 0; d < 3; ++d)
        s[7 + d][i] -= k(d) * kB / k2;
  }
}

void check_density(const std::vector<double> &rho)
{
  for (double r : rho)
    if (!(1 + r > 0))
      throw DomainError("nonlinear_sim: density collapse (1 + rho <= 0)");
}

// Scratch arrays reused across source evaluations.
struct Workspace
{
  Spectrum spec, rho_k, u_k;
  std::vector<double> rho;
  std::array<std::vector<double>, 3> u, B, grho, ru, g2;
  std::array<std::array<std::vector<double>, 3>, 3> du;  // du[d][c] = d_d u_c
};

void truncate_into(const Lattice &lat, const Spectrum &f, Spectrum &out)
{
  out.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    out[i] = lat.keep[i] ? f[i] : Complex(0);
}

void derivative_into(const Lattice &lat, const Spectrum &f, int d, Spectrum &out)
{
  out.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    out[i] = lat.nyquist[i] ? Complex(0) : kI * lat.k[i](d) * f[i];
}

// Spectral sources [g1, g2, g3, 0] of the state, written into g.
void sources(Fft3 &fft, const Lattice &lat, const State &s, double gamma, Workspace &w, State &g)
{
  truncate_into(lat, s[0], w.rho_k);
  fft.inverse(w.rho_k, w.rho);
  check_density(w.rho);
  for (int c = 0; c < 3; ++c) {
    derivative_into(lat, w.rho_k, c, w.spec);
    fft.inverse(w.spec, w.grho[c]);
    truncate_into(lat, s[7 + c], w.spec);
    fft.inverse(w.spec, w.B[c]);
    truncate_into(lat, s[1 + c], w.u_k);
    fft.inverse(w.u_k, w.u[c]);
    for (int d = 0; d < 3; ++d) {
      derivative_into(lat, w.u_k, d, w.spec);
      fft.inverse(w.spec, w.du[d][c]);
    }
  }

  const std::size_t np = lat.points();
  for (int c = 0; c < 3; ++c) {
    w.ru[c].resize(np);
    w.g2[c].resize(np);
  }
  for (std::size_t p = 0; p < np; ++p) {
    const double pressure = gamma * (std::pow(1 + w.rho[p], gamma - 2) - 1);
    const Vec3 up(w.u[0][p], w.u[1][p], w.u[2][p]);
    const Vec3 Bp(w.B[0][p], w.B[1][p], w.B[2][p]);
    const Vec3 uxB = up.cross(Bp);
    for (int c = 0; c < 3; ++c) {
      w.ru[c][p] = w.rho[p] * up(c);
      const double adv = up(0) * w.du[0][c][p] + up(1) * w.du[1][c][p] + up(2) * w.du[2][c][p];
      w.g2[c][p] = -adv - uxB(c) - pressure * w.grho[c][p];
    }
  }

  g[0].assign(lat.modes(), 0);
  for (int c = 0; c < 3; ++c) {
    fft.forward(w.ru[c], g[4 + c]);
    truncate(lat, g[4 + c]);
    for (std::size_t i = 0; i < lat.modes(); ++i)
      g[0][i] -= kI * lat.k[i](c) * g[4 + c][i];
    fft.forward(w.g2[c], g[1 + c]);
    truncate(lat, g[1 + c]);
    g[7 + c].assign(lat.modes(), 0);
  }
}

void axpy(State &y, double a, const State &x)
{
  for (int c = 0; c < 10; ++c)
    for (std::size_t i = 0; i < y[c].size(); ++i)
      y[c][i] += a * x[c][i];
}

// Complete homogeneous symmetric polynomials h_j(k1^2, k2^2, k3^2), j = 0..N:
// h_j = sum over |alpha| = j of k^{2 alpha}.
std::vector<double> homogeneous_weights(const Vec3 &k, int N)
{
  const double x = k(0) * k(0), y = k(1) * k(1), z = k(2) * k(2);
  // h_j(x, y, z) = sum_a x^a h_{j-a}(y, z), with h_m(y, z) = sum_b y^b z^{m-b}.
  std::vector<double> hyz(N + 1), yp(N + 1, 1.0), zp(N + 1, 1.0);
  for (int i = 1; i <= N; ++i) {
    yp[i] = yp[i - 1] * y;
    zp[i] = zp[i - 1] * z;
  }
  for (int m = 0; m <= N; ++m) {
    hyz[m] = 0;
    for (int b = 0; b <= m; ++b)
      hyz[m] += yp[b] * zp[m - b];
  }
  std::vector<double> h(N + 1, 0.0);
  for (int j = 0; j <= N; ++j) {
    double xa = 1;
    for (int a = 0; a <= j; ++a, xa *= x)
      h[j] += xa * hyz[j - a];
  }
  return h;
}

}  // namespace

GridField::GridField(int n, double L, double g) : n_grid(n), box_len(L), gamma(g)
{
  if (n < 4)
    throw DomainError("GridField: n_grid must be >= 4");
  const std::size_t m = std::size_t(n) * n * n;
  rho.assign(m, 0.0);
  for (int d = 0; d < 3; ++d) {
    u[d].assign(m, 0.0);
    E[d].assign(m, 0.0);
    B[d].assign(m, 0.0);
  }
}

std::vector<double> &GridField::component(int c)
{
  if (c == 0)
    return rho;
  if (c < 4)
    return u[c - 1];
  if (c < 7)
    return E[c - 4];
  return B[c - 7];
}

const std::vector<double> &GridField::component(int c) const
{
  return const_cast<GridField *>(this)->component(c);
}

double GridField::max_abs() const
{
  double m = 0;
  for (int c = 0; c < 10; ++c)
    for (double x : component(c))
      m = std::max(m, std::abs(x));
  return m;
}

double phi_sigma(double sigma, double gamma)
{
  const double base = 0.5 * (gamma - 1) * sigma + 1;
  if (!(base > 0))
    throw DomainError("phi_sigma: (gamma-1) sigma / 2 + 1 must be positive");
  return std::pow(base, 2 / (gamma - 1)) - sigma - 1;
}

SymmetricField transform_to_symmetric(const GridField &f)
{
  check_density(f.rho);
  const double g = f.gamma, sg = std::sqrt(g);
  SymmetricField s;
  s.n_grid = f.n_grid;
  s.box_len = f.box_len;
  s.gamma = g;
  s.time = sg * f.time;
  s.sigma.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i)
    s.sigma[i] = 2 / (g - 1) * (std::pow(1 + f.rho[i], 0.5 * (g - 1)) - 1);
  for (int d = 0; d < 3; ++d) {
    s.v[d] = f.u[d];
    s.E[d] = f.E[d];
    s.B[d] = f.B[d];
    for (std::size_t i = 0; i < f.size(); ++i) {
      s.v[d][i] /= sg;
      s.E[d][i] /= sg;
      s.B[d][i] /= sg;
    }
  }
  return s;
}

GridField transform_from_symmetric(const SymmetricField &s)
{
  const double g = s.gamma, sg = std::sqrt(g);
  GridField f(s.n_grid, s.box_len, g);
  f.time = s.time / sg;
  for (std::size_t i = 0; i < f.size(); ++i)
    f.rho[i] = s.sigma[i] + phi_sigma(s.sigma[i], g);
  for (int d = 0; d < 3; ++d)
    for (std::size_t i = 0; i < f.size(); ++i) {
      f.u[d][i] = sg * s.v[d][i];
      f.E[d][i] = sg * s.E[d][i];
      f.B[d][i] = sg * s.B[d][i];
    }
  return f;
}

SourceTerms nonlinear_sources(const GridField &f)
{
  Fft3 fft(f.n_grid);
  const Lattice lat(f.n_grid, f.box_len);
  Workspace w;
  State g;
  sources(fft, lat, to_spectral(fft, f), f.gamma, w, g);
  SourceTerms out;
  out.g1 = fft.inverse(g[0]);
  for (int d = 0; d < 3; ++d) {
    out.g2[d] = fft.inverse(g[1 + d]);
    out.g3[d] = fft.inverse(g[4 + d]);
  }
  return out;
}

EnergyReport energy_functionals(const SymmetricField &v, int N, const KappaWeights &kappa)
{
  if (N < 1)
    throw DomainError("energy_functionals: N must be >= 1");
  Fft3 fft(v.n_grid);
  const Lattice lat(v.n_grid, v.box_len);
  const Spectrum sig = fft.forward(v.sigma);
  std::array<Spectrum, 3> vh, Eh, Bh;
  for (int d = 0; d < 3; ++d) {
    vh[d] = fft.forward(v.v[d]);
    Eh[d] = fft.forward(v.E[d]);
    Bh[d] = fft.forward(v.B[d]);
  }

  const std::size_t m = lat.modes();
  std::vector<double> e(m), dn(m), eh(m), dh(m);
  std::vector<std::vector<double>> sob(N + 1, std::vector<double>(m));
  std::vector<double> hn(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec3 &k = lat.k[i];
    const double k2 = k.squaredNorm();
    const std::vector<double> h = homogeneous_weights(k, N);
    auto W = [&](int mm) {
      double s = 0;
      for (int j = 0; j <= mm; ++j)
        s += h[j];
      return s;
    };
    const double WN = W(N), WN1 = W(N - 1), WN2 = N >= 2 ? W(N - 2) : 0.0;

    CVec3 vv, EE, BB;
    for (int d = 0; d < 3; ++d) {
      vv(d) = vh[d][i];
      EE(d) = Eh[d][i];
      BB(d) = Bh[d][i];
    }
    const double s2 = std::norm(sig[i]), v2 = vv.squaredNorm(), E2 = EE.squaredNorm(), B2 = BB.squaredNorm();
    const double V2 = s2 + v2 + E2 + B2;
    const CVec3 iks = kI * sig[i] * k.cast<Complex>();
    const double x1 = std::real(herm_dot(iks, vv));
    const double x2 = std::real(herm_dot(vv, EE));
    const double x3 = std::real(herm_dot(CVec3(-ik_cross(k, EE)), BB));

    const double w = lat.weight[i];
    e[i] = w * (WN * V2 + kappa.kappa1 * WN1 * x1 + kappa.kappa2 * WN1 * x2 + kappa.kappa3 * WN2 * x3);
    dn[i] = w * (WN * (s2 + v2) + WN2 * k2 * (E2 + B2) + E2);
    eh[i] = w * (WN1 * k2 * V2 + kappa.kappa1 * (WN1 - 1) * x1 + kappa.kappa2 * (WN1 - 1) * x2 +
                 kappa.kappa3 * (N >= 2 ? WN2 - 1 : 0.0) * x3);
    dh[i] = w * (WN1 * k2 * (s2 + v2) + WN2 * k2 * (E2 + B2));
    for (int j = 0; j <= N; ++j)
      sob[j][i] = w * h[j] * V2;
    hn[i] = w * WN * V2;
  }

  const double np = static_cast<double>(lat.points());
  const double norm = std::pow(v.box_len, 3) / (np * np);
  EnergyReport r;
  r.N = N;
  r.kappa = kappa;
  r.full_energy = norm * pairwise_sum(e);
  r.dissipation = norm * pairwise_sum(dn);
  r.high_order_energy = norm * pairwise_sum(eh);
  r.high_order_dissipation = norm * pairwise_sum(dh);
  for (int j = 0; j <= N; ++j)
    r.sobolev_norms.push_back(norm * pairwise_sum(sob[j]));
  r.hN_norm2 = norm * pairwise_sum(hn);
  return r;
}

ConstraintResidual constraint_residual(const GridField &f)
{
  Fft3 fft(f.n_grid);
  const Lattice lat(f.n_grid, f.box_len);
  const State s = to_spectral(fft, f);
  Spectrum gauss(lat.modes()), divb(lat.modes());
  for (std::size_t i = 0; i < lat.modes(); ++i) {
    Complex kE = 0, kB = 0;
    for (int d = 0; d < 3; ++d) {
      kE += lat.k[i](d) * s[4 + d][i];
      kB += lat.k[i](d) * s[7 + d][i];
    }
    gauss[i] = kI * kE + s[0][i];
    divb[i] = kI * kB;
  }
  ConstraintResidual r;
  r.gauss = std::sqrt(inner(lat, gauss, gauss));
  r.div_b = std::sqrt(inner(lat, divb, divb));
  return r;
}

double cfl_limit(int n_grid, double box_len, double gamma)
{
  return (box_len / n_grid) / std::max(std::sqrt(gamma), 1.0);
}

GridField make_initial_field(const InitialDataParams &p)
{
  if (!(p.amplitude > 0) || !(p.gamma > 1) || !(p.box_len > 0) || !(p.envelope_len > 0))
    throw DomainError("make_initial_field: bad parameters");
  GridField f(p.n_grid, p.box_len, p.gamma);
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int c = 1; c < 10; ++c)
    for (double &x : f.component(c))
      x = normal(rng);

  Fft3 fft(p.n_grid);
  const Lattice lat(p.n_grid, p.box_len);
  State s = to_spectral(fft, f);
  for (std::size_t i = 0; i < lat.modes(); ++i) {
    const double env = lat.keep[i] ? std::exp(-0.5 * lat.k[i].squaredNorm() * p.envelope_len * p.envelope_len) : 0.0;
    for (int c = 1; c < 10; ++c)
      s[c][i] *= env;
  }
  project_constraints(lat, s);
  f = from_spectral(fft, s, f);
  const double scale = p.amplitude / f.max_abs();
  for (int c = 0; c < 10; ++c)
    for (double &x : f.component(c))
      x *= scale;
  return f;
}

struct Simulation::Impl
{
  Fft3 fft;
  Lattice lat;
  double gamma;
  GridField like;
  Workspace work;
  State mid, g;
  std::vector<Eigen::Matrix<Complex, 10, 10>> half;  // e^{(dt/2) L} per mode

  Impl(const GridField &f, double dt) : fft(f.n_grid), lat(f.n_grid, f.box_len), gamma(f.gamma), like(f)
  {
    half.resize(lat.modes());
    for (std::size_t i = 0; i < lat.modes(); ++i) {
      if (lat.nyquist[i]) {
        half[i].setZero();
        continue;
      }
      for (int j = 0; j < 10; ++j) {
        SpectralState::Packed e = SpectralState::Packed::Zero();
        e(j) = 1;
        half[i].col(j) = propagate_unchecked(dt / 2, SpectralState::unpack(lat.k[i], e), gamma).pack();
      }
    }
  }

  void linear_half(State &s) const
  {
    SpectralState::Packed x;
    for (std::size_t i = 0; i < lat.modes(); ++i) {
      for (int c = 0; c < 10; ++c)
        x(c) = s[c][i];
      const SpectralState::Packed y = half[i] * x;
      for (int c = 0; c < 10; ++c)
        s[c][i] = y(c);
    }
  }
};

Simulation::Simulation(const GridField &initial, double dt, bool nonlinear)
    : dt_(dt), time_(initial.time), nonlinear_(nonlinear)
{
  if (!(dt > 0))
    throw DomainError("Simulation: dt must be positive");
  if (dt > cfl_limit(initial.n_grid, initial.box_len, initial.gamma))
    throw DomainError("Simulation: dt exceeds the CFL limit");
  if (!(initial.gamma > 1))
    throw DomainError("Simulation: gamma must exceed 1");
  check_density(initial.rho);
  impl_ = std::make_unique<Impl>(initial, dt);
  state_ = to_spectral(impl_->fft, initial);
}

Simulation::~Simulation() = default;

void Simulation::step()
{
  Impl &m = *impl_;
  m.linear_half(state_);
  if (nonlinear_) {
    m.mid = state_;
    sources(m.fft, m.lat, state_, m.gamma, m.work, m.g);
    axpy(m.mid, 0.5 * dt_, m.g);
    sources(m.fft, m.lat, m.mid, m.gamma, m.work, m.g);
    axpy(state_, dt_, m.g);
  }
  m.linear_half(state_);
  project_constraints(m.lat, state_);
  ++steps_;
  time_ = impl_->like.time + steps_ * dt_;
}

void Simulation::advance(int n_steps)
{
  for (int i = 0; i < n_steps; ++i)
    step();
}

GridField Simulation::field() const
{
  GridField f = from_spectral(impl_->fft, state_, impl_->like);
  f.time = time_;
  return f;
}

GridField step(const GridField &f, double dt)
{
  Simulation sim(f, dt);
  sim.step();
  return sim.field();
}

GridField propagate_field(const GridField &f, double t)
{
  Fft3 fft(f.n_grid);
  const Lattice lat(f.n_grid, f.box_len);
  State s = to_spectral(fft, f);
  for (std::size_t i = 0; i < lat.modes(); ++i)
    set_mode(s, i, lat.nyquist[i] ? SpectralState{} : propagate_unchecked(t, mode(s, lat, i), f.gamma));
  GridField out = from_spectral(fft, s, f);
  out.time = f.time + t;
  return out;
}

double relative_difference(const GridField &a, const GridField &b)
{
  if (a.n_grid != b.n_grid)
    throw DomainError("relative_difference: grid mismatch");
  std::vector<double> d2, b2;
  for (int c = 0; c < 10; ++c)
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a.component(c)[i] - b.component(c)[i];
      d2.push_back(d * d);
      b2.push_back(b.component(c)[i] * b.component(c)[i]);
    }
  return std::sqrt(pairwise_sum(d2) / pairwise_sum(b2));
}

namespace
{

// Spectral interpolation onto an m^3 lattice (m >= n); Nyquist planes dropped.
GridField upsample(const GridField &f, int m)
{
  const int n = f.n_grid;
  Fft3 small(n), big(m);
  const Lattice from(n, f.box_len), to(m, f.box_len);
  GridField out(m, f.box_len, f.gamma);
  out.time = f.time;
  const double scale = std::pow(double(m) / n, 3);
  auto wrap = [](int w, int size) { return w < 0 ? w + size : w; };
  Spectrum padded(to.modes());
  for (int c = 0; c < 10; ++c) {
    const Spectrum fh = small.forward(f.component(c));
    std::fill(padded.begin(), padded.end(), Complex(0));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < from.nh; ++l) {
          const std::size_t a = from.index(i, j, l);
          if (from.nyquist[a])
            continue;
          const int mi = i <= n / 2 ? i : i - n, mj = j <= n / 2 ? j : j - n;
          padded[to.index(wrap(mi, m), wrap(mj, m), l)] = scale * fh[a];
        }
    out.component(c) = big.inverse(padded);
  }
  return out;
}

}  // namespace

double formulation_residual(const GridField &coarse)
{
  // Products and sigma(rho) are resolved on the doubled lattice.
  const GridField f = upsample(coarse, 2 * coarse.n_grid);
  Fft3 fft(f.n_grid);
  const Lattice lat(f.n_grid, f.box_len);
  const double g = f.gamma, sg = std::sqrt(g);
  const std::size_t np = lat.points();

  auto grad = [&](const std::vector<double> &x) {
    const Spectrum xh = fft.forward(x);
    std::array<std::vector<double>, 3> out;
    for (int d = 0; d < 3; ++d)
      out[d] = fft.inverse(derivative(lat, xh, d));
    return out;
  };
  auto curl = [&](const std::array<std::vector<double>, 3> &a) {
    std::array<std::array<std::vector<double>, 3>, 3> da;  // da[c][d] = d_d a_c
    for (int c = 0; c < 3; ++c)
      da[c] = grad(a[c]);
    std::array<std::vector<double>, 3> out;
    for (int c = 0; c < 3; ++c) {
      out[c].resize(np);
      const int p = (c + 1) % 3, q = (c + 2) % 3;
      for (std::size_t i = 0; i < np; ++i)
        out[c][i] = da[q][p][i] - da[p][q][i];
    }
    return out;
  };
  auto div = [&](const std::array<std::vector<double>, 3> &a) {
    std::vector<double> out(np, 0.0);
    for (int d = 0; d < 3; ++d) {
      const auto ga = grad(a[d]);
      for (std::size_t i = 0; i < np; ++i)
        out[i] += ga[d][i];
    }
    return out;
  };

  // d/dt of (rho, u, E, B), then the chain rule to d/ds of (sigma, v, E~, B~).
  check_density(f.rho);
  std::array<std::vector<double>, 3> flux;
  for (int d = 0; d < 3; ++d) {
    flux[d].resize(np);
    for (std::size_t i = 0; i < np; ++i)
      flux[d][i] = (1 + f.rho[i]) * f.u[d][i];
  }
  const std::vector<double> rho_t = [&] {
    std::vector<double> r = div(flux);
    for (double &x : r)
      x = -x;
    return r;
  }();
  const auto grho = grad(f.rho);
  std::array<std::array<std::vector<double>, 3>, 3> du;
  for (int c = 0; c < 3; ++c)
    du[c] = grad(f.u[c]);
  const auto curlB = curl(f.B), curlE = curl(f.E);

  std::vector<double> lhs, rhs;
  lhs.reserve(10 * np);
  rhs.reserve(10 * np);

  const SymmetricField V = transform_to_symmetric(f);
  const auto gsig = grad(V.sigma);
  std::array<std::array<std::vector<double>, 3>, 3> dv;
  for (int c = 0; c < 3; ++c)
    dv[c] = grad(V.v[c]);
  const std::vector<double> divv = div(V.v);
  const auto curlBt = curl(V.B), curlEt = curl(V.E);

  for (std::size_t i = 0; i < np; ++i) {
    const double r = f.rho[i];
    lhs.push_back(std::pow(1 + r, 0.5 * (g - 3)) * rho_t[i] / sg);
    const double a = 0.5 * (g - 1) * V.sigma[i] + 1;
    double adv = 0;
    for (int d = 0; d < 3; ++d)
      adv += V.v[d][i] * gsig[d][i];
    rhs.push_back(-adv - a * divv[i]);
  }
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < np; ++i) {
      const Vec3 up(f.u[0][i], f.u[1][i], f.u[2][i]), Bp(f.B[0][i], f.B[1][i], f.B[2][i]);
      double adv = 0;
      for (int d = 0; d < 3; ++d)
        adv += up(d) * du[c][d][i];
      const double u_t = -g * std::pow(1 + f.rho[i], g - 2) * grho[c][i] - f.E[c][i] - f.u[c][i] - adv -
                         up.cross(Bp)(c);
      lhs.push_back(u_t / g);

      const Vec3 vp(V.v[0][i], V.v[1][i], V.v[2][i]), Btp(V.B[0][i], V.B[1][i], V.B[2][i]);
      double vadv = 0;
      for (int d = 0; d < 3; ++d)
        vadv += vp(d) * dv[c][d][i];
      const double a = 0.5 * (g - 1) * V.sigma[i] + 1;
      rhs.push_back(-vadv - a * gsig[c][i] - V.E[c][i] / sg - vp.cross(Btp)(c) - vp(c) / sg);
    }
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < np; ++i) {
      lhs.push_back((curlB[c][i] + f.u[c][i] + f.rho[i] * f.u[c][i]) / g);
      const double rho_from_sigma = V.sigma[i] + phi_sigma(V.sigma[i], g);
      rhs.push_back(curlBt[c][i] / sg + V.v[c][i] / sg + rho_from_sigma * V.v[c][i] / sg);
    }
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < np; ++i) {
      lhs.push_back(-curlE[c][i] / g);
      rhs.push_back(-curlEt[c][i] / sg);
    }

  std::vector<double> d2(lhs.size()), l2(lhs.size());
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    d2[i] = (lhs[i] - rhs[i]) * (lhs[i] - rhs[i]);
    l2[i] = lhs[i] * lhs[i];
  }
  const double den = pairwise_sum(l2);
  return den > 0 ? std::sqrt(pairwise_sum(d2) / den) : std::sqrt(pairwise_sum(d2));
}

namespace
{

template <typename T>
void put(std::ostream &out, T v)
{
  static_assert(std::is_trivially_copyable_v<T>);
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(b, b + sizeof(T));
  out.write(b, sizeof(T));
}

template <typename T>
T get(std::istream &in)
{
  char b[sizeof(T)];
  if (!in.read(b, sizeof(T)))
    throw std::runtime_error("read_snapshot: truncated file");
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

constexpr char kSnapshotMagic[8] = {'E', 'M', 'X', 'S', 'N', 'A', 'P', '1'};

}  // namespace

void write_snapshot(std::ostream &out, const GridField &f)
{
  out.write(kSnapshotMagic, 8);
  put<std::int32_t>(out, f.n_grid);
  put<double>(out, f.box_len);
  put<double>(out, f.time);
  put<double>(out, f.gamma);
  for (int c = 0; c < 10; ++c)
    for (double x : f.component(c))
      put<double>(out, x);
  if (!out)
    throw std::runtime_error("write_snapshot: write failed");
}

GridField read_snapshot(std::istream &in)
{
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kSnapshotMagic, 8) != 0)
    throw std::runtime_error("read_snapshot: bad magic");
  const int n = get<std::int32_t>(in);
  const double L = get<double>(in);
  const double t = get<double>(in);
  const double g = get<double>(in);
  GridField f(n, L, g);
  f.time = t;
  for (int c = 0; c < 10; ++c)
    for (double &x : f.component(c))
      x = get<double>(in);
  return f;
}

}  // namespace emx
