#ifndef EMX_DECAY_BENCH_HPP
#define EMX_DECAY_BENCH_HPP

#include "emx/propagator.hpp"
#include "emx/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace emx
{

using SpectralSampler = std::function<SpectralState(const Vec3 &k)>;

struct AnalyticData
{
  std::string name;
  SpectralSampler spectral_fn;
  // Closed-form physical-space norms, e.g. "L2:E", "Linf:E".
  std::map<std::string, double> norm_facts;
};

enum class MagneticProfile
{
  curl_potential,  // B0 = curl A0, A0 Gaussian; B^0(k) = O(|k|) at k = 0
  projected,       // B^0(k) = (I - k~ k~) b g^(k); nonzero limit at k = 0
};

struct GaussianDataParams
{
  double amp_E = 1, amp_u = 1, amp_B = 1;
  double width_E = 1, width_u = 1, width_B = 1;
  MagneticProfile magnetic = MagneticProfile::curl_potential;
  bool transverse_E = false;  // E0 divergence-free, hence rho0 = 0
};

// Fourier transform of exp(-|x|^2 / (2 w^2)): (2 pi)^{3/2} w^3 exp(-w^2 |k|^2 / 2).
double gaussian_envelope(double kmag, double width);

AnalyticData make_gaussian_data(const GaussianDataParams &p, std::uint64_t seed);

// k -> e^{tL} U0(k).
SpectralSampler evolved(const AnalyticData &data, double t, double gamma = kDefaultGamma);

enum class Component
{
  rho,
  u,
  E,
  B,
  all
};

inline constexpr std::array<Component, 5> kAllComponents = {Component::rho, Component::u, Component::E,
                                                            Component::B, Component::all};

const char *component_name(Component c);

// |selected components of s|, Euclidean over complex entries.
double component_abs(const SpectralState &s, Component c);

struct SphericalRule
{
  std::vector<Vec3> nodes;
  std::vector<double> weights;  // sum to 1
};

// 50-node Lebedev rule, exact for spherical polynomials of degree <= 11.
const SphericalRule &lebedev50();

struct QuadratureOptions
{
  int radial_intervals = 2000;  // log-spaced trapezoid on [k_min, k_max]
  double k_min = 1e-4;
  double k_max = 40;
  double convergence_tol = 1e-4;  // change on doubling the radial intervals, relative to max(own, full state)
};

struct QuadratureResult
{
  double value = 0;
  double refined = 0;      // with doubled radial intervals
  double rel_change = 0;
  bool converged = true;
};

// sqrt(int |f^|^2 dk) / (2 pi)^{3/2}: the physical L2 norm by Plancherel.
QuadratureResult l2_norm(const SpectralSampler &f, Component c, const QuadratureOptions &q = {});

// (2 pi)^{-3} int |f^| dk: an upper bound for the physical sup norm.
QuadratureResult linf_bound(const SpectralSampler &f, Component c, const QuadratureOptions &q = {});

struct ComponentNorms
{
  std::map<Component, QuadratureResult> l2;
  std::map<Component, QuadratureResult> linf;
  bool converged() const;
};

// All components, both norms, one sweep over the quadrature nodes.
ComponentNorms component_norms(const SpectralSampler &f, const QuadratureOptions &q = {});

enum class DecayClass
{
  algebraic,
  super_polynomial
};

struct DecayFit
{
  std::vector<double> times;
  std::vector<double> norms;
  double exponent = 0;  // slope of log(norm) against log(1 + t)
  double r2 = 0;
  double r2_exponential = 0;  // r2 of log(norm) against t
  std::array<double, 2> window{0, 0};
  DecayClass classification = DecayClass::algebraic;
};

// Least-squares fit over samples with t in [window[0], window[1]]; needs >= 10 of them.
DecayFit fit_slope(const std::vector<double> &times, const std::vector<double> &norms,
                   std::array<double, 2> window);

// [ell + 3 (1/r - 1/q)]_+ ; q = infinity allowed.
int decay_index(double ell, double r, double q);

struct DecayRun
{
  std::vector<double> times;
  std::map<Component, std::vector<double>> l2;
  std::map<Component, std::vector<double>> linf;
  std::map<Component, DecayFit> l2_fit;
  std::map<Component, DecayFit> linf_fit;
  bool converged = true;
  double worst_rel_change = 0;
};

// Log-spaced times on [t_min, t_max] (n points).
std::vector<double> log_times(double t_min, double t_max, int n);

DecayRun run_decay(const AnalyticData &data, const std::vector<double> &times,
                   std::array<double, 2> window, double gamma = kDefaultGamma,
                   const QuadratureOptions &q = {});

}  // namespace emx

#endif  // EMX_DECAY_BENCH_HPP
