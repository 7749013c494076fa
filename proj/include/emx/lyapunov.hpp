#ifndef EMX_LYAPUNOV_HPP
#define EMX_LYAPUNOV_HPP

#include "emx/linear_oracle.hpp"
#include "emx/sampling.hpp"
#include "emx/types.hpp"

#include <cstddef>
#include <limits>
#include <vector>

namespace emx
{

struct KappaWeights
{
  double kappa1 = 0.1;
  double kappa2 = 0.01;
  double kappa3 = 0.005;

  // 0 < kappa3 << kappa2 << kappa1 < 1, in the operational form
  // kappa2^{3/2} < kappa3 < kappa2 <= kappa1 / 10, kappa1 <= 1/2.
  bool admissible() const;
};

//
// E(U) = |[sqrt(gamma) rho, u, E, B]|^2 + kappa1 Re(u | ik rho) / (1+|k|^2)
//      + kappa2 Re(|k|^2 u | E) / (1+|k|^2)^2 + kappa3 Re(-ik x B | E) / (1+|k|^2)^2
//
template <typename Scalar>
Scalar lyapunov_value(const BasicSpectralState<Scalar> &s, const KappaWeights &kappa, Scalar gamma)
{
  using C = std::complex<Scalar>;
  const Scalar k2 = s.k.squaredNorm();
  const Scalar a = Scalar(1) / (Scalar(1) + k2);
  const CVec3T<Scalar> ikrho = C(0, 1) * s.rho * s.k.template cast<C>();

  Scalar e = gamma * std::norm(s.rho) + s.u.squaredNorm() + s.E.squaredNorm() + s.B.squaredNorm();
  e += Scalar(kappa.kappa1) * a * std::real(herm_dot(s.u, ikrho));
  e += Scalar(kappa.kappa2) * a * a * k2 * std::real(herm_dot(s.u, s.E));
  e += Scalar(kappa.kappa3) * a * a * std::real(herm_dot(CVec3T<Scalar>(-ik_cross(s.k, s.B)), s.E));
  return e;
}

// |k|^2 / (1+|k|^2)^2
inline double dissipation_weight(double kmag)
{
  const double k2 = kmag * kmag;
  return k2 / ((1 + k2) * (1 + k2));
}

struct EquivalenceBounds
{
  double c_low = std::numeric_limits<double>::infinity();
  double c_high = 0;
  double k_low = 0;  // |k| at the minimizer
  double k_high = 0;
  std::size_t samples = 0;
};

// min / max of E(U) / |U|^2 over the given states.
EquivalenceBounds equivalence_bounds(const std::vector<SpectralState> &states,
                                     const KappaWeights &kappa, double gamma);

struct DissipationOptions
{
  double t_end = 10;
  int n_times = 40;      // sample times per mode, uniform on [2h, t_end]
  double fd_step = 1e-3; // scaled down by max(1, |k|)
  double eps = 1e-9;
  double tol = 1e-10;
};

struct DissipationReport
{
  double lambda_fitted = std::numeric_limits<double>::infinity();
  double worst_kmag = 0;
  double worst_time = 0;
  double max_dEdt = -std::numeric_limits<double>::infinity(); // worst normalized dE/dt
  std::size_t violations = 0; // samples with dE/dt > eps
  std::size_t modes = 0;
  std::size_t samples = 0;
};

// Largest lambda with dE/dt + lambda w(|k|) E <= eps at every sample of every
// oracle trajectory started from `modes` (each normalized to |U0| = 1).
DissipationReport verify_dissipation(const KappaWeights &kappa, const std::vector<SpectralState> &modes,
                                     double gamma, const DissipationOptions &opt = {});

struct BoundFit
{
  double C = 0;
  double lambda = 0;
  double max_violation = 0;  // max of r e^{lambda w t} / C - 1
};

struct BoundFitOptions
{
  double lambda_safety = 0.9;  // fraction of the worst late-time slope kept
  double late_fraction = 0.5;  // slopes read from t >= late_fraction * t_end
  double c_margin = 1.1;       // multiplies the fitted C; covers unseen transients
};

// |U(t)| <= C e^{-lambda w(|k|) t} |U0| fitted on the given trajectories.
BoundFit fit_pointwise_bound(const std::vector<Trajectory> &trajectories,
                             const BoundFitOptions &opt = {});

// max over samples of |U(t)| e^{lambda w t} / (C |U0|) - 1.
double bound_violation(const BoundFit &fit, const std::vector<Trajectory> &trajectories);

}  // namespace emx

#endif  // EMX_LYAPUNOV_HPP
