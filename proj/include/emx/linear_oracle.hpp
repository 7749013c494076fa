#ifndef EMX_LINEAR_ORACLE_HPP
#define EMX_LINEAR_ORACLE_HPP

#include "emx/propagator.hpp"
#include "emx/types.hpp"

#include <vector>

namespace emx
{

//
// Reference solutions of the frequency-space linear system by adaptive
// Dormand-Prince integration of its real form. Independent of the closed-form
// propagator; used as ground truth for it.
//

struct Trajectory
{
  Vec3 k = Vec3::Zero();
  std::vector<double> times;
  std::vector<SpectralState> states;
  double tol = 0;
};

struct TransverseTrajectory
{
  Vec3 k = Vec3::Zero();
  std::vector<double> times;
  std::vector<TransverseTriple> states;
  double tol = 0;
};

inline constexpr double kOracleMinTol = 1e-13;
inline constexpr double kOracleMaxTol = 1e-6;

// Integrates to each of `times` (non-negative, strictly increasing, times[0] may be 0).
Trajectory integrate_linear(const Vec3 &k, const SpectralState &state0,
                            const std::vector<double> &times, double tol,
                            double gamma = kDefaultGamma);

// Convenience: n_samples + 1 uniform output times on [0, t_end].
Trajectory integrate_linear(const Vec3 &k, const SpectralState &state0, double t_end,
                            double tol, double gamma = kDefaultGamma, int n_samples = 1);

TransverseTrajectory integrate_transverse(const Vec3 &k, const TransverseTriple &m0,
                                          const std::vector<double> &times, double tol);

// Right-hand sides L U of the two systems; exposed for tests.
SpectralState linear_rhs(const SpectralState &state, double gamma);
TransverseTriple transverse_rhs(const Vec3 &k, const TransverseTriple &m);

}  // namespace emx

#endif  // EMX_LINEAR_ORACLE_HPP
