#include "emx/propagator.hpp"

#include "emx/linear_oracle.hpp"

#include <limits>
#include <sstream>

namespace emx
{

namespace
{

void require_time(double t, const char *who)
{
  if (!(t >= 0.0) || !std::isfinite(t))
    throw DomainError(std::string(who) + ": t must be finite and non-negative");
}

}  // namespace

void check_compatible(const SpectralState &state, const char *who)
{
  const double kmag = state.k.norm();
  // stableNorm: data far out on a Gaussian tail squares to zero otherwise.
  const double scale = state.pack().stableNorm();
  if (kmag == 0.0) {
    if (std::abs(state.rho) > kCompatibilityTol * scale + std::numeric_limits<double>::min())
      throw DomainError(std::string(who) + ": nonzero rho at k = 0 violates i k.E = -rho");
    return;
  }
  const double gauss = state.gaussResidual();
  const double divb = state.divBResidual();
  const double gauss_scale = std::abs(state.rho) + kmag * state.E.stableNorm();
  const double divb_scale = kmag * state.B.stableNorm();
  const double floor = std::numeric_limits<double>::min();  // subnormal noise
  if (gauss > kCompatibilityTol * gauss_scale + floor || divb > kCompatibilityTol * divb_scale + floor) {
    std::ostringstream msg;
    msg << who << ": incompatible state (|ik.E + rho| = " << gauss << ", |k.B| = " << divb
        << ")";
    throw DomainError(msg.str());
  }
}

TransverseTriple transverse_evolve(double t, const Vec3 &k, const TransverseTriple &m0)
{
  require_time(t, "transverse_evolve");
  const double kmag = k.norm();
  if (!(kmag > 0.0))
    throw DomainError("transverse_evolve: |k| must be positive");
  if (kmag < kTransverseClosedFormMinKmag) {
    const TransverseTrajectory traj = integrate_transverse(k, m0, {0.0, t}, kOracleMinTol);
    return traj.states.back();
  }
  return transverse_evolve_closed_form(t, k, m0);
}

SpectralState zero_mode_evolve(double t, const SpectralState &state0)
{
  require_time(t, "zero_mode_evolve");
  if (state0.k.norm() != 0.0)
    throw DomainError("zero_mode_evolve: requires k = 0");
  check_compatible(state0, "zero_mode_evolve");
  SpectralState s = state0;
  s.rho = 0.0;
  zero_mode_block(t, s.u, s.E);
  return s;
}

SpectralState propagate_unchecked(double t, const SpectralState &state0, double gamma)
{
  const double kmag = state0.k.norm();
  if (kmag == 0.0) {
    SpectralState s = state0;
    zero_mode_block(t, s.u, s.E);
    return s;
  }
  ModeSplit split = helmholtz_split(state0);
  longitudinal_evolve(t, split, gamma);
  split.transverse = kmag < kTransverseClosedFormMinKmag
                         ? transverse_evolve(t, state0.k, split.transverse)
                         : transverse_evolve_closed_form(t, state0.k, split.transverse);
  SpectralState out = helmholtz_merge(split);
  // B_par is constant in time; zero for compatible data.
  out.B += parallel_projector(state0.k) * state0.B;
  return out;
}

SpectralState propagate(double t, const SpectralState &state0, double gamma)
{
  require_time(t, "propagate");
  if (!(gamma > 1.0))
    throw DomainError("propagate: gamma must exceed 1");
  check_compatible(state0, "propagate");
  if (state0.k.norm() == 0.0)
    return zero_mode_evolve(t, state0);
  return propagate_unchecked(t, state0, gamma);
}

}  // namespace emx
