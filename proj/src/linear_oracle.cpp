#include "emx/linear_oracle.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <sstream>
#include <stdexcept>

namespace emx
{

namespace odeint = boost::numeric::odeint;

namespace
{

using LinearReal = std::array<double, 20>;
using TransverseReal = std::array<double, 18>;

template <std::size_t N>
void to_real(const Eigen::Matrix<Complex, N / 2, 1> &z, std::array<double, N> &x)
{
  for (std::size_t i = 0; i < N / 2; ++i) {
    x[2 * i] = z(i).real();
    x[2 * i + 1] = z(i).imag();
  }
}

template <std::size_t N>
Eigen::Matrix<Complex, N / 2, 1> to_complex(const std::array<double, N> &x)
{
  Eigen::Matrix<Complex, N / 2, 1> z;
  for (std::size_t i = 0; i < N / 2; ++i)
    z(i) = Complex(x[2 * i], x[2 * i + 1]);
  return z;
}

Eigen::Matrix<Complex, 9, 1> pack(const TransverseTriple &m)
{
  Eigen::Matrix<Complex, 9, 1> z;
  z << m.m1, m.m2, m.m3;
  return z;
}

TransverseTriple unpack(const Eigen::Matrix<Complex, 9, 1> &z)
{
  TransverseTriple m;
  m.m1 = z.segment<3>(0);
  m.m2 = z.segment<3>(3);
  m.m3 = z.segment<3>(6);
  return m;
}

void validate(const std::vector<double> &times, double tol, const char *who)
{
  if (!(tol >= kOracleMinTol && tol <= kOracleMaxTol))
    throw DomainError(std::string(who) + ": tol outside [1e-13, 1e-6]");
  if (times.empty() || !(times.front() >= 0.0))
    throw DomainError(std::string(who) + ": output times must be non-empty and non-negative");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw DomainError(std::string(who) + ": output times must be strictly increasing");
}

// Integrates from t = 0 and records the state at every requested time.
template <typename State, typename System, typename Record>
void run_dopri5(System system, State x, const std::vector<double> &times, double tol,
                double scale, Record record)
{
  // The zero state is a fixed point; odeint's controller would stall on it.
  const bool zero = std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
  if (zero) {
    for (double t : times)
      record(t, x);
    return;
  }
  std::vector<double> grid;
  grid.reserve(times.size() + 1);
  if (times.front() > 0.0)
    grid.push_back(0.0);
  grid.insert(grid.end(), times.begin(), times.end());
  const bool skip_first = times.front() > 0.0;

  // Controlled (not dense) stepping lands exactly on each output time, so
  // recorded states carry only the local step error.
  // Error scaled by atol + rtol |x| as in Hairer's dopri5; odeint's default also
  // adds dt |dx/dt|, which loosens control on fast oscillations.
  using Dopri = odeint::runge_kutta_dopri5<State>;
  using Checker = odeint::default_error_checker<double, typename Dopri::algebra_type, typename Dopri::operations_type>;
  odeint::controlled_runge_kutta<Dopri, Checker> stepper(Checker(tol, tol, 1.0, 0.0));
  const double dt0 = std::min(1e-3, 0.1 / scale);
  bool first = true;
  try {
    odeint::integrate_times(stepper, system, x, grid.begin(), grid.end(), dt0,
                            [&](const State &s, double t) {
                              if (skip_first && first) {
                                first = false;
                                return;
                              }
                              first = false;
                              record(t, s);
                            });
  } catch (const odeint::step_adjustment_error &e) {
    throw std::runtime_error(std::string("linear oracle: step-size underflow: ") + e.what());
  }
}

}  // namespace

SpectralState linear_rhs(const SpectralState &s, double gamma)
{
  const Complex I(0, 1);
  const CVec3 kc = s.k.cast<Complex>();
  SpectralState d;
  d.k = s.k;
  d.rho = -I * kc.dot(s.u);
  d.u = -I * gamma * s.rho * kc - s.E - s.u;
  d.E = ik_cross(s.k, s.B) + s.u;
  d.B = -ik_cross(s.k, s.E);
  return d;
}

TransverseTriple transverse_rhs(const Vec3 &k, const TransverseTriple &m)
{
  TransverseTriple d;
  d.m1 = -m.m1 - m.m2;
  d.m2 = m.m1 + ik_cross(k, m.m3);
  d.m3 = -ik_cross(k, m.m2);
  return d;
}

Trajectory integrate_linear(const Vec3 &k, const SpectralState &state0,
                            const std::vector<double> &times, double tol, double gamma)
{
  validate(times, tol, "integrate_linear");
  if (!(gamma > 1.0))
    throw DomainError("integrate_linear: gamma must exceed 1");
  SpectralState init = state0;
  init.k = k;
  check_compatible(init, "integrate_linear");

  Trajectory traj;
  traj.k = k;
  traj.tol = tol;
  traj.times.reserve(times.size());
  traj.states.reserve(times.size());

  LinearReal x;
  to_real<20>(init.pack(), x);
  auto system = [&](const LinearReal &y, LinearReal &dy, double) {
    const SpectralState s = SpectralState::unpack(k, to_complex<20>(y));
    to_real<20>(linear_rhs(s, gamma).pack(), dy);
  };
  const double scale = 1.0 + std::sqrt(gamma) * k.norm();
  run_dopri5(system, x, times, tol, scale, [&](double t, const LinearReal &y) {
    traj.times.push_back(t);
    traj.states.push_back(SpectralState::unpack(k, to_complex<20>(y)));
  });
  if (traj.times.front() == 0.0)
    traj.states.front() = init;
  return traj;
}

Trajectory integrate_linear(const Vec3 &k, const SpectralState &state0, double t_end,
                            double tol, double gamma, int n_samples)
{
  if (!(t_end >= 0.0) || n_samples < 1)
    throw DomainError("integrate_linear: need t_end >= 0 and n_samples >= 1");
  std::vector<double> times;
  if (t_end == 0.0) {
    times = {0.0};
  } else {
    for (int i = 0; i <= n_samples; ++i)
      times.push_back(t_end * i / n_samples);
  }
  return integrate_linear(k, state0, times, tol, gamma);
}

TransverseTrajectory integrate_transverse(const Vec3 &k, const TransverseTriple &m0,
                                          const std::vector<double> &times, double tol)
{
  validate(times, tol, "integrate_transverse");
  TransverseTrajectory traj;
  traj.k = k;
  traj.tol = tol;

  TransverseReal x;
  to_real<18>(pack(m0), x);
  auto system = [&](const TransverseReal &y, TransverseReal &dy, double) {
    to_real<18>(pack(transverse_rhs(k, unpack(to_complex<18>(y)))), dy);
  };
  run_dopri5(system, x, times, tol, 1.0 + k.norm(), [&](double t, const TransverseReal &y) {
    traj.times.push_back(t);
    traj.states.push_back(unpack(to_complex<18>(y)));
  });
  if (traj.times.front() == 0.0)
    traj.states.front() = m0;
  return traj;
}

}  // namespace emx
