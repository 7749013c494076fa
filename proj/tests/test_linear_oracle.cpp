#include <catch_amalgamated.hpp>

#include "emx/linear_oracle.hpp"
#include "emx/propagator.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace emx;
using namespace emx::testing;

namespace
{

double weighted_energy(const SpectralState &s, double gamma)
{
  return gamma * std::norm(s.rho) + s.u.squaredNorm() + s.E.squaredNorm() + s.B.squaredNorm();
}

}  // namespace

TEST_CASE("k = 0 matches the closed-form 2x2 exponential", "[oracle]")
{
  std::mt19937_64 rng(1);
  SpectralState s = random_compatible_state(rng, Vec3::Zero());
  const double tol = 1e-11;
  const Trajectory traj = integrate_linear(Vec3::Zero(), s, 6.0, tol, 5.0 / 3.0, 12);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const auto exact = zero_mode_evolve(traj.times[i], s);
    CHECK((traj.states[i].pack() - exact.pack()).norm() <= 10 * tol * s.norm());
  }
}

TEST_CASE("trajectory invariants", "[oracle]")
{
  std::mt19937_64 rng(2);
  const double tol = 1e-11, gamma = 1.4;
  for (int rep = 0; rep < 5; ++rep) {
    const Vec3 k = log_uniform(rng, 1e-2, 10.0) * random_direction(rng);
    const SpectralState s = random_compatible_state(rng, k);
    const Trajectory traj = integrate_linear(k, s, 5.0, tol, gamma, 2000);

    REQUIRE(traj.states.front().pack() == s.pack());
    for (std::size_t i = 1; i < traj.times.size(); ++i)
      REQUIRE(traj.times[i] > traj.times[i - 1]);

    // i k.E + rho is an exact invariant.
    for (const auto &st : traj.states)
      CHECK(st.gaussResidual() <= 10 * tol * s.norm() * (1 + k.norm()));

    // (1/2) d/dt |[sqrt(gamma) rho, u, E, B]|^2 = -|u|^2, integrated by trapezoid.
    double dissipated = 0;
    for (std::size_t i = 1; i < traj.times.size(); ++i) {
      const double h = traj.times[i] - traj.times[i - 1];
      dissipated += h * (traj.states[i].u.squaredNorm() + traj.states[i - 1].u.squaredNorm());
    }
    const double e0 = weighted_energy(s, gamma);
    const double e1 = weighted_energy(traj.states.back(), gamma);
    CHECK(std::abs(e1 + dissipated - e0) <= 1e-5 * e0);
    for (std::size_t i = 1; i < traj.states.size(); ++i)
      REQUIRE(weighted_energy(traj.states[i], gamma) <=
              weighted_energy(traj.states[i - 1], gamma) * (1 + 1e-9));
  }
}

TEST_CASE("transverse trajectory", "[oracle]")
{
  std::mt19937_64 rng(3);
  const Vec3 k = 0.8 * random_direction(rng);
  const auto Q = Eigen::Matrix3cd::Identity() - parallel_projector(k);
  TransverseTriple m0;
  m0.m1 = Q * random_cvec(rng);
  m0.m2 = Q * random_cvec(rng);
  m0.m3 = Q * random_cvec(rng);
  const double tol = 1e-12;

  std::vector<double> times;
  const double h = 1e-3;
  for (int i = 0; i <= 4000; ++i)
    times.push_back(i * h);
  const TransverseTrajectory traj = integrate_transverse(k, m0, times, tol);

  SECTION("transversality is conserved")
  {
    for (const auto &m : traj.states) {
      CHECK(std::abs(k.cast<Complex>().dot(m.m1)) <= 10 * tol * 10);
      CHECK(std::abs(k.cast<Complex>().dot(m.m3)) <= 10 * tol * 10);
    }
  }
  SECTION("agrees with the closed form")
  {
    for (std::size_t i = 0; i < times.size(); i += 400) {
      const auto m = transverse_evolve(times[i], k, m0);
      const double err = std::sqrt((m.m1 - traj.states[i].m1).squaredNorm() +
                                   (m.m2 - traj.states[i].m2).squaredNorm() +
                                   (m.m3 - traj.states[i].m3).squaredNorm());
      CHECK(err <= 1e-8);
    }
  }
  SECTION("M2 satisfies the third-order ODE")
  {
    const double k2 = k.squaredNorm();
    for (std::size_t i = 10; i + 10 < times.size(); i += 500) {
      auto m2 = [&](int off) { return traj.states[i + off].m2; };
      const CVec3 d1 = (m2(1) - m2(-1)) / (2 * h);
      const CVec3 d2 = (m2(1) - 2.0 * m2(0) + m2(-1)) / (h * h);
      const CVec3 d3 = (m2(2) - 2.0 * m2(1) + 2.0 * m2(-1) - m2(-2)) / (2 * h * h * h);
      const CVec3 residual = d3 + d2 + (1 + k2) * d1 + k2 * m2(0);
      CHECK(residual.norm() <= 1e-6 * 1e2);
    }
  }
}

TEST_CASE("oracle error shrinks with tolerance", "[oracle]")
{
  std::mt19937_64 rng(4);
  const Vec3 k = 2.0 * random_direction(rng);
  const SpectralState s = random_compatible_state(rng, k);
  const auto exact = propagate(8.0, s, 2.0);
  const auto loose = integrate_linear(k, s, {0.0, 8.0}, 1e-7, 2.0).states.back();
  const auto tight = integrate_linear(k, s, {0.0, 8.0}, 1e-10, 2.0).states.back();
  CHECK(relative_error(tight, exact) < relative_error(loose, exact));
}

TEST_CASE("oracle input validation", "[oracle]")
{
  SpectralState s;
  s.k = Vec3(1, 0, 0);
  CHECK_THROWS_AS(integrate_linear(s.k, s, {0.0, 1.0}, 1e-3), DomainError);
  CHECK_THROWS_AS(integrate_linear(s.k, s, {1.0, 0.5}, 1e-10), DomainError);
  s.rho = 1.0;
  CHECK_THROWS_AS(integrate_linear(s.k, s, {0.0, 1.0}, 1e-10), DomainError);
}
