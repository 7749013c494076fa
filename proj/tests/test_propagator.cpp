#include <catch_amalgamated.hpp>

#include "emx/linear_oracle.hpp"
#include "emx/propagator.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace emx;
using namespace emx::testing;
using Catch::Approx;

namespace
{

const Complex I(0, 1);

TransverseTriple random_transverse(std::mt19937_64 &rng, const Vec3 &k)
{
  const auto Q = Eigen::Matrix3cd::Identity() - parallel_projector(k);
  TransverseTriple m;
  m.m1 = Q * random_cvec(rng);
  m.m2 = Q * random_cvec(rng);
  m.m3 = Q * random_cvec(rng);
  return m;
}

double transverse_diff(const TransverseTriple &a, const TransverseTriple &b)
{
  return std::sqrt((a.m1 - b.m1).squaredNorm() + (a.m2 - b.m2).squaredNorm() +
                   (a.m3 - b.m3).squaredNorm());
}

double transverse_norm(const TransverseTriple &a)
{
  return std::sqrt(a.m1.squaredNorm() + a.m2.squaredNorm() + a.m3.squaredNorm());
}

}  // namespace

TEST_CASE("helmholtz split on an axis-aligned wavevector", "[propagator]")
{
  SpectralState s;
  s.k = Vec3(1, 0, 0);
  s.u = CVec3(Complex(1, 2), Complex(3, 0), Complex(0, -4));
  const ModeSplit split = helmholtz_split(s);
  CHECK((split.u_par - CVec3(Complex(1, 2), 0, 0)).norm() == 0.0);
  CHECK((split.transverse.m1 - CVec3(0, Complex(3, 0), Complex(0, -4))).norm() == 0.0);
}

TEST_CASE("helmholtz split and merge", "[propagator]")
{
  std::mt19937_64 rng(11);
  for (int i = 0; i < 3; ++i) {
    const Vec3 k = log_uniform(rng, 1e-2, 1e2) * random_direction(rng);
    const SpectralState s = random_compatible_state(rng, k);
    const ModeSplit split = helmholtz_split(s);
    CHECK(relative_error(helmholtz_merge(split), s) < 1e-14);
    const Complex kc_m1 = k.cast<Complex>().dot(split.transverse.m1);
    CHECK(std::abs(kc_m1) < 1e-14 * k.norm() * s.norm());
    CHECK(std::abs(k.cast<Complex>().dot(split.transverse.m3)) < 1e-14 * k.norm() * s.norm());
    CHECK(ik_cross(k, split.u_par).norm() < 1e-14 * k.norm() * s.norm());
    CHECK(ik_cross(k, split.E_par).norm() < 1e-14 * k.norm() * s.norm());
  }
  SECTION("zero transverse part merges to a longitudinal state")
  {
    ModeSplit split;
    split.k = Vec3(0, 0, 2);
    split.u_par = CVec3(0, 0, Complex(1, 1));
    split.E_par = CVec3(0, 0, Complex(0.5, 0));
    split.rho = -I * 2.0 * Complex(0.5, 0);
    const SpectralState s = helmholtz_merge(split);
    CHECK(s.B.norm() == 0.0);
    CHECK(s.u(0) == Complex(0));
    CHECK(s.gaussResidual() < 1e-15);
  }
  CHECK_THROWS_AS(helmholtz_split(SpectralState{}), DomainError);
}

TEST_CASE("longitudinal matrix", "[propagator]")
{
  const Vec3 k(0.3, -0.4, 1.2);
  const auto G0 = longitudinal_matrix(0.0, k, 5.0 / 3.0);
  CHECK((G0 - Eigen::Matrix<Complex, 7, 7>::Identity()).norm() == 0.0);

  SECTION("rho(t) matches the closed-form scalar solution")
  {
    std::mt19937_64 rng(3);
    const double gamma = 1.4;
    const SpectralState s = random_compatible_state(rng, k);
    const ModeSplit split = helmholtz_split(s);
    for (double t : {0.1, 1.0, 4.0}) {
      const auto v = (longitudinal_matrix(t, k, gamma) * split.longitudinal()).eval();
      // rho0 e^{-t/2} cos(st) + (rho0/2 - i k.u0) e^{-t/2} sin(st)/s
      const double sfreq = std::sqrt(0.75 + gamma * k.squaredNorm());
      const Complex ku = k.cast<Complex>().dot(s.u);
      const Complex expected =
          s.rho * std::exp(-t / 2) * std::cos(sfreq * t) +
          (0.5 * s.rho - I * ku) * std::exp(-t / 2) * std::sin(sfreq * t) / sfreq;
      CHECK(std::abs(v(0) - expected) < 1e-14 * std::abs(expected) + 1e-15);
    }
  }

  SECTION("gamma = 5/3, |k| = 1, t = 1 against the oracle")
  {
    std::mt19937_64 rng(5);
    const Vec3 k1 = random_direction(rng);
    SpectralState s = random_compatible_state(rng, k1);
    // Longitudinal data only.
    ModeSplit split = helmholtz_split(s);
    split.transverse = TransverseTriple{};
    s = helmholtz_merge(split);
    const Trajectory traj = integrate_linear(k1, s, {0.0, 1.0}, 1e-12, 5.0 / 3.0);
    longitudinal_evolve(1.0, split, 5.0 / 3.0);
    CHECK(relative_error(helmholtz_merge(split), traj.states.back()) < 1e-8);
  }
}

TEST_CASE("transverse coefficients", "[propagator]")
{
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20; ++i) {
    const Vec3 k = log_uniform(rng, 1e-3, 1e2) * random_direction(rng);
    const TransverseTriple m0 = random_transverse(rng, k);
    const auto r = solve_characteristic(k.norm());
    const TransverseCoeffs c = transverse_coefficients(k, m0, r);
    const double scale = transverse_norm(m0) * (1 + k.squaredNorm());

    CHECK((c.c1 + c.c2 - m0.m2).norm() <= 1e-12 * scale);
    const Complex kc1 = k.cast<Complex>().dot(c.c1);
    CHECK(std::abs(kc1) <= 1e-12 * scale * k.norm());

    // A [c1, c2, c3] = [M2, M2', M2''](0) built from the 9-dim system.
    const double s = r.sigma, b = r.beta, w = r.omega, k2 = k.squaredNorm();
    const CVec3 d0 = c.c1 + c.c2;
    const CVec3 d1 = s * c.c1 + b * c.c2 + w * c.c3;
    const CVec3 d2 = s * s * c.c1 + (b * b - w * w) * c.c2 + 2 * b * w * c.c3;
    const CVec3 e1 = m0.m1 + ik_cross(k, m0.m3);
    const CVec3 e2 = -m0.m1 - (1 + k2) * m0.m2;
    CHECK((d0 - m0.m2).norm() <= 1e-10 * scale);
    CHECK((d1 - e1).norm() <= 1e-10 * scale);
    CHECK((d2 - e2).norm() <= 1e-10 * scale);

    // det A = omega [omega^2 + (sigma - beta)^2] = omega (3 sigma^2 + 2 sigma + 1 + |k|^2)
    const double detA = w * (w * w + (s - b) * (s - b));
    CHECK(detA > 0);
    CHECK(detA == Approx(w * (3 * s * s + 2 * s + 1 + k2)).epsilon(1e-12));
  }
}

TEST_CASE("transverse evolution", "[propagator]")
{
  std::mt19937_64 rng(13);
  SECTION("t = 0 reproduces the data (c4, c5 cancellations)")
  {
    for (int i = 0; i < 50; ++i) {
      const Vec3 k = log_uniform(rng, 1e-3, 1e2) * random_direction(rng);
      const TransverseTriple m0 = random_transverse(rng, k);
      CHECK(transverse_diff(transverse_evolve(0.0, k, m0), m0) <= 1e-10 * transverse_norm(m0));
    }
  }
  SECTION("zero data stays zero")
  {
    const Vec3 k(0.2, 0.1, -0.3);
    const auto m = transverse_evolve(3.0, k, TransverseTriple{});
    CHECK(transverse_norm(m) == 0.0);
  }
  SECTION("matches integration of the 9-dim system")
  {
    std::uniform_real_distribution<double> tdist(0.0, 10.0);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      const Vec3 k = log_uniform(rng, 1e-3, 1e2) * random_direction(rng);
      const TransverseTriple m0 = random_transverse(rng, k);
      const double t = tdist(rng);
      const auto ref = integrate_transverse(k, m0, {0.0, t}, 1e-12).states.back();
      const auto m = transverse_evolve(t, k, m0);
      worst = std::max(worst, transverse_diff(m, ref) / transverse_norm(ref));
      const Complex k_m1 = k.cast<Complex>().dot(m.m1);
      const Complex k_m3 = k.cast<Complex>().dot(m.m3);
      CHECK(std::abs(k_m1) <= 1e-10 * k.norm() * transverse_norm(m0));
      CHECK(std::abs(k_m3) <= 1e-10 * k.norm() * transverse_norm(m0));
    }
    INFO("worst relative error " << worst);
    CHECK(worst <= 1e-8);
  }
  SECTION("below the closed-form threshold the oracle path is used")
  {
    const Vec3 k = 1e-7 * Vec3(1, 0, 0);
    TransverseTriple m0;
    m0.m1 = CVec3(0, 1, 0);
    m0.m3 = CVec3(0, 0, 1);
    const auto m = transverse_evolve(2.0, k, m0);
    const auto ref = integrate_transverse(k, m0, {0.0, 2.0}, 1e-13).states.back();
    CHECK(transverse_diff(m, ref) < 1e-12);
  }
}

TEST_CASE("zero-mode evolution", "[propagator]")
{
  SpectralState s;
  s.B = CVec3(1, Complex(0, 2), 3);
  s.u = CVec3(1, 0, 0);
  s.E = CVec3(0, 1, 0);
  for (double t : {0.0, 0.5, 5.0}) {
    const auto out = zero_mode_evolve(t, s);
    CHECK((out.B - s.B).norm() == 0.0);
    CHECK(out.rho == Complex(0));
  }
  // The 2x2 block [[-1, -1], [1, 0]] has eigenvalues (-1 +/- i sqrt 3) / 2.
  Eigen::Matrix2d A;
  A << -1, -1, 1, 0;
  const Eigen::Vector2cd ev = A.eigenvalues();
  for (int i = 0; i < 2; ++i) {
    CHECK(ev(i).real() == Approx(-0.5));
    CHECK(std::abs(ev(i).imag()) == Approx(std::sqrt(3.0) / 2));
  }
  // Derivative at t = 0 equals the block applied to the data.
  const double h = 1e-6;
  const auto plus = zero_mode_evolve(h, s), minus = zero_mode_evolve(0.0, s);
  CHECK(((plus.u - minus.u) / h - (-s.u - s.E)).norm() < 1e-5);
  CHECK(((plus.E - minus.E) / h - s.u).norm() < 1e-5);

  SpectralState quiet;
  quiet.B = CVec3(0, 0, 1);
  const auto q = zero_mode_evolve(7.0, quiet);
  CHECK(q.u.norm() == 0.0);
  CHECK(q.E.norm() == 0.0);

  SpectralState bad;
  bad.rho = 1.0;
  CHECK_THROWS_AS(zero_mode_evolve(1.0, bad), DomainError);
}

TEST_CASE("propagate", "[propagator]")
{
  std::mt19937_64 rng(17);
  const double gammas[] = {1.4, 5.0 / 3.0, 2.0};

  SECTION("t = 0 is the identity")
  {
    for (int i = 0; i < 20; ++i) {
      const Vec3 k = log_uniform(rng, 1e-3, 1e2) * random_direction(rng);
      const SpectralState s = random_compatible_state(rng, k);
      CHECK(relative_error(propagate(0.0, s, gammas[i % 3]), s) <= 1e-10);
    }
  }

  SECTION("oracle equivalence")
  {
    std::uniform_real_distribution<double> tdist(0.0, 10.0);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
      const Vec3 k = log_uniform(rng, 1e-3, 1e2) * random_direction(rng);
      const SpectralState s = random_compatible_state(rng, k);
      const double t = tdist(rng), gamma = gammas[i % 3];
      const auto ref = integrate_linear(k, s, {0.0, t}, 1e-10, gamma).states.back();
      worst = std::max(worst, relative_error(propagate(t, s, gamma), ref));
    }
    INFO("worst relative error " << worst);
    CHECK(worst <= 1e-8);
  }

  SECTION("semigroup, linearity and constraint preservation")
  {
    std::uniform_real_distribution<double> tdist(0.0, 5.0);
    for (int i = 0; i < 30; ++i) {
      const Vec3 k = log_uniform(rng, 1e-3, 1e2) * random_direction(rng);
      const double gamma = gammas[i % 3];
      const SpectralState x = random_compatible_state(rng, k);
      const SpectralState y = random_compatible_state(rng, k);
      const double t = tdist(rng), s = tdist(rng);

      const auto whole = propagate(t + s, x, gamma);
      const auto composed = propagate(t, propagate(s, x, gamma), gamma);
      CHECK(relative_error(composed, whole) <= 1e-9);

      const Complex a(0.3, -1.1), b(2.0, 0.5);
      const auto lhs = propagate(t, a * x + b * y, gamma);
      const auto rhs = a * propagate(t, x, gamma) + b * propagate(t, y, gamma);
      CHECK((lhs.pack() - rhs.pack()).norm() <=
            1e-12 * (std::abs(a) * x.norm() + std::abs(b) * y.norm()));

      const auto out = propagate(t, x, gamma);
      CHECK(out.gaussResidual() <= 10 * x.gaussResidual() + 1e-12 * x.norm() * (1 + k.norm()));
      CHECK(out.divBResidual() <= 10 * x.divBResidual() + 1e-12 * x.norm() * (1 + k.norm()));
    }
  }

  SECTION("incompatible input is rejected")
  {
    SpectralState s = random_compatible_state(rng, Vec3(0.5, 0.5, 0));
    s.rho += 1.0;
    CHECK_THROWS_AS(propagate(1.0, s), DomainError);
    SpectralState b = random_compatible_state(rng, Vec3(0.5, 0.5, 0));
    b.B += CVec3(1, 1, 0);
    CHECK_THROWS_AS(propagate(1.0, b), DomainError);
    CHECK_THROWS_AS(propagate(-1.0, random_compatible_state(rng, Vec3(1, 0, 0))), DomainError);
  }
}
