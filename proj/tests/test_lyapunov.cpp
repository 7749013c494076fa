#include <catch_amalgamated.hpp>

#include "emx/lyapunov.hpp"
#include "emx/roots.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace emx;
using namespace emx::testing;
using Catch::Approx;

TEST_CASE("lyapunov value", "[lyapunov]")
{
  const KappaWeights kappa;
  CHECK(lyapunov_value(SpectralState{}, kappa, 5.0 / 3.0) == 0.0);

  SpectralState s;
  s.k = Vec3(1, 2, 2);
  s.E = CVec3(Complex(0.5, -1), Complex(2, 0.25), Complex(-1, 1));
  s.rho = Complex(1.5, -2.5);
  s.u = CVec3(Complex(1, 0), Complex(0, -2), Complex(0.5, 0.5));
  s.B = CVec3(Complex(2, 1), 0, Complex(-1, -0.5));
  REQUIRE(s.gaussResidual() < 1e-15);
  REQUIRE(s.divBResidual() < 1e-15);

  // 30-digit reference.
  CHECK(lyapunov_value(s, kappa, 5.0 / 3.0) == Approx(33.234529166666666667).epsilon(1e-14));

  const double base = 1.4 * std::norm(s.rho) + s.u.squaredNorm() + s.E.squaredNorm() + s.B.squaredNorm();
  CHECK(lyapunov_value(s, KappaWeights{0, 0, 0}, 1.4) == Approx(base).epsilon(1e-15));

  // Long double instantiation agrees.
  BasicSpectralState<long double> sl;
  sl.k = s.k.cast<long double>();
  sl.rho = std::complex<long double>(s.rho);
  sl.u = s.u.cast<std::complex<long double>>();
  sl.E = s.E.cast<std::complex<long double>>();
  sl.B = s.B.cast<std::complex<long double>>();
  CHECK(static_cast<double>(lyapunov_value(sl, kappa, 5.0L / 3.0L)) ==
        Approx(33.234529166666666667).epsilon(1e-15));
}

TEST_CASE("dissipation weight", "[lyapunov]")
{
  CHECK(dissipation_weight(1.0) == 0.25);
  CHECK(dissipation_weight(0.0) == 0.0);
  CHECK(dissipation_weight(3.0) == Approx(9.0 / 100.0).epsilon(1e-15));
}

TEST_CASE("kappa admissibility", "[lyapunov]")
{
  CHECK(KappaWeights{}.admissible());
  CHECK((KappaWeights{0.1, 0.01, 0.002}.admissible()));
  CHECK_FALSE((KappaWeights{0.1, 0.01, 0.0005}.admissible()));  // kappa2^{3/2} > kappa3
  CHECK_FALSE((KappaWeights{0.1, 0.05, 0.02}.admissible()));
  CHECK_FALSE((KappaWeights{0.9, 0.01, 0.005}.admissible()));
  CHECK_FALSE((KappaWeights{0, 0, 0}.admissible()));
}

TEST_CASE("equivalence with |U|^2", "[lyapunov]")
{
  Rng rng(101);
  std::vector<SpectralState> states;
  for (int i = 0; i < 10000; ++i)
    states.push_back(random_unit_mode(rng, 1e-3, 1e3));
  const auto b = equivalence_bounds(states, KappaWeights{}, 5.0 / 3.0);
  CHECK(b.samples == 10000);
  CHECK(b.c_low > 0.5);
  CHECK(b.c_high < 2.0);
  CHECK(b.c_low <= b.c_high);
}

TEST_CASE("dissipation inequality along oracle trajectories", "[lyapunov]")
{
  Rng rng(102);
  std::vector<SpectralState> modes;
  for (int i = 0; i < 40; ++i)
    modes.push_back(random_unit_mode(rng, 1e-3, 1e3));

  SECTION("default kappa gives lambda > 0")
  {
    const auto rep = verify_dissipation(KappaWeights{}, modes, 5.0 / 3.0);
    CHECK(rep.modes == 40);
    CHECK(rep.samples == 40 * 40);
    CHECK(rep.violations == 0);
    CHECK(rep.lambda_fitted > 0);
  }

  SECTION("base energy alone stalls on E-only data")
  {
    std::vector<SpectralState> eonly;
    for (const auto &m : modes) {
      SpectralState s;
      s.k = m.k;
      s.E = m.E;
      s.rho = m.rho;
      eonly.push_back(s);
    }
    DissipationOptions opt;
    opt.n_times = 1;
    const auto rep = verify_dissipation(KappaWeights{0, 0, 0}, eonly, 5.0 / 3.0, opt);
    CHECK(rep.violations == 0);
    CHECK(rep.lambda_fitted < 1e-3);
  }
}

TEST_CASE("pointwise bound fit", "[lyapunov]")
{
  SECTION("B-only data at |k| = 0.1 decays at the slow transverse rate")
  {
    SpectralState s;
    s.k = Vec3(0, 0, 0.1);
    s.B = CVec3(1, Complex(0, 1), 0);
    const double w = dissipation_weight(0.1);
    const Trajectory tr = integrate_linear(s.k, s, 10 / w, 1e-10, 5.0 / 3.0, 200);
    BoundFitOptions opt;
    opt.lambda_safety = 1.0;
    const BoundFit fit = fit_pointwise_bound({tr}, opt);
    const double sigma = solve_characteristic(0.1).sigma;
    CHECK(fit.lambda * w == Approx(-sigma).epsilon(2e-2));
    CHECK(fit.C >= 1.0);
    CHECK(fit.max_violation <= 0);
  }

  SECTION("held-out validation")
  {
    Rng rng(103);
    auto make = [&](int n) {
      std::vector<Trajectory> out;
      for (int i = 0; i < n; ++i) {
        const SpectralState s = random_unit_mode(rng, 0.1, 10.0);
        const double w = dissipation_weight(s.k.norm());
        out.push_back(integrate_linear(s.k, s, 10 / w, 1e-10, 5.0 / 3.0, 200));
      }
      return out;
    };
    const auto train = make(40), validate = make(40);
    const BoundFit fit = fit_pointwise_bound(train);
    CHECK(fit.lambda > 0);
    CHECK(fit.C >= 1.0);
    CHECK(fit.max_violation <= 0);
    CHECK(bound_violation(fit, validate) <= 0);
  }

  CHECK_THROWS_AS(fit_pointwise_bound({}), DomainError);
}
