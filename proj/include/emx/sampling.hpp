#ifndef EMX_SAMPLING_HPP
#define EMX_SAMPLING_HPP

#include "emx/types.hpp"

#include <cmath>
#include <random>

namespace emx
{

using Rng = std::mt19937_64;

inline Complex random_complex(Rng &rng)
{
  std::normal_distribution<double> n(0.0, 1.0);
  const double re = n(rng);
  return {re, n(rng)};
}

inline CVec3 random_cvec(Rng &rng)
{
  const Complex a = random_complex(rng), b = random_complex(rng);
  return {a, b, random_complex(rng)};
}

inline Vec3 random_direction(Rng &rng)
{
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  for (int i = 0; i < 3; ++i)
    v(i) = n(rng);
  return v / v.norm();
}

inline double log_uniform(Rng &rng, double lo, double hi)
{
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

// Random state satisfying i k.E = -rho and k.B = 0.
inline SpectralState random_compatible_state(Rng &rng, const Vec3 &k)
{
  SpectralState s;
  s.k = k;
  s.u = random_cvec(rng);
  s.E = random_cvec(rng);
  s.B = random_cvec(rng);
  const double k2 = k.squaredNorm();
  if (k2 > 0) {
    const CVec3 kc = k.cast<Complex>();
    s.B -= kc * (kc.dot(s.B) / k2);
    s.rho = -Complex(0, 1) * kc.dot(s.E);
  } else {
    s.rho = 0;
  }
  return s;
}

// Compatible state at a random wavevector with |k| log-uniform on [kmin, kmax], unit norm.
inline SpectralState random_unit_mode(Rng &rng, double kmin, double kmax)
{
  const double kmag = log_uniform(rng, kmin, kmax);
  SpectralState s = random_compatible_state(rng, kmag * random_direction(rng));
  const double n = s.norm();
  s.rho /= n;
  s.u /= n;
  s.E /= n;
  s.B /= n;
  return s;
}

}  // namespace emx

#endif  // EMX_SAMPLING_HPP
