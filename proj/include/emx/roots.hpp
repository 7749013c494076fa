#ifndef EMX_ROOTS_HPP
#define EMX_ROOTS_HPP

#include "emx/types.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace emx
{

//
// Roots of the transverse characteristic cubic
//
//   F(chi) = chi^3 + chi^2 + (1 + |k|^2) chi + |k|^2,
//
// one real root sigma in (-1, 0) and the conjugate pair beta +/- i omega.
//
template <typename Scalar>
struct CharTriple
{
  Scalar kmag{};
  Scalar sigma{};
  Scalar beta{};
  Scalar omega{};
};

template <typename Scalar>
Scalar eval_cubic(Scalar chi, Scalar kmag)
{
  const Scalar k2 = kmag * kmag;
  return ((chi + Scalar(1)) * chi + Scalar(1) + k2) * chi + k2;
}

template <typename Scalar>
Scalar eval_cubic_derivative(Scalar chi, Scalar kmag)
{
  return (Scalar(3) * chi + Scalar(2)) * chi + Scalar(1) + kmag * kmag;
}

// Below this |k| the Newton residual floor dominates and the leading-order
// expansion sigma = -|k|^2 + |k|^6 is exact to working precision.
inline constexpr double kDegenerateKmag = 1e-8;

template <typename Scalar>
CharTriple<Scalar> triple_from_sigma(Scalar kmag, Scalar sigma)
{
  CharTriple<Scalar> r;
  r.kmag = kmag;
  r.sigma = sigma;
  r.beta = -(sigma + Scalar(1)) / Scalar(2);
  r.omega = std::sqrt(Scalar(3) * sigma * sigma + Scalar(2) * sigma + Scalar(3) +
                      Scalar(4) * kmag * kmag) /
            Scalar(2);
  return r;
}

template <typename Scalar>
CharTriple<Scalar> solve_characteristic(Scalar kmag)
{
  using std::abs;
  if (!(kmag > Scalar(0)) || !std::isfinite(static_cast<double>(kmag)))
    throw DomainError("solve_characteristic: |k| must be positive and finite");

  const Scalar k2 = kmag * kmag;
  if (kmag < Scalar(kDegenerateKmag))
    return triple_from_sigma(kmag, -k2 + k2 * k2 * k2);

  Scalar lo = -1, hi = 0;
  if (!(eval_cubic(lo, kmag) < 0 && eval_cubic(hi, kmag) > 0))
    throw std::logic_error("solve_characteristic: root not bracketed on (-1, 0)");

  // F' > 0 everywhere, so Newton from inside the bracket converges; the
  // bisection branch only guards against overshoot.
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  Scalar x = -k2 / (Scalar(1) + k2);
  if (!(x > lo && x < hi))
    x = (lo + hi) / 2;
  for (int it = 0; it < 200; ++it) {
    const Scalar f = eval_cubic(x, kmag);
    if (f == Scalar(0))
      break;
    if (f < 0)
      lo = x;
    else
      hi = x;
    Scalar next = x - f / eval_cubic_derivative(x, kmag);
    if (!(next > lo && next < hi))
      next = (lo + hi) / 2;
    const Scalar step = abs(next - x);
    x = next;
    if (step <= Scalar(4) * eps * abs(x) || hi - lo <= Scalar(4) * eps * abs(x))
      break;
  }

  const Scalar residual = abs(eval_cubic(x, kmag));
  if (!(residual <= Scalar(1e-14) * (Scalar(1) + k2))) {
    std::ostringstream msg;
    msg << "solve_characteristic: residual " << static_cast<double>(residual)
        << " at |k|=" << static_cast<double>(kmag);
    throw std::logic_error(msg.str());
  }
  return triple_from_sigma(kmag, x);
}

// d sigma / d|k| by implicit differentiation of F(sigma(|k|)) = 0.
template <typename Scalar>
Scalar sigma_derivative(Scalar kmag)
{
  const CharTriple<Scalar> r = solve_characteristic(kmag);
  const Scalar s = r.sigma;
  return Scalar(-2) * kmag * (Scalar(1) + s) /
         (Scalar(3) * s * s + Scalar(2) * s + kmag * kmag + Scalar(1));
}

}  // namespace emx

#endif  // EMX_ROOTS_HPP
