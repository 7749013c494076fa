#ifndef EMX_PROPAGATOR_HPP
#define EMX_PROPAGATOR_HPP

#include "emx/roots.hpp"
#include "emx/types.hpp"

#include <cmath>

namespace emx
{

inline constexpr double kDefaultGamma = 5.0 / 3.0;

// Below this |k| the closed-form transverse coefficients lose precision to
// cancellation and transverse_evolve integrates the 9-dim system instead.
inline constexpr double kTransverseClosedFormMinKmag = 1e-6;

// Relative tolerance on the Gauss-law and div B residuals accepted by propagate().
inline constexpr double kCompatibilityTol = 1e-9;

template <typename Scalar>
struct BasicTransverseTriple
{
  CVec3T<Scalar> m1 = CVec3T<Scalar>::Zero();  // u_perp
  CVec3T<Scalar> m2 = CVec3T<Scalar>::Zero();  // E_perp
  CVec3T<Scalar> m3 = CVec3T<Scalar>::Zero();  // B_perp
};
using TransverseTriple = BasicTransverseTriple<double>;

template <typename Scalar>
struct BasicTransverseCoeffs
{
  CVec3T<Scalar> c1 = CVec3T<Scalar>::Zero();
  CVec3T<Scalar> c2 = CVec3T<Scalar>::Zero();
  CVec3T<Scalar> c3 = CVec3T<Scalar>::Zero();
};
using TransverseCoeffs = BasicTransverseCoeffs<double>;

//
// Helmholtz split of a SpectralState along k~ = k/|k|: the longitudinal part
// (rho, u_par, E_par) and the transverse triple (M1, M2, M3) = (u_perp, E_perp, B_perp).
// B_par is dropped; it vanishes for compatible states.
//
template <typename Scalar>
struct BasicModeSplit
{
  Vec3T<Scalar> k = Vec3T<Scalar>::Zero();
  std::complex<Scalar> rho{0};
  CVec3T<Scalar> u_par = CVec3T<Scalar>::Zero();
  CVec3T<Scalar> E_par = CVec3T<Scalar>::Zero();
  BasicTransverseTriple<Scalar> transverse;

  // (rho, u_par, E_par) in the block order used by longitudinal_matrix().
  Eigen::Matrix<std::complex<Scalar>, 7, 1> longitudinal() const
  {
    Eigen::Matrix<std::complex<Scalar>, 7, 1> v;
    v << rho, u_par, E_par;
    return v;
  }
};
using ModeSplit = BasicModeSplit<double>;

template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, 3, 3> parallel_projector(const Vec3T<Scalar> &k)
{
  const Vec3T<Scalar> kt = k / k.norm();
  return (kt * kt.transpose()).template cast<std::complex<Scalar>>();
}

template <typename Scalar>
BasicModeSplit<Scalar> helmholtz_split(const BasicSpectralState<Scalar> &state)
{
  if (!(state.k.norm() > Scalar(0)))
    throw DomainError("helmholtz_split: |k| = 0 (use zero_mode_evolve)");
  using C = std::complex<Scalar>;
  const auto P = parallel_projector(state.k);
  const Eigen::Matrix<C, 3, 3> Q = Eigen::Matrix<C, 3, 3>::Identity() - P;

  BasicModeSplit<Scalar> s;
  s.k = state.k;
  s.rho = state.rho;
  s.u_par = P * state.u;
  s.E_par = P * state.E;
  s.transverse.m1 = Q * state.u;
  s.transverse.m2 = Q * state.E;
  s.transverse.m3 = Q * state.B;
  return s;
}

template <typename Scalar>
BasicSpectralState<Scalar> helmholtz_merge(const BasicModeSplit<Scalar> &split)
{
  BasicSpectralState<Scalar> s;
  s.k = split.k;
  s.rho = split.rho;
  s.u = split.u_par + split.transverse.m1;
  s.E = split.E_par + split.transverse.m2;
  s.B = split.transverse.m3;
  return s;
}

//
// G^I(t, k): propagator of the longitudinal block, rows/cols ordered
// (rho; u_par x,y,z; E_par x,y,z). The scalar entries -ik and -i gamma k of
// the 3x3 symbol become a 1x3 row and a 3x1 column along k.
//
template <typename Scalar>
Eigen::Matrix<std::complex<Scalar>, 7, 7> longitudinal_matrix(Scalar t, const Vec3T<Scalar> &k,
                                                              Scalar gamma)
{
  using C = std::complex<Scalar>;
  using Mat7 = Eigen::Matrix<C, 7, 7>;
  const C I(0, 1);
  const Scalar freq = std::sqrt(Scalar(0.75) + gamma * k.squaredNorm());
  const Scalar damp = std::exp(-t / 2);
  const Eigen::Matrix<C, 3, 1> kc = k.template cast<C>();
  const Eigen::Matrix<C, 3, 3> I3 = Eigen::Matrix<C, 3, 3>::Identity();

  Mat7 M = Mat7::Zero();
  M(0, 0) = C(0.5);
  M.template block<1, 3>(0, 1) = -I * kc.transpose();
  M.template block<3, 1>(1, 0) = -I * gamma * kc;
  M.template block<3, 3>(1, 1) = -C(0.5) * I3;
  M.template block<3, 3>(1, 4) = -I3;
  M.template block<3, 3>(4, 1) = I3;
  M.template block<3, 3>(4, 4) = C(0.5) * I3;

  return damp * (std::cos(freq * t) * Mat7::Identity() + (std::sin(freq * t) / freq) * M);
}

// Coefficients of M2(t) = c1 e^{sigma t} + e^{beta t} (c2 cos wt + c3 sin wt).
template <typename Scalar>
BasicTransverseCoeffs<Scalar> transverse_coefficients(const Vec3T<Scalar> &k,
                                                      const BasicTransverseTriple<Scalar> &m0,
                                                      const CharTriple<Scalar> &r)
{
  const Scalar k2 = k.squaredNorm();
  const Scalar s = r.sigma, w = r.omega;
  const Scalar inv = Scalar(1) / (Scalar(3) * s * s + Scalar(2) * s + Scalar(1) + k2);
  const CVec3T<Scalar> curl3 = ik_cross(k, m0.m3);

  BasicTransverseCoeffs<Scalar> c;
  c.c1 = inv * (s * m0.m1 + s * (s + 1) * m0.m2 + (s + 1) * curl3);
  c.c2 = inv * (-s * m0.m1 + (Scalar(2) * s * s + s + k2 + Scalar(1)) * m0.m2 - (s + 1) * curl3);
  c.c3 = (inv / w) * ((Scalar(1.5) * s * s + Scalar(1.5) * s + Scalar(1) + k2) * m0.m1 +
                      (s + 1) * (s + Scalar(1) + k2) / Scalar(2) * m0.m2 +
                      (Scalar(1.5) * s * s + Scalar(0.5) + k2) * curl3);
  return c;
}

template <typename Scalar>
BasicTransverseCoeffs<Scalar> transverse_coefficients(const Vec3T<Scalar> &k,
                                                      const BasicTransverseTriple<Scalar> &m0)
{
  return transverse_coefficients(k, m0, solve_characteristic(k.norm()));
}

//
// Closed-form (M1, M2, M3)(t). Valid for |k| > 0; loses accuracy as |k| -> 0
// through the 1/sigma factor in M3.
//
template <typename Scalar>
BasicTransverseTriple<Scalar> transverse_evolve_closed_form(Scalar t, const Vec3T<Scalar> &k,
                                                            const BasicTransverseTriple<Scalar> &m0)
{
  const CharTriple<Scalar> r = solve_characteristic(k.norm());
  const BasicTransverseCoeffs<Scalar> c = transverse_coefficients(k, m0, r);
  const Scalar s = r.sigma, b = r.beta, w = r.omega;

  const Scalar es = std::exp(s * t);
  const Scalar eb = std::exp(b * t);
  const Scalar cw = std::cos(w * t), sw = std::sin(w * t);

  BasicTransverseTriple<Scalar> m;
  m.m2 = es * c.c1 + eb * (cw * c.c2 + sw * c.c3);

  const Scalar d1 = (1 + b) * (1 + b) + w * w;
  m.m1 = -(es / (1 + s)) * c.c1 - (eb / d1) * ((1 + b) * cw + w * sw) * c.c2 -
         (eb / d1) * ((1 + b) * sw - w * cw) * c.c3;

  const Scalar d3 = b * b + w * w;
  const CVec3T<Scalar> a = (es / s) * c.c1 + (eb / d3) * (b * cw + w * sw) * c.c2 +
                           (eb / d3) * (b * sw - w * cw) * c.c3;
  m.m3 = -ik_cross(k, a);
  return m;
}

// e^{tL} on the longitudinal block via G^I.
template <typename Scalar>
void longitudinal_evolve(Scalar t, BasicModeSplit<Scalar> &split, Scalar gamma)
{
  const auto v = (longitudinal_matrix(t, split.k, gamma) * split.longitudinal()).eval();
  split.rho = v(0);
  split.u_par = v.template segment<3>(1);
  split.E_par = v.template segment<3>(4);
}

// [u, E](t) for the k = 0 mode: exp(t [[-1, -1], [1, 0]]) componentwise.
template <typename Scalar>
void zero_mode_block(Scalar t, CVec3T<Scalar> &u, CVec3T<Scalar> &E)
{
  const Scalar freq = std::sqrt(Scalar(3)) / 2;
  const Scalar damp = std::exp(-t / 2);
  const Scalar c = damp * std::cos(freq * t);
  const Scalar sn = damp * std::sin(freq * t) / freq;
  // exp(tA) = e^{-t/2} [cos I + sin/freq (A + I/2)]
  const CVec3T<Scalar> u0 = u, E0 = E;
  u = c * u0 + sn * (Scalar(-0.5) * u0 - E0);
  E = c * E0 + sn * (u0 + Scalar(0.5) * E0);
}

//
// Public double-precision entry points. These validate inputs; the
// templates above are the raw kernels.
//
TransverseTriple transverse_evolve(double t, const Vec3 &k, const TransverseTriple &m0);

SpectralState zero_mode_evolve(double t, const SpectralState &state0);

// e^{tL} U0 for a compatible state at any k (k = 0 routed to zero_mode_evolve).
SpectralState propagate(double t, const SpectralState &state0, double gamma = kDefaultGamma);

// Same map without the compatibility check. Linear in the state; agrees with
// e^{tL} only on compatible data.
SpectralState propagate_unchecked(double t, const SpectralState &state0,
                                  double gamma = kDefaultGamma);

// Throws DomainError if the Gauss-law or div B residual exceeds tolerance.
void check_compatible(const SpectralState &state, const char *who);

}  // namespace emx

#endif  // EMX_PROPAGATOR_HPP
