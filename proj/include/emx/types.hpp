#ifndef EMX_TYPES_HPP
#define EMX_TYPES_HPP

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace emx
{

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using CVec3T = Eigen::Matrix<std::complex<Scalar>, 3, 1>;

using Vec3 = Vec3T<double>;
using CVec3 = CVec3T<double>;
using Complex = std::complex<double>;

// Raised when an operation's documented precondition does not hold.
class DomainError : public std::invalid_argument
{
public:
  explicit DomainError(const std::string &what) : std::invalid_argument(what) {}
};

//
// The 10 complex Fourier amplitudes [rho, u, E, B] of the linearized
// Euler-Maxwell state at a single wavevector k.
//
template <typename Scalar>
struct BasicSpectralState
{
  using Real = Scalar;
  using Cplx = std::complex<Scalar>;
  using Packed = Eigen::Matrix<Cplx, 10, 1>;

  Vec3T<Scalar> k = Vec3T<Scalar>::Zero();
  Cplx rho{0};
  CVec3T<Scalar> u = CVec3T<Scalar>::Zero();
  CVec3T<Scalar> E = CVec3T<Scalar>::Zero();
  CVec3T<Scalar> B = CVec3T<Scalar>::Zero();

  // Layout: rho, u(3), E(3), B(3).
  Packed pack() const
  {
    Packed p;
    p << rho, u, E, B;
    return p;
  }

  static BasicSpectralState unpack(const Vec3T<Scalar> &k, const Packed &p)
  {
    BasicSpectralState s;
    s.k = k;
    s.rho = p(0);
    s.u = p.template segment<3>(1);
    s.E = p.template segment<3>(4);
    s.B = p.template segment<3>(7);
    return s;
  }

  // |U|^2 = |rho|^2 + |u|^2 + |E|^2 + |B|^2 (unweighted)
  Scalar squaredNorm() const
  {
    return std::norm(rho) + u.squaredNorm() + E.squaredNorm() + B.squaredNorm();
  }

  Scalar norm() const { return std::sqrt(squaredNorm()); }

  // |i k.E + rho|
  Scalar gaussResidual() const
  {
    const Cplx I(0, 1);
    return std::abs(I * (k.template cast<Cplx>().dot(E)) + rho);
  }

  // |k.B|
  Scalar divBResidual() const { return std::abs(k.template cast<Cplx>().dot(B)); }

  BasicSpectralState &operator+=(const BasicSpectralState &o)
  {
    rho += o.rho;
    u += o.u;
    E += o.E;
    B += o.B;
    return *this;
  }

  friend BasicSpectralState operator+(BasicSpectralState a, const BasicSpectralState &b)
  {
    a += b;
    return a;
  }

  friend BasicSpectralState operator*(const Cplx &c, BasicSpectralState a)
  {
    a.rho *= c;
    a.u *= c;
    a.E *= c;
    a.B *= c;
    return a;
  }
};

using SpectralState = BasicSpectralState<double>;

// (a | b) = a . conj(b)
template <typename Derived1, typename Derived2>
auto herm_dot(const Eigen::MatrixBase<Derived1> &a, const Eigen::MatrixBase<Derived2> &b)
{
  // Eigen's dot() conjugates the first argument.
  return b.dot(a);
}

// (i k) x v for a real wavevector k and complex vector v.
template <typename Scalar>
CVec3T<Scalar> ik_cross(const Vec3T<Scalar> &k, const CVec3T<Scalar> &v)
{
  // Eigen's cross() conjugates complex operands, so spell it out.
  const std::complex<Scalar> I(0, 1);
  CVec3T<Scalar> out;
  out << k(1) * v(2) - k(2) * v(1), k(2) * v(0) - k(0) * v(2), k(0) * v(1) - k(1) * v(0);
  return I * out;
}

}  // namespace emx

#endif  // EMX_TYPES_HPP
