#ifndef EMX_NONLINEAR_SIM_HPP
#define EMX_NONLINEAR_SIM_HPP

#include "emx/lyapunov.hpp"
#include "emx/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

namespace emx
{

inline constexpr double kDefaultBoxLen = 20 * std::numbers::pi;

//
// Real lattice fields on the periodic box [0, box_len)^3, n_grid points per
// axis, flat index (i * n + j) * n + l with x = i dx, y = j dx, z = l dx.
//
struct GridField
{
  int n_grid = 0;
  double box_len = kDefaultBoxLen;
  double time = 0;
  double gamma = 5.0 / 3.0;
  std::vector<double> rho;
  std::array<std::vector<double>, 3> u, E, B;

  GridField() = default;
  GridField(int n, double box_len, double gamma);

  std::size_t size() const { return rho.size(); }
  double dx() const { return box_len / n_grid; }

  // Components in the order rho, u, E, B (10 fields).
  std::vector<double> &component(int c);
  const std::vector<double> &component(int c) const;
  double max_abs() const;
};

// ((gamma-1) sigma / 2 + 1)^{2/(gamma-1)} - sigma - 1
double phi_sigma(double sigma, double gamma);

// [sigma, v, E~, B~] on the same lattice; `time` is relabelled to sqrt(gamma) t.
struct SymmetricField
{
  int n_grid = 0;
  double box_len = kDefaultBoxLen;
  double time = 0;
  double gamma = 5.0 / 3.0;
  std::vector<double> sigma;
  std::array<std::vector<double>, 3> v, E, B;
};

SymmetricField transform_to_symmetric(const GridField &f);
GridField transform_from_symmetric(const SymmetricField &s);

struct SourceTerms
{
  std::vector<double> g1;
  std::array<std::vector<double>, 3> g2, g3;
};

// g1 = -div(rho u), g2 = -u.grad u - u x B - gamma ((1+rho)^{gamma-2} - 1) grad rho,
// g3 = rho u. Spectral derivatives, 2/3-rule dealiasing of factors and products.
SourceTerms nonlinear_sources(const GridField &f);

struct EnergyReport
{
  int N = 2;
  KappaWeights kappa;
  double full_energy = 0;
  double dissipation = 0;
  double high_order_energy = 0;
  double high_order_dissipation = 0;
  std::vector<double> sobolev_norms;  // ||grad^j V||^2, j = 0..N
  double hN_norm2 = 0;                // ||V||_N^2
};

EnergyReport energy_functionals(const SymmetricField &v, int N, const KappaWeights &kappa);

struct ConstraintResidual
{
  double gauss = 0;  // ||div E + rho||
  double div_b = 0;  // ||div B||
};

ConstraintResidual constraint_residual(const GridField &f);

// Largest stable dt for the explicit source step: dx / max(sqrt(gamma), 1).
double cfl_limit(int n_grid, double box_len, double gamma);

struct InitialDataParams
{
  int n_grid = 32;
  double box_len = kDefaultBoxLen;
  double gamma = 5.0 / 3.0;
  double amplitude = 1e-2;     // max |component| over the lattice
  double envelope_len = 3.0;   // spectral envelope exp(-|k|^2 l^2 / 2)
  std::uint64_t seed = 1;
};

// Smooth random compatible field: rho = -div E, div B = 0, dealiased.
GridField make_initial_field(const InitialDataParams &p);

//
// Strang-split stepper: exact linear half step per torus mode, explicit
// midpoint on the sources, exact linear half step, then rho^ <- -ik.E^ and
// B^ projected. State is kept in spectral form between steps.
//
class Simulation
{
public:
  Simulation(const GridField &initial, double dt, bool nonlinear = true);
  ~Simulation();
  Simulation(const Simulation &) = delete;
  Simulation &operator=(const Simulation &) = delete;

  void step();
  void advance(int n_steps);

  double time() const { return time_; }
  double dt() const { return dt_; }
  int steps_taken() const { return steps_; }
  GridField field() const;

  // Spectral coefficients (unnormalized r2c transform), component c of 10.
  const std::vector<Complex> &spectral(int c) const { return state_[c]; }

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::array<std::vector<Complex>, 10> state_;
  double dt_;
  double time_;
  int steps_ = 0;
  bool nonlinear_;
};

GridField step(const GridField &f, double dt);

// Pure linear evolution e^{tL} of every torus mode of `f`.
GridField propagate_field(const GridField &f, double t);

// ||a - b|| / ||b|| over all ten components (lattice l2).
double relative_difference(const GridField &a, const GridField &b);

// Relative l2 residual of the symmetric-variable equations, with the time
// derivative obtained from the (rho, u, E, B) equations by the chain rule.
double formulation_residual(const GridField &f);

// Flat binary snapshot: "EMXSNAP1", int32 n, float64 box_len, time, gamma,
// then rho, u_x, u_y, u_z, E_x, E_y, E_z, B_x, B_y, B_z as n^3 float64 each.
// Little-endian throughout.
void write_snapshot(std::ostream &out, const GridField &f);
GridField read_snapshot(std::istream &in);

}  // namespace emx

#endif  // EMX_NONLINEAR_SIM_HPP
