#include "emx/lyapunov.hpp"

#include "emx/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emx
{

bool KappaWeights::admissible() const
{
  return kappa1 > 0 && kappa2 > 0 && kappa3 > 0 && kappa1 <= 0.5 && kappa2 <= kappa1 / 10 &&
         std::pow(kappa2, 1.5) < kappa3 && kappa3 < kappa2;
}

EquivalenceBounds equivalence_bounds(const std::vector<SpectralState> &states,
                                     const KappaWeights &kappa, double gamma)
{
  EquivalenceBounds b;
  for (const auto &s : states) {
    const double n2 = s.squaredNorm();
    if (n2 == 0)
      continue;
    const double r = lyapunov_value(s, kappa, gamma) / n2;
    if (r < b.c_low) {
      b.c_low = r;
      b.k_low = s.k.norm();
    }
    if (r > b.c_high) {
      b.c_high = r;
      b.k_high = s.k.norm();
    }
    ++b.samples;
  }
  return b;
}

DissipationReport verify_dissipation(const KappaWeights &kappa, const std::vector<SpectralState> &modes,
                                     double gamma, const DissipationOptions &opt)
{
  if (opt.n_times < 1 || !(opt.t_end > 0) || !(opt.fd_step > 0))
    throw DomainError("verify_dissipation: bad options");

  DissipationReport rep;
  for (const SpectralState &mode : modes) {
    const double n = mode.norm();
    if (n == 0)
      continue;
    const SpectralState u0 = Complex(1.0 / n) * mode;
    const double kmag = u0.k.norm();
    const double h = opt.fd_step / std::max(1.0, kmag);
    const double w = dissipation_weight(kmag);

    // Stencil base points t - 2h for centres t on [2h, t_end].
    std::vector<double> base(opt.n_times);
    for (int j = 0; j < opt.n_times; ++j)
      base[j] = opt.n_times == 1 ? 0.0 : (opt.t_end - 2 * h) * j / (opt.n_times - 1);
    const Trajectory traj = integrate_linear(u0.k, u0, base, opt.tol, gamma);

    for (std::size_t j = 0; j < traj.states.size(); ++j) {
      // The flow from an oracle state is smooth in h, so the stencil only sees truncation error.
      double e[5];
      for (int m = 0; m < 5; ++m)
        e[m] = lyapunov_value(propagate_unchecked(m * h, traj.states[j], gamma), kappa, gamma);
      const double dedt = (e[0] - 8 * e[1] + 8 * e[3] - e[4]) / (12 * h);
      const double t = traj.times[j] + 2 * h;

      ++rep.samples;
      if (dedt > opt.eps)
        ++rep.violations;
      rep.max_dEdt = std::max(rep.max_dEdt, dedt);
      const double lam = w > 0 && e[2] > 0 ? (opt.eps - dedt) / (w * e[2])
                                            : std::numeric_limits<double>::infinity();
      if (lam < rep.lambda_fitted) {
        rep.lambda_fitted = lam;
        rep.worst_kmag = kmag;
        rep.worst_time = t;
      }
    }
    ++rep.modes;
  }
  return rep;
}

namespace
{

double ratio(const Trajectory &tr, std::size_t i)
{
  return tr.states[i].norm() / tr.states.front().norm();
}

// Least-squares slope of y against x.
double ls_slope(const std::vector<double> &x, const std::vector<double> &y)
{
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

BoundFit fit_pointwise_bound(const std::vector<Trajectory> &trajectories, const BoundFitOptions &opt)
{
  if (trajectories.empty())
    throw DomainError("fit_pointwise_bound: no trajectories");

  double lam = std::numeric_limits<double>::infinity();
  for (const auto &tr : trajectories) {
    if (tr.states.size() < 3 || tr.states.front().norm() == 0)
      throw DomainError("fit_pointwise_bound: trajectory needs >= 3 samples and nonzero data");
    const double w = dissipation_weight(tr.k.norm());
    const double t_late = opt.late_fraction * tr.times.back();
    std::vector<double> x, y;
    for (std::size_t i = 0; i < tr.times.size(); ++i)
      if (tr.times[i] >= t_late) {
        x.push_back(w * tr.times[i]);
        y.push_back(std::log(ratio(tr, i)));
      }
    if (x.size() < 2)
      throw DomainError("fit_pointwise_bound: fewer than 2 late samples");
    lam = std::min(lam, -ls_slope(x, y));
  }

  BoundFit fit;
  fit.lambda = std::max(0.0, opt.lambda_safety * lam);
  for (const auto &tr : trajectories) {
    const double w = dissipation_weight(tr.k.norm());
    for (std::size_t i = 0; i < tr.times.size(); ++i)
      fit.C = std::max(fit.C, ratio(tr, i) * std::exp(fit.lambda * w * tr.times[i]));
  }
  fit.C *= opt.c_margin;
  fit.max_violation = bound_violation(fit, trajectories);
  return fit;
}

double bound_violation(const BoundFit &fit, const std::vector<Trajectory> &trajectories)
{
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto &tr : trajectories) {
    const double w = dissipation_weight(tr.k.norm());
    for (std::size_t i = 0; i < tr.times.size(); ++i)
      worst = std::max(worst, ratio(tr, i) * std::exp(fit.lambda * w * tr.times[i]) / fit.C - 1);
  }
  return worst;
}

}  // namespace emx
