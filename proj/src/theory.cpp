#include "droplet/theory.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace droplet::theory {
namespace {

void require_dimension(int d) {
  if (d < 2) throw std::domain_error("dimension must be >= 2, got " + std::to_string(d));
}

void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw std::domain_error(std::string(name) + " must be positive and finite");
}

// Bisection for a sign change of f on [lo, hi]; f(lo) and f(hi) must have
// opposite signs (zero allowed at either end).
template <typename F>
double bisect(F&& f, double lo, double hi) {
  double f_lo = f(lo);
  if (f_lo == 0.0) return lo;
  if (f(hi) == 0.0) return hi;
  while (hi - lo > kRootTolerance) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Minimizer of Phi' on (0, inf): Phi'' vanishes where
// lambda^{-(d+1)/d} = 2 Delta d^2 / (d-1).
double derivative_minimizer(int d, double delta) {
  return std::pow(2.0 * delta * d * d / (d - 1.0), -static_cast<double>(d) / (d + 1.0));
}

}  // namespace

void TwoPhaseParams::validate() const {
  require_dimension(d);
  require_positive(rho_G, "rho_G");
  require_positive(kappa, "kappa");
  require_positive(tau_W, "tau_W");
  if (!(rho_L > rho_G)) throw std::domain_error("rho_L must exceed rho_G");
}

double phi(int d, double delta, double lambda) {
  require_dimension(d);
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::domain_error("lambda must lie in [0, 1]");
  if (!(delta >= 0.0)) throw std::domain_error("delta must be >= 0");
  const double one_minus = 1.0 - lambda;
  return std::pow(lambda, (d - 1.0) / d) + delta * one_minus * one_minus;
}

double phi_derivative(int d, double delta, double lambda) {
  require_dimension(d);
  if (lambda <= 0.0) return INFINITY;
  return ((d - 1.0) / d) * std::pow(lambda, -1.0 / d) - 2.0 * delta * (1.0 - lambda);
}

double critical_delta(int d) {
  require_dimension(d);
  return std::pow((d + 1.0) / 2.0, (d + 1.0) / d) / d;
}

double critical_lambda(int d) {
  require_dimension(d);
  return 2.0 / (d + 1.0);
}

std::vector<double> stationary_points(int d, double delta) {
  require_dimension(d);
  if (!(delta >= 0.0)) throw std::domain_error("delta must be >= 0");
  if (delta == 0.0) return {};
  const double pivot = derivative_minimizer(d, delta);
  if (pivot >= 1.0) return {};
  const double dip = phi_derivative(d, delta, pivot);
  if (dip > 0.0) return {};
  if (dip == 0.0) return {pivot};
  auto g = [&](double x) { return phi_derivative(d, delta, x); };
  return {bisect(g, 0.0, pivot), bisect(g, pivot, 1.0)};
}

PhiMinResult minimize_phi(int d, double delta) {
  require_dimension(d);
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw std::domain_error("delta must be finite and >= 0");

  const double delta_c = critical_delta(d);
  const double lambda_c = critical_lambda(d);
  PhiMinResult out;

  if (std::abs(delta - delta_c) < kDegeneracyTolerance) {
    out.degenerate = true;
    out.lambda_star = 0.0;
    out.phi_value = phi(d, delta, 0.0);
    out.lambda_alternate = lambda_c;
  } else if (delta < delta_c) {
    out.lambda_star = 0.0;
    out.phi_value = delta;
  } else {
    auto g = [&](double x) { return phi_derivative(d, delta, x); };
    out.lambda_star = bisect(g, lambda_c, 1.0);
    out.phi_value = phi(d, delta, out.lambda_star);
    const double barrier = bisect(g, 0.0, lambda_c);
    out.barrier_lambda = barrier;
    out.barrier_value = phi(d, delta, barrier);
    return out;
  }

  // Below (or at) criticality a local maximum still exists when Phi' dips
  // below zero; report it for barrier plots.
  const auto roots = stationary_points(d, delta);
  if (roots.size() == 2) {
    out.barrier_lambda = roots.front();
    out.barrier_value = phi(d, delta, roots.front());
  }
  return out;
}

std::vector<CurvePoint> lambda_curve(int d, std::span<const double> delta_grid) {
  std::vector<CurvePoint> curve;
  curve.reserve(delta_grid.size());
  for (double delta : delta_grid) curve.push_back({delta, minimize_phi(d, delta)});
  return curve;
}

double delta_from_physical(const TwoPhaseParams& p, double excess, double volume) {
  p.validate();
  require_positive(excess, "excess");
  require_positive(volume, "volume");
  const double d = p.d;
  return std::pow(p.rho_L - p.rho_G, (d - 1.0) / d) * std::pow(excess, (d + 1.0) / d) /
         (2.0 * p.kappa * p.tau_W * volume);
}

double delta_ising(double m_star, double chi, double tau_W, double v_L,
                   double lattice_sites) {
  require_positive(m_star, "m_star");
  require_positive(chi, "chi");
  require_positive(tau_W, "tau_W");
  require_positive(v_L, "v_L");
  require_positive(lattice_sites, "lattice_sites");
  return 2.0 * m_star * m_star * v_L * std::sqrt(v_L) / (chi * tau_W * lattice_sites);
}

double excess_volume_for_delta(double delta, double m_star, double chi,
                               double tau_W, double lattice_sites) {
  require_positive(delta, "delta");
  require_positive(m_star, "m_star");
  require_positive(chi, "chi");
  require_positive(tau_W, "tau_W");
  require_positive(lattice_sites, "lattice_sites");
  return std::cbrt(std::pow(delta * chi * tau_W * lattice_sites / (2.0 * m_star * m_star), 2.0));
}

double crossover_scale(const TwoPhaseParams& p) {
  p.validate();
  const double d = p.d;
  return std::pow(std::pow(p.kappa * p.tau_W, d) * std::pow(p.rho_L - p.rho_G, 1.0 - d),
                  1.0 / (d + 1.0));
}

MechanismCosts mechanism_costs(const MechanismSplit& split, const TwoPhaseParams& p,
                               double volume) {
  p.validate();
  require_positive(volume, "volume");
  if (split.dN_S < 0.0 || split.dN_I < 0.0 || split.dN_L < 0.0 || split.n < 0)
    throw std::domain_error("mechanism split counts must be nonnegative");
  if (!(split.C > 0.0)) throw std::domain_error("isoperimetric constant must be positive");
  const double d = p.d;
  const double two_kv = 2.0 * p.kappa * volume;
  MechanismCosts costs;
  costs.combined = split.dN_S * split.dN_S / two_kv +
                   p.tau_W * split.C * std::pow(split.dN_I, (d - 1.0) / d) *
                       std::pow(static_cast<double>(split.n), 1.0 / d);
  const double absorbed = split.dN_S + split.dN_I;
  costs.pure_fluctuation = absorbed * absorbed / two_kv;
  return costs;
}

}  // namespace droplet::theory
