#pragma once

// Universal droplet free-energy theory for a two-phase system at coexistence.
//
// A fixed particle excess dN in volume V is shared between Gaussian background
// fluctuations and a single Wulff-shaped droplet.  With lambda the fraction
// absorbed by the droplet, the leading-order cost is proportional to
//
//     Phi_Delta(lambda) = lambda^{(d-1)/d} + Delta (1 - lambda)^2
//
// and the typical lambda is its global minimizer on [0, 1].

#include <optional>
#include <span>
#include <vector>

namespace droplet::theory {

/// Coexistence parameters of a generic liquid/vapour system.
struct TwoPhaseParams {
  int d = 2;
  double rho_L = 1.0;
  double rho_G = 0.0;
  double kappa = 1.0;  // exp{-(dN)^2 / (2 kappa V)} fluctuation convention
  double tau_W = 1.0;  // unit-volume Wulff free energy

  void validate() const;
};

struct PhiMinResult {
  double lambda_star = 0.0;
  double phi_value = 0.0;
  // Two global minimizers coexist (0 and critical_lambda(d)); lambda_star
  // reports the lambda = 0 branch and lambda_alternate the droplet branch.
  bool degenerate = false;
  std::optional<double> lambda_alternate;
  // Interior local maximum separating lambda = 0 from the droplet minimum.
  std::optional<double> barrier_lambda;
  std::optional<double> barrier_value;
};

struct MechanismSplit {
  double dN_S = 0.0;
  double dN_I = 0.0;
  double dN_L = 0.0;
  int n = 0;
  double C = 1.0;
};

struct MechanismCosts {
  double combined = 0.0;
  double pure_fluctuation = 0.0;
};

struct CurvePoint {
  double delta = 0.0;
  PhiMinResult min;
};

inline constexpr double kRootTolerance = 1e-12;
inline constexpr double kDegeneracyTolerance = 1e-9;

double phi(int d, double delta, double lambda);

/// d Phi / d lambda; +infinity at lambda = 0.
double phi_derivative(int d, double delta, double lambda);

double critical_delta(int d);
double critical_lambda(int d);

PhiMinResult minimize_phi(int d, double delta);

/// Stationary points of Phi_Delta in (0, 1), ascending.  Empty, one (tangency)
/// or two entries.
std::vector<double> stationary_points(int d, double delta);

std::vector<CurvePoint> lambda_curve(int d, std::span<const double> delta_grid);

double delta_from_physical(const TwoPhaseParams& p, double excess, double volume);

/// Ising form: Delta = 2 m*^2 v^{3/2} / (chi tau_W |Lambda|).
double delta_ising(double m_star, double chi, double tau_W, double v_L,
                   double lattice_sites);

/// Inverse of delta_ising in v_L.
double excess_volume_for_delta(double delta, double m_star, double chi,
                               double tau_W, double lattice_sites);

/// Theta with Theta^{d+1} = (kappa tau_W)^d (rho_L - rho_G)^{1-d}.
double crossover_scale(const TwoPhaseParams& p);

MechanismCosts mechanism_costs(const MechanismSplit& split,
                               const TwoPhaseParams& p, double volume);

}  // namespace droplet::theory
