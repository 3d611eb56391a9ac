#pragma once

// Exact 2D Ising thermodynamics (square lattice, J = 1) and a numerical
// Wulff construction for arbitrary angular interface tensions.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace droplet::thermo {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double beta_critical();

/// Onsager-Yang spontaneous magnetization; 0 for beta <= beta_c.
double m_star(double beta);

/// Interface tension per unit length (energy units) at normal angle theta.
/// beta * tau(0) = 2 beta + ln tanh beta.
double tau_ising(double beta, double theta);

enum class Symmetry { none, square };

/// Angular interface tension theta -> tau(theta) > 0.
class TauFunction {
 public:
  TauFunction(std::function<double(double)> fn, Symmetry symmetry, std::string label);

  static TauFunction isotropic(double tau0);
  /// beta * tau_ising(beta, .), the dimensionless tension entering Boltzmann weights.
  static TauFunction ising_reduced(double beta);
  /// Energy-unit tension tau_ising(beta, .).
  static TauFunction ising(double beta);
  /// Periodic linear interpolation of (theta, tau) samples.
  static TauFunction from_samples(std::vector<Point> samples, std::string label);
  static TauFunction from_table(std::istream& in, std::string label);

  double operator()(double theta) const { return fn_(theta); }
  Symmetry symmetry() const { return symmetry_; }
  const std::string& label() const { return label_; }
  TauFunction scaled(double factor) const;

 private:
  std::function<double(double)> fn_;
  Symmetry symmetry_;
  std::string label_;
};

struct WulffShape {
  std::vector<Point> vertices;  // counter-clockwise
  double area = 0.0;
  double boundary_free_energy = 0.0;  // sum over edges of tau(normal) * length
  int resolution = 0;
};

inline constexpr int kDefaultWulffResolution = 4096;

WulffShape wulff_construct(const TauFunction& tau, int resolution = kDefaultWulffResolution);

/// Free energy of the unit-area droplet of Wulff shape: 2 sqrt(area).
double tau_W_unit_volume(const WulffShape& shape);

/// Boundary free energy of a unit-area convex polygon under tau.
double polygon_cost(const std::vector<Point>& polygon, const TauFunction& tau);

struct IsingThermo {
  double beta = 0.0;
  double beta_c = 0.0;
  double m_star = 0.0;
  double tau_axis = 0.0;  // energy units
  // Dimensionless unit-area Wulff free energy (Wulff construction of beta*tau);
  // the scale of log-probabilities of droplets.
  double tau_W = 0.0;
  std::optional<double> chi;

  static IsingThermo exact(double beta, int resolution = kDefaultWulffResolution);
};

void write_polygon_csv(std::ostream& out, const WulffShape& shape);

}  // namespace droplet::thermo
