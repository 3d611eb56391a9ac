#include "droplet/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "droplet/io.hpp"

namespace droplet::thermo {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return t;
}

// Wulff shape of the square-lattice Ising model:
//   cosh(beta x) + cosh(beta y) = cosh^2(2 beta) / sinh(2 beta).
// Its support function in direction (c, s), c, s >= 0, is
//   beta tau = c asinh(a c) + s asinh(a s),
//   sqrt(1 + a^2 c^2) + sqrt(1 + a^2 s^2) = cosh^2(2 beta) / sinh(2 beta).
double reduced_tension(double beta, double theta) {
  const double c = std::abs(std::cos(theta));
  const double s = std::abs(std::sin(theta));
  const double level = std::pow(std::cosh(2.0 * beta), 2) / std::sinh(2.0 * beta);
  auto excess = [&](double a) {
    return std::sqrt(1.0 + a * a * c * c) + std::sqrt(1.0 + a * a * s * s) - level;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (excess(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  const double a = 0.5 * (lo + hi);
  return c * std::asinh(a * c) + s * std::asinh(a * s);
}

struct HalfPlane {
  double nx, ny, h;  // x nx + y ny <= h
  double side(const Point& p) const { return p.x * nx + p.y * ny - h; }
};

std::vector<Point> clip(const std::vector<Point>& poly, const HalfPlane& hp) {
  std::vector<Point> out;
  out.reserve(poly.size() + 1);
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    const double sa = hp.side(a);
    const double sb = hp.side(b);
    if (sa <= 0.0) out.push_back(a);
    if ((sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0)) {
      const double t = sa / (sa - sb);
      out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
  }
  return out;
}

double shoelace(const std::vector<Point>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

}  // namespace

double beta_critical() { return 0.5 * std::log(1.0 + std::numbers::sqrt2); }

double m_star(double beta) {
  if (!(beta > beta_critical())) return 0.0;
  const double bracket = 1.0 - std::pow(std::sinh(2.0 * beta), -4.0);
  return bracket > 0.0 ? std::pow(bracket, 0.125) : 0.0;
}

double tau_ising(double beta, double theta) {
  if (!(beta > beta_critical()) || !std::isfinite(beta))
    throw std::domain_error("interface tension requires beta > beta_c");
  return reduced_tension(beta, theta) / beta;
}

TauFunction::TauFunction(std::function<double(double)> fn, Symmetry symmetry,
                         std::string label)
    : fn_(std::move(fn)), symmetry_(symmetry), label_(std::move(label)) {}

TauFunction TauFunction::isotropic(double tau0) {
  if (!(tau0 > 0.0)) throw std::domain_error("isotropic tension must be positive");
  return TauFunction([tau0](double) { return tau0; }, Symmetry::square, "isotropic");
}

TauFunction TauFunction::ising_reduced(double beta) {
  if (!(beta > beta_critical())) throw std::domain_error("Ising tension requires beta > beta_c");
  return TauFunction([beta](double t) { return reduced_tension(beta, t); }, Symmetry::square,
                     "ising-reduced");
}

TauFunction TauFunction::ising(double beta) {
  if (!(beta > beta_critical())) throw std::domain_error("Ising tension requires beta > beta_c");
  return TauFunction([beta](double t) { return tau_ising(beta, t); }, Symmetry::square,
                     "ising");
}

TauFunction TauFunction::from_samples(std::vector<Point> samples, std::string label) {
  if (samples.size() < 2) throw std::invalid_argument("tau table needs at least two samples");
  for (auto& s : samples) {
    if (!(s.y > 0.0)) throw std::domain_error("tau samples must be positive");
    s.x = wrap_angle(s.x);
  }
  std::sort(samples.begin(), samples.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
  auto table = std::make_shared<const std::vector<Point>>(std::move(samples));
  auto fn = [table](double theta) {
    const auto& t = *table;
    const double x = wrap_angle(theta);
    auto upper = std::upper_bound(t.begin(), t.end(), x,
                                  [](double v, const Point& p) { return v < p.x; });
    const Point& b = upper == t.end() ? t.front() : *upper;
    const Point& a = upper == t.begin() ? t.back() : *(upper - 1);
    double span = b.x - a.x;
    double offset = x - a.x;
    if (span <= 0.0) span += kTwoPi;
    if (offset < 0.0) offset += kTwoPi;
    return a.y + (b.y - a.y) * (offset / span);
  };
  return TauFunction(fn, Symmetry::none, std::move(label));
}

TauFunction TauFunction::from_table(std::istream& in, std::string label) {
  std::vector<Point> samples;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    Point p;
    if (!(row >> p.x >> p.y)) {
      // header line such as "theta,tau"
      if (samples.empty()) continue;
      throw std::invalid_argument("malformed tau table line: " + line);
    }
    samples.push_back(p);
  }
  return from_samples(std::move(samples), std::move(label));
}

TauFunction TauFunction::scaled(double factor) const {
  if (!(factor > 0.0)) throw std::domain_error("scale factor must be positive");
  auto inner = fn_;
  return TauFunction([inner, factor](double t) { return factor * inner(t); }, symmetry_,
                     label_ + "*scaled");
}

WulffShape wulff_construct(const TauFunction& tau, int resolution) {
  if (resolution < 16) throw std::invalid_argument("Wulff resolution must be >= 16");

  std::vector<HalfPlane> planes(static_cast<std::size_t>(resolution));
  double tau_max = 0.0;
  for (int i = 0; i < resolution; ++i) {
    const double theta = kTwoPi * i / resolution;
    const double t = tau(theta);
    if (!(t > 0.0) || !std::isfinite(t))
      throw std::domain_error("tau must be positive and finite at every sampled angle");
    planes[static_cast<std::size_t>(i)] = {std::cos(theta), std::sin(theta), t};
    tau_max = std::max(tau_max, t);
  }

  const double box = 4.0 * tau_max;
  std::vector<Point> poly{{-box, -box}, {box, -box}, {box, box}, {-box, box}};
  for (const auto& hp : planes) {
    poly = clip(poly, hp);
    if (poly.size() < 3) throw std::runtime_error("Wulff construction produced an empty polygon");
  }

  WulffShape shape;
  shape.resolution = resolution;
  shape.area = shoelace(poly);
  if (!(shape.area > 0.0)) throw std::runtime_error("Wulff construction produced a degenerate polygon");
  shape.boundary_free_energy = polygon_cost(poly, tau);
  shape.vertices = std::move(poly);
  return shape;
}

double polygon_cost(const std::vector<Point>& polygon, const TauFunction& tau) {
  double cost = 0.0;
  for (std::size_t i = 0, n = polygon.size(); i < n; ++i) {
    const Point& a = polygon[i];
    const Point& b = polygon[(i + 1) % n];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len = std::hypot(dx, dy);
    if (len == 0.0) continue;
    // outward normal of a counter-clockwise edge
    cost += len * tau(std::atan2(-dx, dy));
  }
  return cost;
}

double tau_W_unit_volume(const WulffShape& shape) {
  if (!(shape.area > 0.0)) throw std::domain_error("Wulff shape must have positive area");
  return 2.0 * std::sqrt(shape.area);
}

IsingThermo IsingThermo::exact(double beta, int resolution) {
  IsingThermo t;
  t.beta = beta;
  t.beta_c = beta_critical();
  t.m_star = thermo::m_star(beta);
  t.tau_axis = tau_ising(beta, 0.0);
  t.tau_W = tau_W_unit_volume(wulff_construct(TauFunction::ising_reduced(beta), resolution));
  return t;
}

void write_polygon_csv(std::ostream& out, const WulffShape& shape) {
  out << "x,y\n";
  for (const auto& p : shape.vertices) out << io::fmt(p.x) << ',' << io::fmt(p.y) << '\n';
}

}  // namespace droplet::thermo
