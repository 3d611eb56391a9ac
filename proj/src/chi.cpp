#include "droplet/chi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "droplet/lattice.hpp"
#include "droplet/thermo.hpp"

namespace droplet {
namespace {

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

BlockingResult blocking_analysis(std::span<const double> series) {
  if (series.size() < 2) throw std::invalid_argument("blocking needs at least two samples");
  BlockingResult out;
  out.mean = mean_of(series);
  std::vector<double> level(series.begin(), series.end());
  bool first = true;
  while (level.size() >= 32 || first) {
    const double m = mean_of(level);
    double var = 0.0;
    for (double v : level) var += (v - m) * (v - m);
    var /= static_cast<double>(level.size() - 1);
    const double err = std::sqrt(var / static_cast<double>(level.size()));
    if (first) {
      out.naive_error = err;
      first = false;
    }
    out.error = std::max(out.error, err);
    std::vector<double> next(level.size() / 2);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = 0.5 * (level[2 * i] + level[2 * i + 1]);
    level = std::move(next);
  }
  if (out.naive_error > 0.0) out.tau_int = 0.5 * std::pow(out.error / out.naive_error, 2);
  return out;
}

ChiEstimate measure_chi(double beta, int L, int sweeps, RngStream& rng, const ChiOptions& options) {
  if (!(beta > thermo::beta_critical()))
    throw std::domain_error("susceptibility measurement requires beta > beta_c");
  if (sweeps < options.min_sweeps)
    throw std::invalid_argument("chi measurement needs at least " + std::to_string(options.min_sweeps) + " sweeps");
  SpinConfig config(L, beta, Boundary::plus);
  for (int s = 0; s < options.burn_in_sweeps; ++s) glauber_sweep(config, rng);

  const double n = config.sites();
  std::vector<double> m(static_cast<std::size_t>(sweeps));
  for (int s = 0; s < sweeps; ++s) {
    glauber_sweep(config, rng);
    m[static_cast<std::size_t>(s)] = static_cast<double>(config.magnetization());
  }
  const double mbar = mean_of(m);
  std::vector<double> sq(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) sq[i] = (m[i] - mbar) * (m[i] - mbar) / n;

  const auto mag = blocking_analysis(m);
  const auto fluct = blocking_analysis(sq);
  const double bessel = static_cast<double>(m.size()) / static_cast<double>(m.size() - 1);

  ChiEstimate out;
  out.chi = fluct.mean * bessel;
  out.std_error = fluct.error * bessel;
  out.tau_int = std::max(mag.tau_int, fluct.tau_int);
  out.mean_m = mbar / n;
  out.samples = sweeps;
  out.flagged = out.tau_int > sweeps / 100.0;
  return out;
}

}  // namespace droplet
