#include "droplet/multicanonical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace droplet {
namespace {

double log_sum_exp(const std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

}  // namespace

std::size_t MagnetizationHistogram::unvisited_bins() const {
  return static_cast<std::size_t>(std::count(visits.begin(), visits.end(), 0));
}

std::optional<std::size_t> MagnetizationHistogram::bin_of(long M) const {
  if (M < M_min || M > M_max || (M - M_min) % 2 != 0) return std::nullopt;
  return static_cast<std::size_t>((M - M_min) / 2);
}

std::vector<double> MagnetizationHistogram::normalized_log_probabilities() const {
  std::vector<double> out = logp;
  const double norm = log_sum_exp(out);
  for (double& x : out) x -= norm;
  return out;
}

std::vector<double> MagnetizationHistogram::mode_referenced_logp() const {
  std::vector<double> out = logp;
  const double top = *std::max_element(out.begin(), out.end());
  for (double& x : out) x -= top;
  return out;
}

MagnetizationHistogram multicanonical_logp(double beta, int L, long M_lo, long M_hi,
                                           RngStream& rng, const MulticanonicalSchedule& schedule) {
  const long n = static_cast<long>(L) * L;
  if (L < 1) throw std::invalid_argument("lattice side must be >= 1");
  M_lo = std::max(M_lo, -n);
  M_hi = std::min(M_hi, n);
  if ((n - M_lo) % 2 != 0) ++M_lo;
  if ((n - M_hi) % 2 != 0) --M_hi;
  if (M_lo > M_hi) throw std::invalid_argument("magnetization range contains no achievable value");
  if (!(schedule.ln_f_initial > schedule.ln_f_floor) || schedule.ln_f_floor <= 0.0)
    throw std::invalid_argument("schedule needs ln_f_initial > ln_f_floor > 0");
  if (schedule.production_sweeps < 1 || schedule.check_interval_sweeps < 1)
    throw std::invalid_argument("schedule sweep counts must be positive");

  MagnetizationHistogram hist;
  hist.L = L;
  hist.beta = beta;
  hist.M_min = M_lo;
  hist.M_max = M_hi;
  const auto bins = static_cast<std::size_t>((M_hi - M_lo) / 2 + 1);
  hist.log_weight.assign(bins, 0.0);
  hist.visits.assign(bins, 0);

  // start from the achievable value in range closest to all-plus
  auto config = SpinConfig::with_magnetization(L, beta, M_hi, InitMode::random, rng, schedule.boundary);
  long M = config.magnetization();
  auto& w = hist.log_weight;

  auto step = [&](auto&& on_visit) {
    const int site = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    const long M_new = M - 2 * config.spin(site);
    if (M_new >= M_lo && M_new <= M_hi) {
      const auto from = static_cast<std::size_t>((M - M_lo) / 2);
      const auto to = static_cast<std::size_t>((M_new - M_lo) / 2);
      const double log_ratio = -beta * config.flip_cost(site) + w[from] - w[to];
      if (log_ratio >= 0.0 || rng.uniform() < std::exp(log_ratio)) {
        config.flip(site);
        M = M_new;
      }
    }
    on_visit(static_cast<std::size_t>((M - M_lo) / 2));
  };

  std::vector<std::uint64_t> learn(bins, 0);
  double ln_f = schedule.ln_f_initial;
  long sweeps_used = 0;
  while (ln_f >= schedule.ln_f_floor && sweeps_used < schedule.max_learning_sweeps) {
    for (long s = 0; s < schedule.check_interval_sweeps * n; ++s)
      step([&](std::size_t b) {
        w[b] += ln_f;
        ++learn[b];
      });
    sweeps_used += schedule.check_interval_sweeps;
    const auto [lo_it, hi_it] = std::minmax_element(learn.begin(), learn.end());
    (void)hi_it;
    const double mean = static_cast<double>(std::accumulate(learn.begin(), learn.end(), std::uint64_t{0})) /
                        static_cast<double>(bins);
    hist.flatness = static_cast<double>(*lo_it) / mean;
    if (hist.flatness >= schedule.flatness) {
      ln_f *= 0.5;
      ++hist.refinement_passes;
      std::fill(learn.begin(), learn.end(), 0);
    }
  }
  hist.final_ln_f = ln_f;
  hist.converged = ln_f < schedule.ln_f_floor;

  // keep weights bounded before the frozen-weight production run
  const double w_max = *std::max_element(w.begin(), w.end());
  for (double& x : w) x -= w_max;

  for (long s = 0; s < schedule.production_sweeps * n; ++s)
    step([&](std::size_t b) { ++hist.visits[b]; });

  // unvisited bins fall back to the learned weight at the mean visit level
  const double mean_visits =
      static_cast<double>(schedule.production_sweeps * n) / static_cast<double>(bins);
  hist.logp.resize(bins);
  for (std::size_t b = 0; b < bins; ++b)
    hist.logp[b] = w[b] + std::log(hist.visits[b] > 0 ? static_cast<double>(hist.visits[b]) : mean_visits);
  const double top = *std::max_element(hist.logp.begin(), hist.logp.end());
  for (double& x : hist.logp) x -= top;
  return hist;
}

}  // namespace droplet
