#pragma once

// Multicanonical estimate of log P(M_L = M) under the plus-boundary Gibbs
// measure: Wang-Landau learning of magnetization weights followed by a
// fixed-weight production run that reweights the visit histogram.

#include <cstdint>
#include <optional>
#include <vector>

#include "droplet/lattice.hpp"
#include "droplet/rng.hpp"

namespace droplet {

struct MagnetizationHistogram {
  int L = 0;
  double beta = 0.0;
  long M_min = 0;  // inclusive; bins step by 2
  long M_max = 0;
  std::vector<double> log_weight;        // learned weights, ~ log P(M) + const
  std::vector<double> logp;              // log P(M) + const, max over bins = 0
  std::vector<std::uint64_t> visits;     // production-run visits
  double flatness = 0.0;                 // min / mean of the last learning histogram
  int refinement_passes = 0;             // modification-factor halvings completed
  double final_ln_f = 0.0;
  bool converged = false;                // schedule reached its ln f floor

  std::size_t bins() const { return logp.size(); }
  /// Bins the production run never reached; their logp comes from the learned weights alone.
  std::size_t unvisited_bins() const;
  long magnetization(std::size_t bin) const { return M_min + 2 * static_cast<long>(bin); }
  std::optional<std::size_t> bin_of(long M) const;

  /// log-probabilities over the covered range, exp(.) summing to one.
  std::vector<double> normalized_log_probabilities() const;
  /// logp shifted so the most probable bin is zero.
  std::vector<double> mode_referenced_logp() const;
};

struct MulticanonicalSchedule {
  double ln_f_initial = 1.0;
  double ln_f_floor = 1e-8;
  double flatness = 0.8;           // min bin >= flatness * mean
  long check_interval_sweeps = 10;
  long max_learning_sweeps = 10'000'000;
  long production_sweeps = 10'000;
  Boundary boundary = Boundary::plus;
};

/// Histogram over the achievable magnetizations in [M_lo, M_hi] (both ends are
/// rounded inward to the parity of L^2).
MagnetizationHistogram multicanonical_logp(double beta, int L, long M_lo, long M_hi,
                                           RngStream& rng,
                                           const MulticanonicalSchedule& schedule = {});

}  // namespace droplet
