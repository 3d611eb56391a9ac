#pragma once

// Susceptibility chi = Var(M_L) / |Lambda_L| under the plus-boundary Gibbs
// measure, from single-site Metropolis sampling.

#include <span>

#include "droplet/rng.hpp"

namespace droplet {

/// Flyvbjerg-Petersen blocking estimate of the standard error of a mean.
struct BlockingResult {
  double mean = 0.0;
  double naive_error = 0.0;
  double error = 0.0;        // largest error over blocking levels with >= 32 blocks
  double tau_int = 0.5;      // (error / naive_error)^2 / 2
};
BlockingResult blocking_analysis(std::span<const double> series);

struct ChiOptions {
  int burn_in_sweeps = 1000;
  int min_sweeps = 1000;
};

struct ChiEstimate {
  double chi = 0.0;
  double std_error = 0.0;
  double tau_int = 0.0;  // of the magnetization series, in sweeps
  double mean_m = 0.0;   // M_L / |Lambda_L|
  long samples = 0;
  bool flagged = false;  // tau_int > sweeps / 100
};

ChiEstimate measure_chi(double beta, int L, int sweeps, RngStream& rng,
                        const ChiOptions& options = {});

}  // namespace droplet
