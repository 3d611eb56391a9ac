#pragma once

// Parameter sweeps over (beta, L, Delta): maps Delta targets to excess
// volumes, runs canonical replicas with contour censuses, aggregates the
// droplet statistics and fits the magnetization large-deviation rate.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "droplet/contour.hpp"
#include "droplet/io.hpp"
#include "droplet/lattice.hpp"
#include "droplet/multicanonical.hpp"
#include "droplet/thermo.hpp"

namespace droplet::harness {

inline constexpr const char* kVersion = "1.0.0";

struct SweepSpec {
  double beta = 0.7;
  std::vector<int> L_list{64};
  std::vector<double> delta_grid;  // exclusive with v_list
  std::vector<double> v_list;
  int replicas = 8;
  long budget = 100;               // measurements per replica
  long burn_in_factor = 1000;      // burn-in proposals / L^2
  long measure_interval = 10;      // proposals / L^2 between measurements
  std::vector<double> K_list{4.0};
  bool census = true;
  bool lambda = true;
  bool logp = false;
  std::uint64_t seed = 1;
  ExchangeMode exchange = ExchangeMode::nonlocal;
  std::optional<double> chi;       // frozen susceptibility; measured when absent
  int chi_L = 64;
  int chi_sweeps = 20000;
  int wulff_resolution = thermo::kDefaultWulffResolution;
  long logp_production_sweeps = 20000;
  int threads = 0;                 // 0: hardware concurrency
  bool write_streams = false;

  void validate() const;
  /// Problems that do not prevent a run (e.g. empty census windows).
  std::vector<std::string> warnings() const;
};

SweepSpec spec_from_key_values(const io::KeyValues& kv);
io::KeyValues spec_to_key_values(const SweepSpec& spec);

struct PlannedPoint {
  double beta = 0.0;
  int L = 0;
  std::size_t index = 0;       // position in the sweep plan
  double requested = 0.0;      // requested Delta, or v_L for explicit lists
  bool requested_is_delta = true;
  CanonicalConstraint constraint;
  double delta = 0.0;          // realized, via delta_ising(realized v_L)
  std::optional<std::string> rejected;
};

/// thermo must carry chi.
std::vector<PlannedPoint> plan_sweep(const SweepSpec& spec, const thermo::IsingThermo& thermo);

struct ReplicaResult {
  int replica = 0;
  InitMode init = InitMode::random;
  std::vector<std::vector<CensusSample>> per_K;  // [K index][sample]
  bool magnetization_coherent = true;
};

struct RunRecord {
  double beta = 0.0;
  int L = 0;
  double v_L = 0.0;
  long target_M = 0;
  double delta = 0.0;
  double m_star = 0.0;
  double chi = 0.0;
  double tau_W = 0.0;
  double K = 0.0;
  bool window_valid = true;
  std::uint64_t seed = 0;
  int replicas = 0;
  long samples = 0;
  Frequency A, B, C;
  double mean_lambda = 0.0;
  double lambda_error = 0.0;       // standard error over replica means
  double mean_lambda_random = 0.0; // random-initialized replicas
  double mean_lambda_block = 0.0;  // block-initialized replicas
  double mean_lambda_net = 0.0;    // nested islands excluded from the droplet volume
  double intermediate_rate = 0.0;
  bool metastable = false;
  bool coherent = true;

  /// Delta recomputed from the stored inputs.
  double recomputed_delta() const;
};

struct RunOptions {
  long budget = 100;
  long burn_in_factor = 1000;
  long measure_interval = 10;
  int replicas = 8;
  std::vector<double> K_list{4.0};
  std::uint64_t seed = 1;
  ExchangeMode exchange = ExchangeMode::nonlocal;
  int threads = 0;
  std::string stream_dir;  // per-replica measurement CSVs when non-empty
};

RunOptions run_options(const SweepSpec& spec);

/// Replica r uses RngStream(seed, point.index * 1'000'003 + r) and starts from
/// a random (even r) or block (odd r) placement of the minus spins.
ReplicaResult run_replica(const PlannedPoint& point, const RunOptions& options, int replica);

/// Order-independent merge: replicas are sorted by id before aggregation.
std::vector<RunRecord> aggregate(const PlannedPoint& point, const thermo::IsingThermo& thermo,
                                 const RunOptions& options, std::vector<ReplicaResult> replicas);

std::vector<RunRecord> run_point(const PlannedPoint& point, const thermo::IsingThermo& thermo,
                                 const RunOptions& options);

struct RateRow {
  double v_requested = 0.0;
  double v_L = 0.0;
  long target_M = 0;
  double delta = 0.0;
  double empirical = 0.0;  // -log p / sqrt(v_L)
  double theory = 0.0;     // tau_W inf Phi_Delta
  double lambda_star = 0.0;
  double deviation = 0.0;  // empirical / theory - 1
  std::optional<std::string> skipped;
};

struct RateFit {
  double beta = 0.0;
  int L = 0;
  std::vector<RateRow> rows;
};

RateFit fit_rate(const MagnetizationHistogram& histogram, const thermo::IsingThermo& thermo,
                 const std::vector<double>& v_values);

/// Thermodynamic inputs with chi resolved (frozen value or measurement).
struct ResolvedThermo {
  thermo::IsingThermo thermo;
  double chi_error = 0.0;
  bool chi_measured = false;
  bool chi_flagged = false;
};
ResolvedThermo resolve_thermo(const SweepSpec& spec);

struct SweepResult {
  SweepSpec spec;
  ResolvedThermo thermo;
  std::vector<PlannedPoint> plan;
  std::vector<RunRecord> records;
  std::vector<RateFit> rates;
  std::vector<MagnetizationHistogram> histograms;
  std::vector<std::string> flags;
};

using ProgressSink = std::function<void(const std::string&)>;

/// Per-replica measurement streams go to stream_dir when spec.write_streams.
SweepResult run_sweep(const SweepSpec& spec, const ProgressSink& progress = {},
                      const std::string& stream_dir = {});

void write_runs_csv(std::ostream& out, const std::vector<RunRecord>& records);
void write_rate_csv(std::ostream& out, const std::vector<RateFit>& fits);
void write_histogram_csv(std::ostream& out, const MagnetizationHistogram& histogram);
MagnetizationHistogram read_histogram_csv(std::istream& in);
std::string summary_json(const SweepResult& result);

/// Writes runs.csv, rate.csv (when logp ran) and summary.json into dir.
void write_outputs(const std::string& dir, const SweepResult& result);

}  // namespace droplet::harness
