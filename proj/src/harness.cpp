#include "droplet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "droplet/chi.hpp"
#include "droplet/theory.hpp"

namespace droplet::harness {
namespace {

using io::fmt;

// Runs body(i) for i in [0, n) on up to `threads` workers; the first
// exception is rethrown on the calling thread.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

struct MeanError {
  double mean = 0.0;
  double error = 0.0;
  int count = 0;
};

MeanError mean_error(const std::vector<double>& x) {
  MeanError out;
  out.count = static_cast<int>(x.size());
  if (x.empty()) return out;
  double s = 0.0;
  for (double v : x) s += v;
  out.mean = s / out.count;
  if (out.count > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - out.mean) * (v - out.mean);
    out.error = std::sqrt(ss / (out.count - 1) / out.count);
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    if constexpr (std::is_floating_point_v<T>) out << fmt(values[i]);
    else out << values[i];
  }
  return out.str();
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw std::invalid_argument("config key '" + key + "': expected a number, got '" + v + "'");
  return x;
}

long to_long(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long x = 0;
  try {
    x = std::stol(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + v + "'");
  return x;
}

std::uint64_t stream_for(const PlannedPoint& point, int replica) {
  return static_cast<std::uint64_t>(point.index) * 1'000'003ULL + static_cast<std::uint64_t>(replica);
}

}  // namespace

// ---------------------------------------------------------------------------
// Sweep specification

void SweepSpec::validate() const {
  if (!(beta > thermo::beta_critical()))
    throw std::invalid_argument("beta must exceed beta_c = " + fmt(thermo::beta_critical()));
  if (L_list.empty()) throw std::invalid_argument("L_list must not be empty");
  for (int L : L_list)
    if (L < 4) throw std::invalid_argument("every L must be >= 4");
  if (delta_grid.empty() == v_list.empty())
    throw std::invalid_argument("exactly one of delta_grid and vL_list must be given");
  for (double d : delta_grid)
    if (!(d > 0.0)) throw std::invalid_argument("delta_grid values must be positive");
  for (double v : v_list)
    if (!(v > 0.0)) throw std::invalid_argument("vL_list values must be positive");
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (budget < 1) throw std::invalid_argument("budget must be >= 1 measurement per replica");
  if (burn_in_factor < 0) throw std::invalid_argument("burn_in_factor must be >= 0");
  if (measure_interval < 1) throw std::invalid_argument("measure_interval must be >= 1");
  if (K_list.empty()) throw std::invalid_argument("K_list must not be empty");
  for (double K : K_list)
    if (!(K > 0.0)) throw std::invalid_argument("K values must be positive");
  if (chi && !(*chi > 0.0)) throw std::invalid_argument("chi must be positive");
  if (!chi && (chi_L < 4 || chi_sweeps < 1000))
    throw std::invalid_argument("chi measurement needs chi_L >= 4 and chi_sweeps >= 1000");
  if (wulff_resolution < 16) throw std::invalid_argument("wulff_resolution must be >= 16");
  if (logp_production_sweeps < 1) throw std::invalid_argument("logp_production_sweeps must be >= 1");
}

std::vector<std::string> SweepSpec::warnings() const {
  std::vector<std::string> out;
  for (int L : L_list)
    for (double K : K_list) {
      const double lo = K * std::log(static_cast<double>(L));
      const double hi = std::cbrt(static_cast<double>(L) * L) / K;
      if (!(lo < hi))
        out.push_back("census window empty for L=" + std::to_string(L) + ", K=" + fmt(K) +
                      ": K ln L = " + fmt(lo) + " >= L^(2/3)/K = " + fmt(hi));
    }
  return out;
}

SweepSpec spec_from_key_values(const io::KeyValues& kv) {
  SweepSpec spec;
  for (const auto& [key, value] : kv) {
    if (key == "beta") spec.beta = to_double(key, value);
    else if (key == "L_list") spec.L_list = io::parse_int_list(value);
    else if (key == "delta_grid") spec.delta_grid = io::parse_double_list(value);
    else if (key == "vL_list") spec.v_list = io::parse_double_list(value);
    else if (key == "replicas") spec.replicas = static_cast<int>(to_long(key, value));
    else if (key == "budget") spec.budget = to_long(key, value);
    else if (key == "burn_in_factor") spec.burn_in_factor = to_long(key, value);
    else if (key == "measure_interval") spec.measure_interval = to_long(key, value);
    else if (key == "K_list") spec.K_list = io::parse_double_list(value);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(to_long(key, value));
    else if (key == "modes") {
      spec.census = spec.lambda = spec.logp = false;
      std::string token;
      std::istringstream in(value);
      while (std::getline(in, token, ',')) {
        token.erase(0, token.find_first_not_of(' '));
        token.erase(token.find_last_not_of(' ') + 1);
        if (token == "census") spec.census = true;
        else if (token == "lambda") spec.lambda = true;
        else if (token == "logp") spec.logp = true;
        else if (!token.empty()) throw std::invalid_argument("unknown mode '" + token + "'");
      }
    } else if (key == "exchange") {
      if (value == "local") spec.exchange = ExchangeMode::local;
      else if (value == "nonlocal") spec.exchange = ExchangeMode::nonlocal;
      else throw std::invalid_argument("exchange must be local or nonlocal");
    } else if (key == "chi") spec.chi = to_double(key, value);
    else if (key == "chi_L") spec.chi_L = static_cast<int>(to_long(key, value));
    else if (key == "chi_sweeps") spec.chi_sweeps = static_cast<int>(to_long(key, value));
    else if (key == "wulff_resolution") spec.wulff_resolution = static_cast<int>(to_long(key, value));
    else if (key == "logp_production_sweeps") spec.logp_production_sweeps = to_long(key, value);
    else if (key == "threads") spec.threads = static_cast<int>(to_long(key, value));
    else if (key == "write_streams") spec.write_streams = parse_bool(value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return spec;
}

io::KeyValues spec_to_key_values(const SweepSpec& spec) {
  io::KeyValues kv;
  kv["beta"] = fmt(spec.beta);
  kv["L_list"] = join(spec.L_list);
  if (!spec.delta_grid.empty()) kv["delta_grid"] = join(spec.delta_grid);
  if (!spec.v_list.empty()) kv["vL_list"] = join(spec.v_list);
  kv["replicas"] = std::to_string(spec.replicas);
  kv["budget"] = std::to_string(spec.budget);
  kv["burn_in_factor"] = std::to_string(spec.burn_in_factor);
  kv["measure_interval"] = std::to_string(spec.measure_interval);
  kv["K_list"] = join(spec.K_list);
  kv["seed"] = std::to_string(spec.seed);
  std::vector<std::string> modes;
  if (spec.census) modes.emplace_back("census");
  if (spec.lambda) modes.emplace_back("lambda");
  if (spec.logp) modes.emplace_back("logp");
  kv["modes"] = join(modes);
  kv["exchange"] = spec.exchange == ExchangeMode::local ? "local" : "nonlocal";
  if (spec.chi) kv["chi"] = fmt(*spec.chi);
  kv["chi_L"] = std::to_string(spec.chi_L);
  kv["chi_sweeps"] = std::to_string(spec.chi_sweeps);
  kv["wulff_resolution"] = std::to_string(spec.wulff_resolution);
  kv["logp_production_sweeps"] = std::to_string(spec.logp_production_sweeps);
  kv["threads"] = std::to_string(spec.threads);
  kv["write_streams"] = spec.write_streams ? "true" : "false";
  return kv;
}

// ---------------------------------------------------------------------------
// Planning

std::vector<PlannedPoint> plan_sweep(const SweepSpec& spec, const thermo::IsingThermo& thermo) {
  spec.validate();
  if (!thermo.chi) throw std::invalid_argument("sweep planning needs chi");
  const double chi = *thermo.chi;
  const bool by_delta = !spec.delta_grid.empty();
  const auto& targets = by_delta ? spec.delta_grid : spec.v_list;

  std::vector<PlannedPoint> plan;
  for (int L : spec.L_list) {
    const double sites = static_cast<double>(L) * L;
    for (double target : targets) {
      PlannedPoint p;
      p.beta = spec.beta;
      p.L = L;
      p.index = plan.size();
      p.requested = target;
      p.requested_is_delta = by_delta;
      const double v = by_delta
                           ? theory::excess_volume_for_delta(target, thermo.m_star, chi, thermo.tau_W, sites)
                           : target;
      const double ideal_M = thermo.m_star * sites - 2.0 * thermo.m_star * v;
      if (ideal_M < -sites) {
        p.rejected = "unreachable: v_L = " + fmt(v) + " needs M = " + fmt(ideal_M) + " < -L^2";
      } else {
        p.constraint = CanonicalConstraint::from_excess(v, thermo.m_star, L);
        if (!(p.constraint.v_L > 0.0))
          p.rejected = "excess volume rounds to " + fmt(p.constraint.v_L);
        else
          p.delta = theory::delta_ising(thermo.m_star, chi, thermo.tau_W, p.constraint.v_L, sites);
      }
      plan.push_back(std::move(p));
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Replicas

RunOptions run_options(const SweepSpec& spec) {
  RunOptions o;
  o.budget = spec.budget;
  o.burn_in_factor = spec.burn_in_factor;
  o.measure_interval = spec.measure_interval;
  o.replicas = spec.replicas;
  o.K_list = spec.K_list;
  o.seed = spec.seed;
  o.exchange = spec.exchange;
  o.threads = spec.threads;
  return o;
}

ReplicaResult run_replica(const PlannedPoint& point, const RunOptions& options, int replica) {
  if (point.rejected) throw std::invalid_argument("cannot run a rejected point: " + *point.rejected);
  if (options.budget < 1) throw std::invalid_argument("run budget must be >= 1");
  if (options.K_list.empty()) throw std::invalid_argument("K_list must not be empty");

  RngStream rng(options.seed, stream_for(point, replica));
  ReplicaResult out;
  out.replica = replica;
  out.init = replica % 2 == 0 ? InitMode::random : InitMode::block;
  auto config = SpinConfig::with_magnetization(point.L, point.beta, point.constraint.target_M,
                                               out.init, rng);
  const long n = config.sites();

  std::ofstream stream;
  if (!options.stream_dir.empty()) {
    const auto path = std::filesystem::path(options.stream_dir) /
                      ("stream_p" + std::to_string(point.index) + "_r" + std::to_string(replica) + ".csv");
    stream.open(path);
    if (!stream) throw std::runtime_error("cannot write " + path.string());
    stream << "sweep,M,energy,largest_contour_volume,n_intermediate,n_large\n";
  }

  for (long s = 0; s < options.burn_in_factor * n; ++s)
    canonical_step(config, point.constraint, rng, options.exchange);
  out.magnetization_coherent = config.recompute_magnetization() == point.constraint.target_M &&
                               config.magnetization() == point.constraint.target_M;

  out.per_K.assign(options.K_list.size(), {});
  for (auto& v : out.per_K) v.reserve(static_cast<std::size_t>(options.budget));
  for (long m = 0; m < options.budget; ++m) {
    for (long s = 0; s < options.measure_interval * n; ++s)
      canonical_step(config, point.constraint, rng, options.exchange);
    if (config.recompute_magnetization() != point.constraint.target_M) out.magnetization_coherent = false;
    const auto contours = extract_contours(config);
    for (std::size_t k = 0; k < options.K_list.size(); ++k) {
      CensusSample sample;
      sample.census = classify(contours, point.L, options.K_list[k]);
      sample.lambda_hat = droplet_fraction(sample.census, point.constraint);
      sample.lambda_hat_net = droplet_fraction_net(sample.census, point.constraint);
      out.per_K[k].push_back(sample);
    }
    if (stream) {
      const auto& c = out.per_K.front().back().census;
      stream << options.burn_in_factor + (m + 1) * options.measure_interval << ','
             << config.magnetization() << ',' << energy(config) << ',' << c.largest_large_volume << ','
             << c.n_intermediate << ',' << c.n_large << '\n';
    }
  }
  return out;
}

double RunRecord::recomputed_delta() const {
  return theory::delta_ising(m_star, chi, tau_W, v_L, static_cast<double>(L) * L);
}

std::vector<RunRecord> aggregate(const PlannedPoint& point, const thermo::IsingThermo& thermo,
                                 const RunOptions& options, std::vector<ReplicaResult> replicas) {
  if (replicas.empty()) throw std::invalid_argument("aggregate needs at least one replica");
  std::sort(replicas.begin(), replicas.end(),
            [](const ReplicaResult& a, const ReplicaResult& b) { return a.replica < b.replica; });

  std::vector<RunRecord> records;
  for (std::size_t k = 0; k < options.K_list.size(); ++k) {
    RunRecord r;
    r.beta = point.beta;
    r.L = point.L;
    r.v_L = point.constraint.v_L;
    r.target_M = point.constraint.target_M;
    r.delta = point.delta;
    r.m_star = thermo.m_star;
    r.chi = thermo.chi.value_or(0.0);
    r.tau_W = thermo.tau_W;
    r.K = options.K_list[k];
    r.seed = options.seed;
    r.replicas = static_cast<int>(replicas.size());

    std::vector<CensusSample> all;
    std::vector<double> means, means_random, means_block;
    double net_sum = 0.0;
    for (const auto& rep : replicas) {
      const auto& samples = rep.per_K.at(k);
      all.insert(all.end(), samples.begin(), samples.end());
      double s = 0.0;
      for (const auto& x : samples) {
        s += x.lambda_hat;
        net_sum += x.lambda_hat_net;
      }
      const double m = samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
      means.push_back(m);
      (rep.init == InitMode::random ? means_random : means_block).push_back(m);
      r.coherent = r.coherent && rep.magnetization_coherent;
    }
    const auto summary = census_frequencies(all);
    r.samples = summary.samples;
    r.window_valid = summary.window_valid;
    r.A = summary.A;
    r.B = summary.B;
    r.C = summary.C;
    r.intermediate_rate = summary.intermediate_rate;
    const auto overall = mean_error(means);
    r.mean_lambda = overall.mean;
    r.lambda_error = overall.error;
    const auto mr = mean_error(means_random);
    const auto mb = mean_error(means_block);
    r.mean_lambda_random = mr.mean;
    r.mean_lambda_block = mb.mean;
    r.mean_lambda_net = net_sum / static_cast<double>(summary.samples);
    if (mr.count >= 2 && mb.count >= 2) {
      const double combined = std::hypot(mr.error, mb.error);
      r.metastable = std::abs(mr.mean - mb.mean) > 3.0 * combined;
    }
    records.push_back(r);
  }
  return records;
}

std::vector<RunRecord> run_point(const PlannedPoint& point, const thermo::IsingThermo& thermo,
                                 const RunOptions& options) {
  if (options.replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  if (options.budget < 1) throw std::invalid_argument("run budget must be >= 1");
  std::vector<ReplicaResult> results(static_cast<std::size_t>(options.replicas));
  parallel_for(options.replicas, options.threads,
               [&](int r) { results[static_cast<std::size_t>(r)] = run_replica(point, options, r); });
  return aggregate(point, thermo, options, std::move(results));
}

// ---------------------------------------------------------------------------
// Rate function

RateFit fit_rate(const MagnetizationHistogram& histogram, const thermo::IsingThermo& thermo,
                 const std::vector<double>& v_values) {
  if (!thermo.chi) throw std::invalid_argument("rate fit needs chi");
  if (histogram.bins() == 0) throw std::invalid_argument("rate fit needs a non-empty histogram");
  RateFit fit;
  fit.beta = histogram.beta;
  fit.L = histogram.L;
  const auto logp = histogram.mode_referenced_logp();
  const double sites = static_cast<double>(histogram.L) * histogram.L;
  for (double v : v_values) {
    RateRow row;
    row.v_requested = v;
    if (!(v > 0.0)) {
      row.skipped = "v must be positive";
      fit.rows.push_back(row);
      continue;
    }
    const auto constraint = CanonicalConstraint::from_excess(v, thermo.m_star, histogram.L);
    row.v_L = constraint.v_L;
    row.target_M = constraint.target_M;
    const auto bin = histogram.bin_of(constraint.target_M);
    if (!bin) {
      row.skipped = "bin missing for M = " + std::to_string(constraint.target_M);
    } else if (!(constraint.v_L > 0.0)) {
      row.skipped = "realized v_L is not positive";
    } else {
      row.delta = theory::delta_ising(thermo.m_star, *thermo.chi, thermo.tau_W, row.v_L, sites);
      const auto min = theory::minimize_phi(2, row.delta);
      row.lambda_star = min.lambda_star;
      row.empirical = -logp[*bin] / std::sqrt(row.v_L);
      row.theory = thermo.tau_W * min.phi_value;
      row.deviation = row.empirical / row.theory - 1.0;
    }
    fit.rows.push_back(row);
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Sweeps

ResolvedThermo resolve_thermo(const SweepSpec& spec) {
  ResolvedThermo out;
  out.thermo = thermo::IsingThermo::exact(spec.beta, spec.wulff_resolution);
  if (spec.chi) {
    out.thermo.chi = *spec.chi;
  } else {
    RngStream rng(spec.seed, 0xc41ULL << 40);
    const auto est = measure_chi(spec.beta, spec.chi_L, spec.chi_sweeps, rng);
    out.thermo.chi = est.chi;
    out.chi_error = est.std_error;
    out.chi_measured = true;
    out.chi_flagged = est.flagged;
  }
  return out;
}

SweepResult run_sweep(const SweepSpec& spec, const ProgressSink& progress,
                      const std::string& stream_dir) {
  spec.validate();
  auto log = [&](const std::string& line) {
    if (progress) progress(line);
  };
  SweepResult result;
  result.spec = spec;
  if (spec.census || spec.lambda)
    for (auto& w : spec.warnings()) result.flags.push_back(w);

  result.thermo = resolve_thermo(spec);
  const auto& th = result.thermo.thermo;
  log("thermo: beta=" + fmt(th.beta) + " m*=" + fmt(th.m_star) + " tau_W=" + fmt(th.tau_W) +
      " chi=" + fmt(*th.chi));
  if (result.thermo.chi_flagged) result.flags.push_back("chi autocorrelation time exceeds sweeps/100");

  result.plan = plan_sweep(spec, th);
  auto options = run_options(spec);
  if (spec.write_streams) {
    options.stream_dir = stream_dir.empty() ? "." : stream_dir;
    std::filesystem::create_directories(options.stream_dir);
  }
  for (const auto& point : result.plan) {
    if (point.rejected) {
      result.flags.push_back("point " + std::to_string(point.index) + " rejected: " + *point.rejected);
      continue;
    }
    if (!(spec.census || spec.lambda)) continue;
    log("point " + std::to_string(point.index) + ": L=" + std::to_string(point.L) +
        " delta=" + fmt(point.delta) + " v_L=" + fmt(point.constraint.v_L));
    auto records = run_point(point, th, options);
    for (const auto& r : records) {
      if (r.metastable)
        result.flags.push_back("point " + std::to_string(point.index) + " K=" + fmt(r.K) +
                               ": random/block initializations disagree (metastable)");
      if (!r.coherent)
        result.flags.push_back("point " + std::to_string(point.index) + ": cached magnetization drifted");
    }
    result.records.insert(result.records.end(), records.begin(), records.end());
  }

  if (spec.logp) {
    for (int L : spec.L_list) {
      std::vector<double> vs;
      long M_lo = static_cast<long>(L) * L;
      for (const auto& p : result.plan)
        if (p.L == L && !p.rejected) {
          vs.push_back(p.constraint.v_L);
          M_lo = std::min(M_lo, p.constraint.target_M);
        }
      if (vs.empty()) continue;
      log("logp: L=" + std::to_string(L) + " M in [" + std::to_string(M_lo - 8) + ", " +
          std::to_string(static_cast<long>(L) * L) + "]");
      MulticanonicalSchedule schedule;
      schedule.production_sweeps = spec.logp_production_sweeps;
      RngStream rng(spec.seed, (0x10ULL << 40) + static_cast<std::uint64_t>(L));
      auto hist = multicanonical_logp(spec.beta, L, M_lo - 8, static_cast<long>(L) * L, rng, schedule);
      if (!hist.converged)
        result.flags.push_back("logp L=" + std::to_string(L) + ": multicanonical schedule did not converge");
      if (const auto missing = hist.unvisited_bins())
        result.flags.push_back("logp L=" + std::to_string(L) + ": " + std::to_string(missing) + " of " +
                               std::to_string(hist.bins()) +
                               " bins unvisited in production; their log p comes from the learned weights");
      result.rates.push_back(fit_rate(hist, th, vs));
      result.histograms.push_back(std::move(hist));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output

void write_runs_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << "beta,L,v_L,target_M,delta,m_star,chi,tau_W,K,window_valid,seed,replicas,samples,"
         "P_A,P_A_err,P_B,P_B_err,P_C,P_C_err,mean_lambda,lambda_err,mean_lambda_random,"
         "mean_lambda_block,mean_lambda_net,intermediate_rate,metastable\n";
  for (const auto& r : records) {
    out << fmt(r.beta) << ',' << r.L << ',' << fmt(r.v_L) << ',' << r.target_M << ',' << fmt(r.delta)
        << ',' << fmt(r.m_star) << ',' << fmt(r.chi) << ',' << fmt(r.tau_W) << ',' << fmt(r.K) << ','
        << (r.window_valid ? 1 : 0) << ',' << r.seed << ',' << r.replicas << ',' << r.samples << ','
        << fmt(r.A.p) << ',' << fmt(r.A.error) << ',' << fmt(r.B.p) << ',' << fmt(r.B.error) << ','
        << fmt(r.C.p) << ',' << fmt(r.C.error) << ',' << fmt(r.mean_lambda) << ','
        << fmt(r.lambda_error) << ',' << fmt(r.mean_lambda_random) << ',' << fmt(r.mean_lambda_block)
        << ',' << fmt(r.mean_lambda_net)
        << ',' << fmt(r.intermediate_rate) << ',' << (r.metastable ? 1 : 0) << '\n';
  }
}

void write_rate_csv(std::ostream& out, const std::vector<RateFit>& fits) {
  out << "beta,L,v_requested,v_L,target_M,delta,empirical,theory,lambda_star,deviation,skipped\n";
  for (const auto& fit : fits)
    for (const auto& r : fit.rows)
      out << fmt(fit.beta) << ',' << fit.L << ',' << fmt(r.v_requested) << ',' << fmt(r.v_L) << ','
          << r.target_M << ',' << fmt(r.delta) << ',' << fmt(r.empirical) << ',' << fmt(r.theory) << ','
          << fmt(r.lambda_star) << ',' << fmt(r.deviation) << ',' << r.skipped.value_or("") << '\n';
}

void write_histogram_csv(std::ostream& out, const MagnetizationHistogram& h) {
  out << "# L=" << h.L << "\n# beta=" << fmt(h.beta) << "\n# converged=" << (h.converged ? 1 : 0)
      << "\n# refinement_passes=" << h.refinement_passes << "\n# final_ln_f=" << fmt(h.final_ln_f)
      << "\nM,logp,log_weight,visits\n";
  for (std::size_t b = 0; b < h.bins(); ++b)
    out << h.magnetization(b) << ',' << fmt(h.logp[b]) << ',' << fmt(h.log_weight[b]) << ','
        << h.visits[b] << '\n';
}

MagnetizationHistogram read_histogram_csv(std::istream& in) {
  MagnetizationHistogram h;
  std::string line;
  bool header_seen = false;
  std::vector<long> ms;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const auto key = line.substr(2, eq - 2);
      const auto value = line.substr(eq + 1);
      if (key == "L") h.L = std::stoi(value);
      else if (key == "beta") h.beta = std::stod(value);
      else if (key == "converged") h.converged = value == "1";
      else if (key == "refinement_passes") h.refinement_passes = std::stoi(value);
      else if (key == "final_ln_f") h.final_ln_f = std::stod(value);
      continue;
    }
    if (!header_seen) {
      if (line.rfind("M,logp", 0) != 0) throw std::runtime_error("histogram CSV: missing header");
      header_seen = true;
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    long M = 0;
    double lp = 0.0, w = 0.0;
    std::uint64_t visits = 0;
    if (!(row >> M >> lp >> w >> visits)) throw std::runtime_error("histogram CSV: malformed row");
    ms.push_back(M);
    h.logp.push_back(lp);
    h.log_weight.push_back(w);
    h.visits.push_back(visits);
  }
  if (ms.empty() || h.L < 1) throw std::runtime_error("histogram CSV: no data");
  for (std::size_t i = 1; i < ms.size(); ++i)
    if (ms[i] != ms[i - 1] + 2) throw std::runtime_error("histogram CSV: bins must step by 2");
  h.M_min = ms.front();
  h.M_max = ms.back();
  return h;
}

std::string summary_json(const SweepResult& result) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["version"] = kVersion;
  ordered_json config = ordered_json::object();
  for (const auto& [k, v] : spec_to_key_values(result.spec)) config[k] = v;
  j["config"] = config;
  const auto& th = result.thermo.thermo;
  j["thermo"] = {{"beta", th.beta},
                 {"beta_c", th.beta_c},
                 {"m_star", th.m_star},
                 {"tau_axis", th.tau_axis},
                 {"tau_W", th.tau_W},
                 {"chi", th.chi.value_or(0.0)},
                 {"chi_error", result.thermo.chi_error},
                 {"chi_measured", result.thermo.chi_measured}};
  ordered_json plan = ordered_json::array();
  for (const auto& p : result.plan) {
    ordered_json e = {{"index", p.index},
                      {"L", p.L},
                      {p.requested_is_delta ? "requested_delta" : "requested_vL", p.requested},
                      {"v_L", p.constraint.v_L},
                      {"target_M", p.constraint.target_M},
                      {"delta", p.delta}};
    if (p.rejected) e["rejected"] = *p.rejected;
    plan.push_back(e);
  }
  j["plan"] = plan;
  j["records"] = result.records.size();
  ordered_json hist = ordered_json::array();
  for (const auto& h : result.histograms)
    hist.push_back({{"L", h.L},
                    {"M_min", h.M_min},
                    {"M_max", h.M_max},
                    {"converged", h.converged},
                    {"refinement_passes", h.refinement_passes}});
  j["histograms"] = hist;
  j["flags"] = result.flags;
  return j.dump(2) + "\n";
}

void write_outputs(const std::string& dir, const SweepResult& result) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  {
    std::ostringstream runs;
    write_runs_csv(runs, result.records);
    io::write_file((base / "runs.csv").string(), runs.str());
  }
  if (!result.rates.empty()) {
    std::ostringstream rate;
    write_rate_csv(rate, result.rates);
    io::write_file((base / "rate.csv").string(), rate.str());
    for (const auto& h : result.histograms) {
      std::ostringstream hs;
      write_histogram_csv(hs, h);
      io::write_file((base / ("logp_L" + std::to_string(h.L) + ".csv")).string(), hs.str());
    }
  }
  io::write_file((base / "summary.json").string(), summary_json(result));
}

}  // namespace droplet::harness
