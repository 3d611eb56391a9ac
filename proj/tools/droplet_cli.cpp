// droplet: command-line front end for the droplet-formation toolkit.
//
// Exit status: 0 success, 1 usage or parameter-domain error, 2 runtime
// failure, 3 completed with flags (metastability, empty census windows,
// unconverged estimates).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "droplet/chi.hpp"
#include "droplet/harness.hpp"
#include "droplet/io.hpp"
#include "droplet/theory.hpp"
#include "droplet/thermo.hpp"

namespace fs = std::filesystem;
using droplet::io::fmt;
using nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kFlagged = 3;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string default_out_dir() {
  const char* env = std::getenv("DROPLET_OUT_DIR");
  return env && *env ? env : "droplet_out";
}

void write_summary(const fs::path& dir, const ordered_json& body) {
  fs::create_directories(dir);
  ordered_json j;
  j["version"] = droplet::harness::kVersion;
  for (const auto& [k, v] : body.items()) j[k] = v;
  droplet::io::write_file((dir / "summary.json").string(), j.dump(2) + "\n");
}

// -- theory ----------------------------------------------------------------

struct PhiArgs {
  int d = 2;
  double delta = 0.0;
  std::optional<double> lambda;
  int points = 0;
  std::string out;
};

int run_theory_phi(const PhiArgs& a) {
  namespace th = droplet::theory;
  if (a.lambda) {
    std::cout << fmt(th::phi(a.d, a.delta, *a.lambda)) << '\n';
    return kOk;
  }
  if (a.points > 0) {
    if (a.points < 2) throw UsageError("--points must be >= 2");
    std::ostringstream csv;
    const auto min = th::minimize_phi(a.d, a.delta);
    csv << "# d=" << a.d << "\n# delta=" << fmt(a.delta) << "\n# lambda_star=" << fmt(min.lambda_star)
        << "\n# phi_min=" << fmt(min.phi_value) << "\nlambda,phi\n";
    for (int k = 0; k < a.points; ++k) {
      const double lambda = static_cast<double>(k) / (a.points - 1);
      csv << fmt(lambda) << ',' << fmt(th::phi(a.d, a.delta, lambda)) << '\n';
    }
    if (a.out.empty()) std::cout << csv.str();
    else droplet::io::write_file(a.out, csv.str());
    return kOk;
  }
  const auto min = th::minimize_phi(a.d, a.delta);
  std::cout << "lambda_star=" << fmt(min.lambda_star) << "\nphi_min=" << fmt(min.phi_value)
            << "\ndegenerate=" << (min.degenerate ? 1 : 0) << '\n';
  if (min.lambda_alternate) std::cout << "lambda_alternate=" << fmt(*min.lambda_alternate) << '\n';
  if (min.barrier_lambda)
    std::cout << "barrier_lambda=" << fmt(*min.barrier_lambda) << "\nbarrier_phi=" << fmt(*min.barrier_value)
              << '\n';
  return kOk;
}

struct CurveArgs {
  int d = 2;
  double from = 0.0;
  double to = 2.0;
  int points = 201;
  std::vector<double> grid;
  std::string out;
};

int run_theory_curve(const CurveArgs& a) {
  namespace th = droplet::theory;
  std::vector<double> grid = a.grid;
  if (grid.empty()) {
    if (a.points < 2 || !(a.to > a.from)) throw UsageError("need --points >= 2 and --to > --from");
    for (int k = 0; k < a.points; ++k) grid.push_back(a.from + (a.to - a.from) * k / (a.points - 1));
  }
  std::ostringstream csv;
  csv << "# delta_c=" << fmt(th::critical_delta(a.d)) << "\n# lambda_c=" << fmt(th::critical_lambda(a.d))
      << "\ndelta,lambda_star,phi_value,degenerate\n";
  for (const auto& p : th::lambda_curve(a.d, grid))
    csv << fmt(p.delta) << ',' << fmt(p.min.lambda_star) << ',' << fmt(p.min.phi_value) << ','
        << (p.min.degenerate ? 1 : 0) << '\n';
  if (a.out.empty()) std::cout << csv.str();
  else droplet::io::write_file(a.out, csv.str());
  return kOk;
}

// -- thermodynamics --------------------------------------------------------

struct WulffArgs {
  std::optional<double> beta;
  std::string tau_file;
  int resolution = droplet::thermo::kDefaultWulffResolution;
  std::string out_dir;
};

int run_wulff(const WulffArgs& a) {
  namespace tt = droplet::thermo;
  std::optional<tt::TauFunction> tau;
  if (a.beta) {
    tau = tt::TauFunction::ising_reduced(*a.beta);
  } else {
    std::ifstream in(a.tau_file);
    if (!in) throw std::runtime_error("cannot read " + a.tau_file);
    tau = tt::TauFunction::from_table(in, a.tau_file);
  }
  const auto shape = tt::wulff_construct(*tau, a.resolution);
  const double tw = tt::tau_W_unit_volume(shape);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::ofstream poly(dir / "wulff.csv");
  tt::write_polygon_csv(poly, shape);
  if (!poly) throw std::runtime_error("cannot write " + (dir / "wulff.csv").string());
  std::cout << "tau_W=" << fmt(tw) << "\narea=" << fmt(shape.area) << "\nboundary_free_energy="
            << fmt(shape.boundary_free_energy) << "\nvertices=" << shape.vertices.size() << '\n';
  ordered_json s;
  s["command"] = "wulff";
  s["config"] = {{"beta", a.beta ? ordered_json(*a.beta) : ordered_json(nullptr)},
                 {"tau_file", a.tau_file},
                 {"resolution", a.resolution},
                 {"tau", tau->label()}};
  s["result"] = {{"tau_W", tw},
                 {"area", shape.area},
                 {"boundary_free_energy", shape.boundary_free_energy},
                 {"identity_residual", std::abs(shape.boundary_free_energy - 2.0 * shape.area) /
                                           shape.boundary_free_energy}};
  if (a.beta) {
    const auto t = tt::IsingThermo::exact(*a.beta, a.resolution);
    s["thermo"] = {{"beta_c", t.beta_c}, {"m_star", t.m_star}, {"tau_axis", t.tau_axis}};
    std::cout << "m_star=" << fmt(t.m_star) << "\ntau_axis=" << fmt(t.tau_axis) << '\n';
  }
  s["flags"] = ordered_json::array();
  write_summary(dir, s);
  return kOk;
}

struct ChiArgs {
  double beta = 0.0;
  int L = 64;
  int sweeps = 20000;
  int burn_in = 1000;
  std::uint64_t seed = 1;
  std::string out_dir;
};

int run_chi(const ChiArgs& a) {
  droplet::RngStream rng(a.seed, 0xc41ULL << 40);
  droplet::ChiOptions options;
  options.burn_in_sweeps = a.burn_in;
  const auto est = droplet::measure_chi(a.beta, a.L, a.sweeps, rng, options);
  std::cout << "chi=" << fmt(est.chi) << "\nstd_error=" << fmt(est.std_error) << "\ntau_int="
            << fmt(est.tau_int) << "\nmean_m=" << fmt(est.mean_m) << '\n';
  ordered_json s;
  s["command"] = "chi";
  s["config"] = {{"beta", a.beta}, {"L", a.L}, {"sweeps", a.sweeps}, {"burn_in", a.burn_in}, {"seed", a.seed}};
  s["result"] = {{"chi", est.chi},
                 {"std_error", est.std_error},
                 {"tau_int", est.tau_int},
                 {"mean_m", est.mean_m},
                 {"samples", est.samples}};
  s["flags"] = ordered_json::array();
  if (est.flagged) s["flags"].push_back("integrated autocorrelation time exceeds sweeps/100");
  write_summary(a.out_dir, s);
  return est.flagged ? kFlagged : kOk;
}

// -- sweeps ----------------------------------------------------------------

// Command-line overrides on top of an optional config file.
struct SweepArgs {
  std::string config;
  std::optional<double> beta;
  std::vector<int> L;
  std::vector<double> delta;
  std::vector<double> vL;
  std::optional<int> replicas;
  std::optional<long> budget;
  std::optional<long> burn_in;
  std::optional<long> interval;
  std::vector<double> K;
  std::optional<std::uint64_t> seed;
  std::string modes;
  std::string exchange;
  std::optional<double> chi;
  std::optional<int> chi_L;
  std::optional<int> chi_sweeps;
  std::optional<int> resolution;
  std::optional<long> production;
  std::optional<int> threads;
  bool streams = false;
  bool quiet = false;
  std::string out_dir;
};

droplet::harness::SweepSpec build_spec(const SweepArgs& a, bool logp_only) {
  droplet::io::KeyValues kv;
  if (!a.config.empty()) kv = droplet::io::read_key_values(a.config);
  if (!a.beta && !kv.contains("beta")) throw UsageError("--beta is required (or a config file with beta)");
  if (a.L.empty() && !kv.contains("L_list")) throw UsageError("--L is required (or a config file with L_list)");
  auto set = [&](const std::string& key, const std::string& value) { kv[key] = value; };
  auto list = [](const auto& values) {
    std::ostringstream out;
    for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
    return out.str();
  };
  auto dlist = [](const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + fmt(values[i]);
    return out;
  };
  if (a.beta) set("beta", fmt(*a.beta));
  if (!a.L.empty()) set("L_list", list(a.L));
  if (!a.delta.empty()) {
    kv.erase("vL_list");
    set("delta_grid", dlist(a.delta));
  }
  if (!a.vL.empty()) {
    kv.erase("delta_grid");
    set("vL_list", dlist(a.vL));
  }
  if (a.replicas) set("replicas", std::to_string(*a.replicas));
  if (a.budget) set("budget", std::to_string(*a.budget));
  if (a.burn_in) set("burn_in_factor", std::to_string(*a.burn_in));
  if (a.interval) set("measure_interval", std::to_string(*a.interval));
  if (!a.K.empty()) set("K_list", dlist(a.K));
  if (a.seed) set("seed", std::to_string(*a.seed));
  if (!a.modes.empty()) set("modes", a.modes);
  if (!a.exchange.empty()) set("exchange", a.exchange);
  if (a.chi) set("chi", fmt(*a.chi));
  if (a.chi_L) set("chi_L", std::to_string(*a.chi_L));
  if (a.chi_sweeps) set("chi_sweeps", std::to_string(*a.chi_sweeps));
  if (a.resolution) set("wulff_resolution", std::to_string(*a.resolution));
  if (a.production) set("logp_production_sweeps", std::to_string(*a.production));
  if (a.threads) set("threads", std::to_string(*a.threads));
  if (a.streams) set("write_streams", "true");
  if (logp_only) set("modes", "logp");
  auto spec = droplet::harness::spec_from_key_values(kv);
  spec.validate();
  return spec;
}

int run_simulate(const SweepArgs& a, bool logp_only) {
  const auto spec = build_spec(a, logp_only);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  droplet::harness::ProgressSink progress;
  if (!a.quiet) progress = [](const std::string& line) { std::cerr << line << std::endl; };
  const auto result = droplet::harness::run_sweep(spec, progress, (dir / "streams").string());
  droplet::harness::write_outputs(dir.string(), result);
  for (const auto& f : result.flags) std::cerr << "flag: " << f << '\n';
  if (!a.quiet) std::cerr << "wrote " << dir.string() << '\n';
  return result.flags.empty() ? kOk : kFlagged;
}

// -- analysis --------------------------------------------------------------

struct AnalyzeArgs {
  std::string histogram;
  std::vector<double> vL;
  double chi = 0.0;
  int resolution = droplet::thermo::kDefaultWulffResolution;
  std::string out_dir;
};

int run_analyze(const AnalyzeArgs& a) {
  std::ifstream in(a.histogram);
  if (!in) throw std::runtime_error("cannot read " + a.histogram);
  const auto hist = droplet::harness::read_histogram_csv(in);
  auto thermo = droplet::thermo::IsingThermo::exact(hist.beta, a.resolution);
  thermo.chi = a.chi;
  const auto fit = droplet::harness::fit_rate(hist, thermo, a.vL);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::ostringstream csv;
  droplet::harness::write_rate_csv(csv, {fit});
  droplet::io::write_file((dir / "rate.csv").string(), csv.str());
  std::cout << csv.str();
  ordered_json s;
  s["command"] = "analyze";
  s["config"] = {{"histogram", a.histogram}, {"vL", a.vL}, {"chi", a.chi}, {"wulff_resolution", a.resolution}};
  s["thermo"] = {{"beta", thermo.beta}, {"m_star", thermo.m_star}, {"tau_W", thermo.tau_W}, {"chi", a.chi}};
  s["flags"] = ordered_json::array();
  if (!hist.converged) s["flags"].push_back("histogram did not converge");
  for (const auto& row : fit.rows)
    if (row.skipped) s["flags"].push_back("v=" + fmt(row.v_requested) + " skipped: " + *row.skipped);
  write_summary(dir, s);
  return s["flags"].empty() ? kOk : kFlagged;
}

void add_sweep_options(CLI::App* cmd, SweepArgs& a, bool logp_only) {
  cmd->add_option("--config", a.config, "flat key=value sweep configuration")->check(CLI::ExistingFile);
  cmd->add_option("--beta", a.beta, "inverse temperature (> beta_c)");
  cmd->add_option("--L", a.L, "lattice sides")->delimiter(',');
  auto* delta = cmd->add_option("--delta", a.delta, "Delta targets")->delimiter(',');
  auto* vl = cmd->add_option("--vL", a.vL, "excess volumes")->delimiter(',');
  delta->excludes(vl);
  cmd->add_option("--chi", a.chi, "frozen susceptibility (measured when absent)");
  cmd->add_option("--chi-L", a.chi_L, "lattice side for the chi measurement");
  cmd->add_option("--chi-sweeps", a.chi_sweeps, "sweeps for the chi measurement");
  cmd->add_option("--seed", a.seed, "base seed");
  cmd->add_option("--resolution", a.resolution, "Wulff angular resolution");
  cmd->add_option("--threads", a.threads, "worker threads (0: all cores)");
  cmd->add_flag("--quiet", a.quiet, "suppress the progress log");
  cmd->add_option("--out-dir", a.out_dir, "output directory (default $DROPLET_OUT_DIR or droplet_out)");
  if (logp_only) {
    cmd->add_option("--production-sweeps", a.production, "frozen-weight production sweeps");
    return;
  }
  cmd->add_option("--replicas", a.replicas, "replicas per point");
  cmd->add_option("--budget", a.budget, "measurements per replica");
  cmd->add_option("--burn-in", a.burn_in, "burn-in proposals per site");
  cmd->add_option("--interval", a.interval, "proposals per site between measurements");
  cmd->add_option("--K", a.K, "census constants")->delimiter(',');
  cmd->add_option("--modes", a.modes, "comma list of census, lambda, logp");
  cmd->add_option("--exchange", a.exchange, "local or nonlocal")->check(CLI::IsMember({"local", "nonlocal"}));
  cmd->add_option("--production-sweeps", a.production, "multicanonical production sweeps (logp mode)");
  cmd->add_flag("--streams", a.streams, "write per-replica measurement streams");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Droplet formation in the 2D Ising model: theory, thermodynamics and simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", droplet::harness::kVersion);

  PhiArgs phi;
  auto* phi_cmd = app.add_subcommand("theory-phi", "evaluate Phi_Delta(lambda), its minimizer, or a lambda,phi table");
  phi_cmd->add_option("--d", phi.d, "dimension (>= 2)");
  phi_cmd->add_option("--delta", phi.delta, "Delta (>= 0)")->required();
  auto* lambda_opt = phi_cmd->add_option("--lambda", phi.lambda, "lambda in [0, 1]");
  phi_cmd->add_option("--points", phi.points, "emit a lambda,phi CSV on this many grid points")->excludes(lambda_opt);
  phi_cmd->add_option("--out", phi.out, "CSV path (default stdout)");

  int crit_d = 2;
  std::string which = "delta";
  auto* crit_cmd = app.add_subcommand("theory-critical", "print Delta_c (or lambda_c)");
  crit_cmd->add_option("--d", crit_d, "dimension (>= 2)");
  crit_cmd->add_option("--which", which, "delta or lambda")->check(CLI::IsMember({"delta", "lambda"}));

  CurveArgs curve;
  auto* curve_cmd = app.add_subcommand("theory-curve", "lambda_Delta over a Delta grid as CSV");
  curve_cmd->add_option("--d", curve.d, "dimension (>= 2)");
  curve_cmd->add_option("--from", curve.from, "first Delta");
  curve_cmd->add_option("--to", curve.to, "last Delta");
  curve_cmd->add_option("--points", curve.points, "grid points");
  curve_cmd->add_option("--grid", curve.grid, "explicit Delta values")->delimiter(',');
  curve_cmd->add_option("--out", curve.out, "CSV path (default stdout)");

  WulffArgs wulff;
  auto* wulff_cmd = app.add_subcommand("wulff", "Wulff construction and tau_W; writes wulff.csv and summary.json");
  auto* wb = wulff_cmd->add_option("--beta", wulff.beta, "Ising inverse temperature");
  auto* wf = wulff_cmd->add_option("--tau-file", wulff.tau_file, "theta,tau table")->check(CLI::ExistingFile);
  wb->excludes(wf);
  wulff_cmd->add_option("--resolution", wulff.resolution, "angular samples (>= 16)");
  wulff_cmd->add_option("--out-dir", wulff.out_dir, "output directory");

  ChiArgs chi;
  auto* chi_cmd = app.add_subcommand("chi", "measure the susceptibility Var(M)/|Lambda|");
  chi_cmd->add_option("--beta", chi.beta, "inverse temperature (> beta_c)")->required();
  chi_cmd->add_option("--L", chi.L, "lattice side");
  chi_cmd->add_option("--sweeps", chi.sweeps, "measurement sweeps");
  chi_cmd->add_option("--burn-in", chi.burn_in, "burn-in sweeps");
  chi_cmd->add_option("--seed", chi.seed, "seed");
  chi_cmd->add_option("--out-dir", chi.out_dir, "output directory");

  SweepArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "canonical sweep: census, droplet fraction, optional logp");
  add_sweep_options(sim_cmd, sim, false);

  SweepArgs logp;
  auto* logp_cmd = app.add_subcommand("logp", "multicanonical log P(M) and the rate comparison");
  add_sweep_options(logp_cmd, logp, true);

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "rate fit from a stored logp histogram");
  analyze_cmd->add_option("--histogram", analyze.histogram, "logp_L*.csv")->required()->check(CLI::ExistingFile);
  analyze_cmd->add_option("--vL", analyze.vL, "excess volumes")->required()->delimiter(',');
  analyze_cmd->add_option("--chi", analyze.chi, "susceptibility")->required();
  analyze_cmd->add_option("--resolution", analyze.resolution, "Wulff angular resolution");
  analyze_cmd->add_option("--out-dir", analyze.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "droplet: " << e.what() << '\n';
    return kUsage;
  }

  for (auto* dir : {&wulff.out_dir, &chi.out_dir, &sim.out_dir, &logp.out_dir, &analyze.out_dir})
    if (dir->empty()) *dir = default_out_dir();

  try {
    if (*phi_cmd) return run_theory_phi(phi);
    if (*crit_cmd) {
      std::cout << fmt(which == "delta" ? droplet::theory::critical_delta(crit_d)
                                        : droplet::theory::critical_lambda(crit_d))
                << '\n';
      return kOk;
    }
    if (*curve_cmd) return run_theory_curve(curve);
    if (*wulff_cmd) {
      if (!wulff.beta && wulff.tau_file.empty()) throw UsageError("wulff needs --beta or --tau-file");
      return run_wulff(wulff);
    }
    if (*chi_cmd) return run_chi(chi);
    if (*sim_cmd) return run_simulate(sim, false);
    if (*logp_cmd) return run_simulate(logp, true);
    if (*analyze_cmd) return run_analyze(analyze);
  } catch (const std::invalid_argument& e) {
    std::cerr << "droplet: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "droplet: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "droplet: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
