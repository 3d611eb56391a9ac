// Acceptance checks.  Each criterion prints exactly one line starting with
// PASS or FAIL; the extended rate criterion prints SKIP unless enabled with
// --extended or DROPLET_EXTENDED_TESTS=1.  Exit status is 1 if any selected
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "droplet/contour.hpp"
#include "droplet/harness.hpp"
#include "droplet/io.hpp"
#include "droplet/lattice.hpp"
#include "droplet/theory.hpp"
#include "droplet/thermo.hpp"
#include "oracles.hpp"
#include "stationarity.hpp"

using namespace droplet;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

void progress_line(const std::string& line) { std::cerr << "  " << line << std::endl; }

// ---------------------------------------------------------------------------

Outcome theory_exactness() {
  const double dc = theory::critical_delta(2);
  const double closed = 0.5 * std::pow(1.5, 1.5);
  const double lc = theory::critical_lambda(2);
  const double gap = std::abs(theory::phi(2, dc, 0.0) - theory::phi(2, dc, 2.0 / 3.0));
  const bool pass = std::abs(dc - 0.9185586535436919) < 1e-12 && std::abs(dc - closed) < 1e-12 &&
                    lc == 2.0 / 3.0 && gap < 1e-10;
  std::ostringstream s;
  s << "Delta_c=" << io::fmt(dc) << " lambda_c=" << io::fmt(lc) << " |Phi(0)-Phi(2/3)|=" << gap;
  return {pass, s.str()};
}

Outcome minimizer_oracle() {
  constexpr long kPoints = 1'000'000;
  constexpr double h = 1.0 / (kPoints - 1);
  RngStream rng(577, 0);
  int failures = 0, near_ties = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + static_cast<int>(rng.below(3));
    const double delta = 4.0 * theory::critical_delta(d) * rng.uniform();
    const auto r = theory::minimize_phi(d, delta);
    const auto grid = oracle::grid_scan_phi(d, delta, kPoints);
    const double dl = std::abs(r.lambda_star - grid.lambda);
    bool ok = r.phi_value <= grid.value + 1e-12;
    if (dl > 2.0 * h) {
      // both branches within grid value resolution of each other
      const bool tie = r.lambda_alternate.has_value() ||
                       std::abs(theory::phi(d, delta, 0.0) - grid.value) < 1e-9;
      near_ties += tie;
      ok = ok && tie;
    } else {
      worst = std::max(worst, dl);
    }
    failures += !ok;
  }
  std::ostringstream s;
  s << "200 trials, d in {2,3,4}, 1e6-point grid: failures=" << failures << " max|dlambda|=" << worst
    << " (grid step " << h << ") near ties=" << near_ties;
  return {failures == 0, s.str()};
}

Outcome sampler_correctness() {
  std::ostringstream s;
  bool pass = true;
  for (int L : {2, 3}) {
    for (auto boundary : {Boundary::plus, Boundary::free}) {
      const double beta = 0.3;
      const auto exact = oracle::boltzmann_distribution(L, beta, boundary == Boundary::plus ? 1 : 0);
      RngStream rng(300 + L, static_cast<int>(boundary));
      const auto r = oracle::check_stationarity(
          SpinConfig(L, beta, boundary), [&](SpinConfig& c) { glauber_step(c, rng); }, exact, 10'000'000);
      pass = pass && r.pass;
      if (!r.pass) s << "glauber L=" << L << " " << r.detail << "; ";
    }
  }
  struct Sector {
    int L;
    long M;
  };
  for (const auto& [L, M] : {Sector{2, 0}, Sector{2, 2}, Sector{3, 1}, Sector{3, -1}, Sector{3, 5}}) {
    for (auto mode : {ExchangeMode::nonlocal, ExchangeMode::local}) {
      const double beta = 0.4;
      const int sector = static_cast<int>(M);
      const auto exact = oracle::boltzmann_distribution(L, beta, 1, &sector);
      RngStream rng(400 + L, static_cast<std::uint64_t>(M + 100) * 2 + static_cast<int>(mode));
      const CanonicalConstraint constraint{0.0, M};
      const auto start = SpinConfig::with_magnetization(L, beta, M, InitMode::random, rng);
      const auto r = oracle::check_stationarity(
          start, [&](SpinConfig& c) { canonical_step(c, constraint, rng, mode); }, exact, 10'000'000);
      pass = pass && r.pass;
      if (!r.pass) s << "canonical L=" << L << " M=" << M << " " << r.detail << "; ";
    }
  }
  RngStream rng(2025, 0);
  int round_trip_failures = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    SpinConfig config(8, 0.5);
    const double fraction = 0.05 + 0.9 * rng.uniform();
    for (int site = 0; site < 64; ++site)
      if (rng.uniform() < fraction) config.set_spin(site, -1);
    const auto contours = extract_contours(config);
    const auto rendered = render_contours(contours, 8);
    long signed_volume = 0;
    for (const auto& c : contours) signed_volume += (c.depth % 2 == 0 ? 1 : -1) * c.volume;
    bool ok = signed_volume == config.minus_count();
    for (int site = 0; site < 64; ++site) ok = ok && rendered[static_cast<std::size_t>(site)] == config.spin(site);
    round_trip_failures += !ok;
  }
  pass = pass && round_trip_failures == 0;
  s << "glauber 4 chains, canonical 10 chains at family-wise 3 sigma; contour round trip failures="
    << round_trip_failures << "/10000";
  return {pass, s.str()};
}

Outcome wulff_identity() {
  auto residual = [](const thermo::WulffShape& w) {
    return std::abs(w.boundary_free_energy - 2.0 * w.area) / w.boundary_free_energy;
  };
  const double tau0 = 1.7;
  const auto disc = thermo::wulff_construct(thermo::TauFunction::isotropic(tau0), 4096);
  const auto ising = thermo::wulff_construct(thermo::TauFunction::ising_reduced(0.7), 4096);
  const double tw_disc = thermo::tau_W_unit_volume(disc);
  const double tw_err = std::abs(tw_disc - 2.0 * std::sqrt(std::numbers::pi) * tau0);
  const bool pass = residual(disc) < 1e-3 && residual(ising) < 1e-3 && tw_err < 1e-4;
  std::ostringstream s;
  s << "isotropic residual=" << residual(disc) << " |tau_W-2 sqrt(pi) tau0|=" << tw_err
    << "; Ising beta=0.7 residual=" << residual(ising) << " tau_W=" << io::fmt(thermo::tau_W_unit_volume(ising));
  return {pass, s.str()};
}

// ---------------------------------------------------------------------------

harness::SweepSpec desk_sweep(std::vector<int> L, std::vector<double> delta, std::vector<double> K,
                              std::uint64_t seed) {
  harness::SweepSpec spec;
  spec.beta = 0.7;
  spec.L_list = std::move(L);
  spec.delta_grid = std::move(delta);
  spec.replicas = 32;
  spec.budget = 100;
  spec.burn_in_factor = 1000;
  spec.measure_interval = 10;
  spec.K_list = std::move(K);
  spec.seed = seed;
  spec.census = true;
  spec.lambda = true;
  // chi is a large-volume limit: measure it on the largest desk-scale box
  spec.chi_L = 128;
  spec.chi_sweeps = 80000;
  return spec;
}

Outcome phase_structure() {
  const std::vector<double> grid{0.4, 0.6, 0.8, 1.1, 1.3, 1.6};
  const auto result = harness::run_sweep(desk_sweep({128}, grid, {4.0}, 2002), progress_line);
  std::ostringstream s;
  s << "chi=" << io::fmt(result.thermo.thermo.chi.value_or(0.0)) << "; ";
  bool pass = result.records.size() == grid.size();
  std::vector<std::pair<double, double>> curve;
  for (const auto& r : result.records) {
    curve.emplace_back(r.delta, r.mean_lambda);
    s << "Delta=" << r.delta << ": " << r.mean_lambda << "+-" << r.lambda_error << "  ";
    if (r.delta <= 0.6 + 0.05) pass = pass && r.mean_lambda < 0.15;
    if (r.delta >= 1.3 - 0.05) pass = pass && r.mean_lambda > 0.55;
  }
  std::optional<double> crossing;
  for (std::size_t k = 1; k < curve.size() && !crossing; ++k) {
    const auto [d0, l0] = curve[k - 1];
    const auto [d1, l1] = curve[k];
    if (l0 < 0.4 && l1 >= 0.4) crossing = d0 + (0.4 - l0) * (d1 - d0) / (l1 - l0);
  }
  pass = pass && crossing && *crossing >= 0.7 && *crossing <= 1.2;
  s << "crossing of 0.4 at Delta=" << (crossing ? std::to_string(*crossing) : std::string("none"));
  return {pass, s.str()};
}

// Frequency of samples with at least one intermediate contour, monotone in L
// within 2 sigma and below 0.2 at the largest L.
Outcome census_property(const std::vector<harness::RunRecord>& records, double K,
                        const std::vector<int>& L_list, const std::vector<double>& grid) {
  std::ostringstream s;
  bool pass = true;
  for (double requested : grid) {
    std::vector<const harness::RunRecord*> rows;
    for (int L : L_list)
      for (const auto& r : records)
        if (r.L == L && r.K == K && std::abs(r.delta / requested - 1.0) < 0.05) rows.push_back(&r);
    if (rows.size() != L_list.size()) return {false, "missing sweep rows"};
    s << "Delta~" << requested << ":";
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double f = 1.0 - rows[k]->A.p;
      s << " L=" << rows[k]->L << " f=" << f << "+-" << rows[k]->A.error;
      if (k > 0) {
        const double prev = 1.0 - rows[k - 1]->A.p;
        const double sigma = std::hypot(rows[k]->A.error, rows[k - 1]->A.error);
        pass = pass && f <= prev + 2.0 * sigma;
      }
    }
    pass = pass && (1.0 - rows.back()->A.p) < 0.2;
    s << "; ";
  }
  return {pass, s.str()};
}

Outcome contour_census() {
  const std::vector<int> L_list{64, 128, 192};
  const std::vector<double> grid{0.6, 1.3};
  std::ostringstream s;
  std::vector<int> empty;
  for (int L : L_list) {
    const auto census = classify(std::vector<Contour>{}, L, 4.0);
    if (!census.window_valid) empty.push_back(L);
  }
  const auto result = harness::run_sweep(desk_sweep(L_list, grid, {4.0, 1.5}, 1001), progress_line);
  const auto k4 = census_property(result.records, 4.0, L_list, grid);
  const auto k15 = census_property(result.records, 1.5, L_list, grid);
  if (!empty.empty()) {
    s << "not evaluable: the K=4 window [K ln L, L^(2/3)/K] is empty at L=";
    for (std::size_t k = 0; k < empty.size(); ++k) s << (k ? "," : "") << empty[k];
    s << " so no contour can be intermediate; supplementary K=1.5 (non-empty windows) "
      << (k15.pass ? "holds" : "does not hold") << ": " << k15.detail;
    return {false, s.str()};
  }
  return {k4.pass, k4.detail};
}

Outcome phase_structureI() {
  harness::SweepSpec spec;
  spec.beta = 0.7;
  spec.L_list = {64};
  spec.v_list = {50.0, 100.0, 200.0, 300.0, 400.0};
  spec.seed = 3003;
  spec.census = false;
  spec.lambda = false;
  spec.logp = true;
  const auto result = harness::run_sweep(spec, progress_line);
  if (result.rates.size() != 1 || result.histograms.size() != 1) return {false, "no rate output"};
  std::ostringstream s;
  int within = 0;
  for (const auto& row : result.rates[0].rows) {
    if (row.skipped) {
      s << "v=" << row.v_requested << " skipped; ";
      continue;
    }
    within += std::abs(row.deviation) < 0.25;
    s << "v=" << row.v_L << " emp=" << row.empirical << " th=" << row.theory << " dev=" << row.deviation << "; ";
  }
  // regime switch: the rate grows linearly in v while lambda = 0 and flattens
  // once the droplet branch takes over
  const auto& th = result.thermo.thermo;
  const double sites = 64.0 * 64.0;
  const double v_c = theory::excess_volume_for_delta(theory::critical_delta(2), th.m_star, *th.chi, th.tau_W, sites);
  auto slope = [&](double a, double b) {
    const auto fit = harness::fit_rate(result.histograms[0], th, {a, b});
    if (fit.rows[0].skipped || fit.rows[1].skipped) return std::nan("");
    return (fit.rows[1].empirical - fit.rows[0].empirical) / (fit.rows[1].v_L - fit.rows[0].v_L);
  };
  const double below = slope(0.3 * v_c, v_c);
  const double above = slope(2.0 * v_c, 400.0);
  const bool switch_ok = below > 0.0 && above < 0.5 * below;
  s << "v_c=" << v_c << " slope below=" << below << " above=" << above;
  return {within >= 3 && switch_ok, std::to_string(within) + "/5 within 25%; " + s.str()};
}

Outcome determinism() {
  auto spec = desk_sweep({32, 48}, {0.6, 1.3}, {1.5, 4.0}, 4004);
  spec.replicas = 6;
  spec.budget = 30;
  spec.burn_in_factor = 200;
  spec.chi = 0.0273;
  auto csv = [&](int threads) {
    spec.threads = threads;
    std::ostringstream out;
    harness::write_runs_csv(out, harness::run_sweep(spec).records);
    return out.str();
  };
  const auto a = csv(1);
  const auto b = csv(1);
  const auto c = csv(3);
  std::ostringstream s;
  s << "runs.csv " << a.size() << " bytes; repeat " << (a == b ? "identical" : "differs") << ", 3 threads "
    << (a == c ? "identical" : "differs");
  return {a == b && a == c, s.str()};
}

struct Criterion {
  std::string name;
  std::string title;
  std::function<Outcome()> run;
  bool extended = false;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"theory", "theory exactness", theory_exactness},
      {"minimizer", "minimizer oracle equivalence", minimizer_oracle},
      {"sampler", "sampler correctness", sampler_correctness},
      {"wulff", "Wulff identity", wulff_identity},
      {"phase", "phase structure", phase_structure},
      {"census", "contour census", contour_census},
      {"rate", "large-deviation rate", phase_structureI, true},
      {"determinism", "determinism", determinism},
  };

  CLI::App app{"droplet acceptance criteria"};
  std::vector<std::string> selected;
  bool extended = false;
  bool list = false;
  app.add_option("criteria", selected, "criteria to run (default: all)");
  app.add_flag("--extended", extended, "also run extended criteria");
  app.add_flag("--list", list, "list criterion names");
  CLI11_PARSE(app, argc, argv);
  if (const char* env = std::getenv("DROPLET_EXTENDED_TESTS"); env && std::string(env) == "1") extended = true;

  if (list) {
    for (const auto& c : criteria) std::cout << c.name << "  " << c.title << (c.extended ? " (extended)" : "") << '\n';
    return 0;
  }
  for (const auto& name : selected)
    if (std::none_of(criteria.begin(), criteria.end(), [&](const Criterion& c) { return c.name == name; })) {
      std::cerr << "unknown criterion " << name << '\n';
      return 2;
    }

  int failed = 0;
  for (const auto& c : criteria) {
    const bool explicitly = std::find(selected.begin(), selected.end(), c.name) != selected.end();
    if (!selected.empty() && !explicitly) continue;
    if (c.extended && !extended && !explicitly) {
      std::cout << "SKIP " << c.title << ": extended criterion (set DROPLET_EXTENDED_TESTS=1)" << std::endl;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << c.title << " [" << std::fixed << std::setprecision(1) << seconds
              << std::defaultfloat << std::setprecision(6) << " s]: " << outcome.detail << std::endl;
    failed += !outcome.pass;
  }
  return failed == 0 ? 0 : 1;
}
