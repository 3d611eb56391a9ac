#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "droplet/harness.hpp"
#include "droplet/theory.hpp"

using namespace droplet;
using namespace droplet::harness;

namespace {

thermo::IsingThermo thermo_07() {
  auto t = thermo::IsingThermo::exact(0.7, 1024);
  t.chi = 0.0175;
  return t;
}

SweepSpec small_spec() {
  SweepSpec spec;
  spec.beta = 0.7;
  spec.L_list = {16};
  spec.delta_grid = {0.5, 1.4};
  spec.replicas = 4;
  spec.budget = 10;
  spec.burn_in_factor = 50;
  spec.measure_interval = 2;
  spec.K_list = {1.0, 4.0};
  spec.chi = 0.0175;
  spec.wulff_resolution = 512;
  spec.seed = 99;
  return spec;
}

std::string runs_csv(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  write_runs_csv(out, records);
  return out.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const auto kv = io::parse_key_values(
      "# sweep\nbeta = 0.7\nL_list = 32, 64\ndelta_grid = 0.5 1.0\nreplicas: 4\nbudget = 20\n"
      "K_list = 2,4\nseed = 7\nmodes = census, logp\nchi = 0.02\n");
  const auto spec = spec_from_key_values(kv);
  CHECK(spec.beta == 0.7);
  CHECK(spec.L_list == std::vector<int>{32, 64});
  CHECK(spec.delta_grid == std::vector<double>{0.5, 1.0});
  CHECK(spec.replicas == 4);
  CHECK(spec.K_list == std::vector<double>{2.0, 4.0});
  CHECK(spec.census);
  CHECK_FALSE(spec.lambda);
  CHECK(spec.logp);
  REQUIRE(spec.chi.has_value());
  CHECK(*spec.chi == 0.02);
  spec.validate();

  const auto again = spec_from_key_values(spec_to_key_values(spec));
  CHECK(spec_to_key_values(again) == spec_to_key_values(spec));

  CHECK_THROWS_AS(spec_from_key_values(io::parse_key_values("betta = 0.7\n")), std::invalid_argument);
  CHECK_THROWS_AS(spec_from_key_values(io::parse_key_values("beta = abc\n")), std::invalid_argument);
  CHECK_THROWS_AS(io::parse_key_values("beta = 0.7\nbeta = 0.8\n"), std::invalid_argument);
  CHECK_THROWS_AS(spec_from_key_values(io::parse_key_values("modes = census, bogus\n")), std::invalid_argument);
}

TEST_CASE("sweep validation") {
  auto spec = small_spec();
  spec.validate();
  auto bad = spec;
  bad.budget = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.replicas = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.v_list = {10.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.delta_grid = {-0.5};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.beta = 0.4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  // the K = 4 window is empty at L = 16: reported, not rejected
  const auto warnings = spec.warnings();
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("K=4") != std::string::npos);
}

TEST_CASE("planning") {
  const auto th = thermo_07();
  SweepSpec spec = small_spec();
  spec.L_list = {64, 128};
  spec.delta_grid = {0.3, 0.6, 1.2, 2.4, 1e6};
  const auto plan = plan_sweep(spec, th);
  REQUIRE(plan.size() == 10);
  for (const auto& p : plan) {
    CHECK(p.index == static_cast<std::size_t>(&p - plan.data()));
    if (p.rejected) continue;
    const double sites = static_cast<double>(p.L) * p.L;
    CHECK(theory::delta_ising(th.m_star, *th.chi, th.tau_W, p.constraint.v_L, sites) == p.delta);
    CHECK(std::abs(p.delta / p.requested - 1.0) < 0.05);
    CHECK((static_cast<long>(sites) - p.constraint.target_M) % 2 == 0);
  }
  CHECK(plan[4].rejected.has_value());
  CHECK(plan[9].rejected.has_value());
  // doubling Delta multiplies the ideal excess by 2^{2/3}
  const double sites = 128.0 * 128.0;
  const double v1 = theory::excess_volume_for_delta(0.6, th.m_star, *th.chi, th.tau_W, sites);
  const double v2 = theory::excess_volume_for_delta(1.2, th.m_star, *th.chi, th.tau_W, sites);
  CHECK(v2 / v1 == doctest::Approx(std::pow(2.0, 2.0 / 3.0)).epsilon(1e-12));
  CHECK(std::abs(plan[7].constraint.v_L / plan[6].constraint.v_L - std::pow(2.0, 2.0 / 3.0)) < 2.0 / v1);

  auto no_chi = th;
  no_chi.chi.reset();
  CHECK_THROWS(plan_sweep(spec, no_chi));
}

TEST_CASE("replicas are deterministic and aggregation is order independent") {
  const auto th = thermo_07();
  const auto spec = small_spec();
  const auto plan = plan_sweep(spec, th);
  const auto options = run_options(spec);
  const auto& point = plan[1];

  const auto a = run_replica(point, options, 0);
  const auto b = run_replica(point, options, 0);
  REQUIRE(a.per_K.size() == 2);
  for (std::size_t i = 0; i < a.per_K[0].size(); ++i) {
    CHECK(a.per_K[0][i].lambda_hat == b.per_K[0][i].lambda_hat);
    CHECK(a.per_K[0][i].census.n_small == b.per_K[0][i].census.n_small);
  }
  CHECK(a.init == InitMode::random);
  CHECK(run_replica(point, options, 1).init == InitMode::block);

  std::vector<ReplicaResult> replicas;
  for (int r = 0; r < 4; ++r) replicas.push_back(run_replica(point, options, r));
  const auto forward = runs_csv(aggregate(point, th, options, replicas));
  std::reverse(replicas.begin(), replicas.end());
  CHECK(runs_csv(aggregate(point, th, options, replicas)) == forward);
  std::swap(replicas[0], replicas[2]);
  CHECK(runs_csv(aggregate(point, th, options, replicas)) == forward);

  auto threaded = options;
  threaded.threads = 3;
  CHECK(runs_csv(run_point(point, th, threaded)) == forward);

  auto zero = options;
  zero.budget = 0;
  CHECK_THROWS_AS(run_replica(point, zero, 0), std::invalid_argument);
  CHECK_THROWS_AS(run_point(point, th, zero), std::invalid_argument);
  CHECK_THROWS(aggregate(point, th, options, {}));

  for (const auto& r : aggregate(point, th, options, replicas)) {
    CHECK(std::abs(r.recomputed_delta() - r.delta) <= 1e-12 * r.delta);
    CHECK(r.samples == 40);
    CHECK(r.coherent);
  }
}

TEST_CASE("rate fit") {
  const auto th = thermo_07();
  MagnetizationHistogram h;
  h.L = 64;
  h.beta = 0.7;
  h.M_min = 3800;
  h.M_max = 4096;
  for (long M = h.M_min; M <= h.M_max; M += 2) {
    h.logp.push_back(-0.001 * static_cast<double>((3990 - M) * (3990 - M)) - 3.0);
    h.log_weight.push_back(0.0);
    h.visits.push_back(1);
  }
  const auto fit = fit_rate(h, th, {5.0, 20.0, 0.0, 5000.0});
  REQUIRE(fit.rows.size() == 4);
  for (int i : {0, 1}) {
    const auto& row = fit.rows[static_cast<std::size_t>(i)];
    REQUIRE_FALSE(row.skipped.has_value());
    CHECK(row.delta < theory::critical_delta(2));
    CHECK(row.theory == doctest::Approx(th.tau_W * row.delta).epsilon(1e-12));
    CHECK(row.lambda_star == 0.0);
    const auto bin = *h.bin_of(row.target_M);
    CHECK(row.empirical == doctest::Approx(-h.mode_referenced_logp()[bin] / std::sqrt(row.v_L)));
    CHECK(row.deviation == doctest::Approx(row.empirical / row.theory - 1.0));
  }
  CHECK(fit.rows[2].skipped.has_value());
  CHECK(fit.rows[3].skipped.has_value());
}

TEST_CASE("histogram CSV round trip") {
  MagnetizationHistogram h;
  h.L = 4;
  h.beta = 0.65;
  h.M_min = -4;
  h.M_max = 4;
  h.logp = {-3.25, -1.0 / 3.0, -0.1, 0.0, -1e-17};
  h.log_weight = {1.5, 0.25, -2.0, 0.0, 3.0};
  h.visits = {1, 20, 300, 4000, 50000};
  h.converged = true;
  h.refinement_passes = 17;
  h.final_ln_f = 7.450580596923828e-09;
  std::stringstream buffer;
  write_histogram_csv(buffer, h);
  const auto back = read_histogram_csv(buffer);
  CHECK(back.L == 4);
  CHECK(back.beta == 0.65);
  CHECK(back.M_min == -4);
  CHECK(back.M_max == 4);
  CHECK(back.logp == h.logp);
  CHECK(back.log_weight == h.log_weight);
  CHECK(back.visits == h.visits);
  CHECK(back.converged);
  CHECK(back.refinement_passes == 17);
  CHECK(back.final_ln_f == h.final_ln_f);
  CHECK(back.unvisited_bins() == 0);
  h.visits[1] = 0;
  CHECK(h.unvisited_bins() == 1);
  std::stringstream bad("# L=4\nM,logp,log_weight,visits\n0,0,0,1\n4,0,0,1\n");
  CHECK_THROWS(read_histogram_csv(bad));
}

TEST_CASE("sweep outputs are byte-identical across invocations") {
  const auto dir = std::filesystem::temp_directory_path() / "droplet_test_harness";
  std::filesystem::remove_all(dir);
  auto spec = small_spec();
  spec.logp = true;
  spec.logp_production_sweeps = 200;
  spec.threads = 1;
  const auto first = run_sweep(spec);
  write_outputs((dir / "a").string(), first);
  spec.threads = 4;
  write_outputs((dir / "b").string(), run_sweep(spec));
  for (const char* name : {"runs.csv", "rate.csv", "logp_L16.csv", "summary.json"}) {
    INFO(name);
    const auto a = io::read_file((dir / "a" / name).string());
    CHECK_FALSE(a.empty());
    if (std::string(name) != "summary.json") CHECK(a == io::read_file((dir / "b" / name).string()));
  }
  CHECK(first.records.size() == 4);
  CHECK(std::any_of(first.flags.begin(), first.flags.end(),
                    [](const std::string& f) { return f.find("window empty") != std::string::npos; }));
  const auto summary = io::read_file((dir / "a" / "summary.json").string());
  CHECK(summary.find("\"version\"") != std::string::npos);
  CHECK(summary.find("\"burn_in_factor\"") != std::string::npos);

  // the census window only matters when censuses are taken
  spec.census = false;
  spec.lambda = false;
  const auto logp_only = run_sweep(spec);
  CHECK(logp_only.records.empty());
  CHECK(logp_only.rates.size() == 1);
  CHECK(std::none_of(logp_only.flags.begin(), logp_only.flags.end(),
                     [](const std::string& f) { return f.find("window empty") != std::string::npos; }));
  std::filesystem::remove_all(dir);
}

TEST_CASE("no droplet deep below criticality at L=64") {
  auto spec = small_spec();
  spec.L_list = {64};
  spec.delta_grid = {0.5};
  spec.replicas = 16;
  spec.budget = 20;
  spec.burn_in_factor = 200;
  spec.measure_interval = 10;
  spec.K_list = {4.0};
  const auto result = run_sweep(spec);
  REQUIRE(result.records.size() == 1);
  MESSAGE("mean lambda at Delta=0.5: " << result.records[0].mean_lambda);
  CHECK(result.records[0].mean_lambda < 0.1);
}
