#include <doctest.h>

#include <cmath>

#include "moss/sim.hpp"

using namespace moss;
using namespace moss::sim;

TEST_CASE("simulated covariates and treatment match the generating display") {
  DgpConfig cfg;
  cfg.n = 100000;
  cfg.seed = 31;
  SurvivalDataset ds = simulate(cfg);
  REQUIRE(ds.n() == cfg.n);

  int hi = 0, hi_treated = 0, lo = 0, lo_treated = 0;
  for (const auto& o : ds.observations) {
    CHECK(o.w[0] >= 0.0);
    CHECK(o.w[0] <= 1.5);
    if (o.w[0] > 0.75) {
      ++hi;
      hi_treated += o.a;
    } else {
      ++lo;
      lo_treated += o.a;
    }
  }
  double se_hi = std::sqrt(0.9 * 0.1 / hi);
  double se_lo = std::sqrt(0.4 * 0.6 / lo);
  CHECK(std::abs(static_cast<double>(hi_treated) / hi - 0.9) <= 3 * se_hi);
  CHECK(std::abs(static_cast<double>(lo_treated) / lo - 0.4) <= 3 * se_lo);
}

TEST_CASE("failure times concentrate at exp(mu) for tiny sigma") {
  DgpConfig cfg;
  cfg.n = 100000;
  cfg.seed = 32;
  SurvivalDataset ds = simulate(cfg);
  // treated subjects with W near 0 have T near e^3 ~ 20.09
  int checked = 0;
  for (const auto& o : ds.observations) {
    if (o.a == 1 && o.w[0] < 0.02 && o.delta == 1) {
      CHECK(o.t_tilde >= 20);
      CHECK(o.t_tilde <= 21);
      ++checked;
    }
  }
  CHECK(checked > 50);
  CHECK(ds.t_max <= cfg.t_max_cap);
}

TEST_CASE("oracle curve values and support boundaries") {
  DgpConfig cfg;
  Eigen::VectorXd psi1 = oracle_curve(cfg, 1, 21);
  Eigen::VectorXd psi0 = oracle_curve(cfg, 0, 21);

  CHECK(psi1[9] == doctest::Approx(0.4649).epsilon(0.005));  // (3 - ln 10)/1.5
  for (int t = 1; t <= 4; ++t) CHECK(psi1[t - 1] == doctest::Approx(1.0));
  for (int t = 8; t <= 21; ++t) CHECK(psi0[t - 1] == doctest::Approx(0.0));

  // closed form stays within MC tolerance everywhere
  for (int arm : {0, 1}) {
    Eigen::VectorXd psi = arm == 1 ? psi1 : psi0;
    for (int t = 1; t <= 21; ++t)
      CHECK(std::abs(psi[t - 1] - oracle_closed_form(cfg, arm, t)) <= 0.002);
  }

  // monotone from 1 to 0
  for (int arm : {0, 1}) {
    Eigen::VectorXd psi = arm == 1 ? psi1 : psi0;
    CHECK(psi[0] == doctest::Approx(1.0));
    CHECK(psi[20] <= 0.01);
    for (int t = 1; t < 21; ++t) CHECK(psi[t] <= psi[t - 1] + 1e-12);
  }
}

TEST_CASE("study metrics satisfy the population identity and determinism") {
  StudyConfig cfg;
  cfg.dgp.n = 150;
  cfg.dgp.seed = 99;
  cfg.reps = 8;
  cfg.methods = {"km", "plugin", "tmle", "moss-l2"};
  cfg.arms = {1};
  StudyReport report = run_study(cfg);

  REQUIRE_FALSE(report.rows.empty());
  for (const auto& row : report.rows) {
    CHECK(std::abs(row.mse - (row.bias * row.bias + row.variance)) <= 1e-12);
    if (row.method == "tmle") CHECK(row.re == doctest::Approx(1.0));
  }
  CHECK(report.monotone_fraction.at({"moss-l2", 1}) == doctest::Approx(1.0));
  CHECK(report.monotone_fraction.at({"km", 1}) == doctest::Approx(1.0));

  cfg.threads = 3;
  StudyReport threaded = run_study(cfg);
  REQUIRE(threaded.rows.size() == report.rows.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    CHECK(threaded.rows[i].bias == report.rows[i].bias);
    CHECK(threaded.rows[i].mse == report.rows[i].mse);
  }
}

TEST_CASE("monotonicity experiment: guaranteed rows at 100 percent") {
  DgpConfig dgp;
  dgp.n = 400;
  dgp.seed = 7;
  SurvivalDataset ds = simulate(dgp);
  MonotonicityTable table = monotonicity_experiment(ds, {60, 120}, 12, {"km", "moss-l2", "ee"},
                                                    5, SimBases::well_specified());
  REQUIRE(table.percentage.size() == 2);
  for (std::size_t si = 0; si < table.sizes.size(); ++si) {
    CHECK(table.percentage[si][0] == doctest::Approx(100.0));  // km
    CHECK(table.percentage[si][1] == doctest::Approx(100.0));  // moss-l2
    CHECK(table.percentage[si][2] <= 100.0);                   // ee unconstrained
  }
}

TEST_CASE("unknown method tags are rejected") {
  DgpConfig dgp;
  dgp.n = 60;
  SurvivalDataset ds = simulate(dgp);
  NuisanceFit fit = fit_nuisance(ds, SimBases::well_specified().hazard,
                                 SimBases::well_specified().censor,
                                 SimBases::well_specified().propensity);
  NuisancePredictions pred = predict_matrices(fit, ds, 1);
  CHECK_THROWS_AS(run_method("bogus", ds, pred), config_error);
}
