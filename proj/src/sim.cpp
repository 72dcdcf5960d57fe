#include "moss/sim.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "moss/csvio.hpp"
#include "moss/parallel.hpp"
#include "moss/rng.hpp"

namespace moss::sim {

using nlohmann::json;

SurvivalDataset simulate(const DgpConfig& cfg, std::uint64_t stream) {
  if (cfg.n < 1) throw config_error("simulate: n must be positive");
  std::mt19937_64 engine = substream(cfg.seed, stream);
  std::uniform_real_distribution<double> unif(0.0, cfg.w_upper);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  SurvivalDataset ds;
  ds.covariate_names = {"W"};
  ds.observations.reserve(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    double w = unif(engine);
    double p_treat = cfg.treat_base + cfg.treat_bump * (w > cfg.treat_threshold ? 1.0 : 0.0);
    int a = coin(engine) < p_treat ? 1 : 0;
    double mu = cfg.log_mu_intercept + cfg.log_mu_w * w + cfg.log_mu_a * a;
    double t_cont = std::exp(mu + cfg.log_sigma * normal(engine));
    double shape = cfg.weibull_shape_base + cfg.weibull_shape_w * w;
    std::weibull_distribution<double> weibull(shape, cfg.weibull_scale);
    double c_cont = std::max(weibull(engine), 1e-9);

    Observation o;
    o.id = i + 1;
    o.w = {w};
    o.a = a;
    o.t_tilde = static_cast<int>(std::min(std::ceil(t_cont), std::ceil(c_cont)));
    o.t_tilde = std::max(o.t_tilde, 1);
    o.delta = t_cont <= c_cont ? 1 : 0;
    ds.observations.push_back(std::move(o));
  }
  ds.t_max = 0;
  for (const auto& o : ds.observations) ds.t_max = std::max(ds.t_max, o.t_tilde);
  if (ds.t_max > cfg.t_max_cap) {
    ds = preprocess(ds, cfg.t_max_cap, 1);
    ds.preprocess_applied.reset();  // cap is part of the DGP, not user preprocessing
  }
  ds.validate();
  return ds;
}

Eigen::VectorXd oracle_curve(const DgpConfig& cfg, int arm, int t_max, int draws,
                             std::uint64_t seed) {
  std::mt19937_64 engine = substream(seed, static_cast<std::uint64_t>(arm));
  std::uniform_real_distribution<double> unif(0.0, cfg.w_upper);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<long long> above(t_max, 0);
  for (int d = 0; d < draws; ++d) {
    double w = unif(engine);
    double mu = cfg.log_mu_intercept + cfg.log_mu_w * w + cfg.log_mu_a * arm;
    double t_cont = std::exp(mu + cfg.log_sigma * normal(engine));
    // integer grid: ceil(T) > t iff T > t
    int first_not_above = static_cast<int>(std::floor(t_cont));  // T > t for t <= this
    int upto = std::min(first_not_above, t_max);
    for (int t = 1; t <= upto; ++t) ++above[t - 1];
  }
  Eigen::VectorXd psi(t_max);
  for (int t = 0; t < t_max; ++t) psi[t] = static_cast<double>(above[t]) / draws;
  return psi;
}

double oracle_closed_form(const DgpConfig& cfg, int arm, double t) {
  // P(exp(mu_0 + mu_w W + mu_a a) > t) for W ~ Unif(0, w_upper), sigma -> 0
  double boundary = (cfg.log_mu_intercept + cfg.log_mu_a * arm - std::log(t)) /
                    (-cfg.log_mu_w * cfg.w_upper);
  return std::clamp(boundary, 0.0, 1.0);
}

SimBases SimBases::well_specified() {
  SimBases b;
  b.hazard.terms = {BasisTerm::log_time(), BasisTerm::treatment(), BasisTerm::covariate("W")};
  b.censor.terms = {BasisTerm::log_time(), BasisTerm::treatment(), BasisTerm::covariate("W")};
  b.propensity.terms = {BasisTerm::indicator("W", 0.75)};
  return b;
}

CurveEstimate run_method(const std::string& method, const SurvivalDataset& ds,
                         const NuisancePredictions& pred, OneStepOptions onestep,
                         IterativeTmleOptions iterative) {
  if (method == "km") return kaplan_meier(ds, pred.arm);
  if (method == "plugin") return plugin_curve(pred);
  if (method == "ipcw") return ipcw(pred, ds);
  if (method == "ee") return ee(pred, ds);
  if (method == "tmle") return tmle_curve_iterative(pred, ds, iterative);
  if (method == "moss-l2") {
    onestep.penalty = Penalty::L2;
    return tmle_one_step(pred, ds, onestep);
  }
  if (method == "moss-l1") {
    onestep.penalty = Penalty::L1;
    return tmle_one_step(pred, ds, onestep);
  }
  throw config_error("unknown method: " + method);
}

namespace {

// Pairwise summation over rep-ordered values; deterministic reduction.
double pairwise_sum(const std::vector<double>& values, std::size_t lo, std::size_t hi) {
  if (hi - lo <= 4) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += values[i];
    return s;
  }
  std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(values, lo, mid) + pairwise_sum(values, mid, hi);
}

double pairwise_mean(const std::vector<double>& values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return pairwise_sum(values, 0, values.size()) / static_cast<double>(values.size());
}

}  // namespace

StudyReport run_study(const StudyConfig& cfg) {
  if (cfg.reps < 2) throw config_error("run_study: reps must be >= 2");
  auto t0 = std::chrono::steady_clock::now();

  StudyReport report;
  report.reps = cfg.reps;
  report.t_max = cfg.dgp.t_max_cap;
  for (int arm : cfg.arms)
    report.oracle[arm] = oracle_curve(cfg.dgp, arm, report.t_max);

  // per (method, arm): reps x t_max curve store; NaN marks a failed rep
  const int n_methods = static_cast<int>(cfg.methods.size());
  const int n_arms = static_cast<int>(cfg.arms.size());
  std::vector<Eigen::MatrixXd> curves(
      static_cast<std::size_t>(n_methods * n_arms),
      Eigen::MatrixXd::Constant(cfg.reps, report.t_max,
                                std::numeric_limits<double>::quiet_NaN()));
  std::vector<std::vector<char>> monotone(static_cast<std::size_t>(n_methods * n_arms),
                                          std::vector<char>(cfg.reps, 0));
  std::vector<std::vector<char>> failed(static_cast<std::size_t>(n_methods * n_arms),
                                        std::vector<char>(cfg.reps, 0));

  parallel_for(cfg.reps, cfg.threads, [&](int rep) {
    SurvivalDataset ds = simulate(cfg.dgp, static_cast<std::uint64_t>(rep));
    NuisanceFit fit;
    bool fit_ok = true;
    try {
      fit = fit_nuisance(ds, cfg.bases.hazard, cfg.bases.censor, cfg.bases.propensity);
    } catch (const std::exception&) {
      fit_ok = false;
    }
    for (int ai = 0; ai < n_arms; ++ai) {
      NuisancePredictions pred;
      if (fit_ok) pred = predict_matrices(fit, ds, cfg.arms[ai]);
      for (int mi = 0; mi < n_methods; ++mi) {
        std::size_t slot = static_cast<std::size_t>(mi * n_arms + ai);
        if (!fit_ok) {
          failed[slot][rep] = 1;
          continue;
        }
        try {
          CurveEstimate est =
              run_method(cfg.methods[mi], ds, pred, cfg.onestep, cfg.iterative);
          // pad to the analysis grid: survival is flat beyond the last
          // observed time of this replicate
          for (int t = 1; t <= report.t_max; ++t) {
            int src = std::min(t, static_cast<int>(est.psi.size()));
            curves[slot](rep, t - 1) = est.psi[src - 1];
          }
          monotone[slot][rep] = est.monotone() ? 1 : 0;
        } catch (const std::exception&) {
          failed[slot][rep] = 1;
        }
      }
    }
  });

  // metrics; MSE of the iterative TMLE feeds the relative-efficiency column
  std::map<std::pair<int, int>, std::vector<double>> iter_mse;  // (arm, t) -> [mse]
  auto metrics_for = [&](std::size_t slot, int arm, int t) {
    std::vector<double> values;
    values.reserve(cfg.reps);
    for (int rep = 0; rep < cfg.reps; ++rep)
      if (!failed[slot][rep]) values.push_back(curves[slot](rep, t - 1));
    double oracle_t = report.oracle.at(arm)[t - 1];
    double mean = pairwise_mean(values);
    std::vector<double> sq(values.size()), err(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      sq[i] = (values[i] - mean) * (values[i] - mean);
      err[i] = (values[i] - oracle_t) * (values[i] - oracle_t);
    }
    StudyMetricsRow row;
    row.arm = arm;
    row.t = t;
    row.bias = mean - oracle_t;
    row.variance = pairwise_mean(sq);
    row.mse = pairwise_mean(err);
    return row;
  };

  for (int ai = 0; ai < n_arms; ++ai) {
    int arm = cfg.arms[ai];
    for (int mi = 0; mi < n_methods; ++mi) {
      if (cfg.methods[mi] != "tmle") continue;
      std::size_t slot = static_cast<std::size_t>(mi * n_arms + ai);
      for (int t = 1; t <= report.t_max; ++t)
        iter_mse[{arm, t}] = {metrics_for(slot, arm, t).mse};
    }
  }

  for (int mi = 0; mi < n_methods; ++mi) {
    for (int ai = 0; ai < n_arms; ++ai) {
      int arm = cfg.arms[ai];
      std::size_t slot = static_cast<std::size_t>(mi * n_arms + ai);
      int n_failed = 0;
      int n_mono = 0, n_ok = 0;
      for (int rep = 0; rep < cfg.reps; ++rep) {
        if (failed[slot][rep]) {
          ++n_failed;
        } else {
          ++n_ok;
          n_mono += monotone[slot][rep];
        }
      }
      report.failures[{cfg.methods[mi], arm}] = n_failed;
      report.monotone_fraction[{cfg.methods[mi], arm}] =
          n_ok > 0 ? static_cast<double>(n_mono) / n_ok : 0.0;
      for (int t = 1; t <= report.t_max; ++t) {
        StudyMetricsRow row = metrics_for(slot, arm, t);
        row.method = cfg.methods[mi];
        auto it = iter_mse.find({arm, t});
        row.re = (it != iter_mse.end() && row.mse > 0.0)
                     ? it->second[0] / row.mse
                     : std::numeric_limits<double>::quiet_NaN();
        report.rows.push_back(std::move(row));
      }
    }
  }

  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void StudyReport::write_csv(const std::string& path, int arm) const {
  CsvWriter out(path);
  out.row({"method", "t", "bias", "var", "mse", "re"});
  for (const auto& r : rows) {
    if (r.arm != arm) continue;
    out.row({r.method, std::to_string(r.t), fmt_num(r.bias), fmt_num(r.variance),
             fmt_num(r.mse), fmt_num(r.re)});
  }
}

std::string StudyReport::to_json() const {
  json j;
  j["reps"] = reps;
  j["t_max"] = t_max;
  j["runtime_seconds"] = runtime_seconds;
  json jrows = json::array();
  for (const auto& r : rows) {
    jrows.push_back({{"method", r.method},
                     {"arm", r.arm},
                     {"t", r.t},
                     {"bias", r.bias},
                     {"var", r.variance},
                     {"mse", r.mse},
                     {"re", std::isnan(r.re) ? json() : json(r.re)}});
  }
  j["metrics"] = jrows;
  json jmono = json::array();
  for (const auto& [key, frac] : monotone_fraction)
    jmono.push_back({{"method", key.first}, {"arm", key.second}, {"monotone_fraction", frac}});
  j["monotonicity"] = jmono;
  json jfail = json::array();
  for (const auto& [key, count] : failures)
    jfail.push_back({{"method", key.first}, {"arm", key.second}, {"failures", count}});
  j["failures"] = jfail;
  json joracle;
  for (const auto& [arm, psi] : oracle) {
    std::vector<double> v(psi.data(), psi.data() + psi.size());
    joracle[std::to_string(arm)] = v;
  }
  j["oracle"] = joracle;
  return j.dump(2);
}

void MonotonicityTable::write_csv(const std::string& path) const {
  CsvWriter out(path);
  std::vector<std::string> header = {"n"};
  header.insert(header.end(), methods.begin(), methods.end());
  out.row(header);
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    std::vector<std::string> fields = {std::to_string(sizes[si])};
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
      fields.push_back(fmt_num(percentage[si][mi]));
    out.row(fields);
  }
}

MonotonicityTable monotonicity_experiment(const SurvivalDataset& ds, std::vector<int> sizes,
                                          int reps, std::vector<std::string> methods,
                                          std::uint64_t seed, const SimBases& bases, int arm,
                                          OneStepOptions onestep, IterativeTmleOptions iterative,
                                          int threads) {
  for (int s : sizes)
    if (s < 2 || s > ds.n()) throw config_error("subsample size outside 2..n");

  MonotonicityTable table;
  table.sizes = sizes;
  table.methods = methods;
  table.percentage.assign(sizes.size(), std::vector<double>(methods.size(), 0.0));

  const int jobs = static_cast<int>(sizes.size()) * reps;
  std::vector<std::vector<char>> mono(static_cast<std::size_t>(jobs),
                                      std::vector<char>(methods.size(), 0));
  std::vector<char> usable(static_cast<std::size_t>(jobs), 0);

  parallel_for(jobs, threads, [&](int job) {
    int si = job / reps;
    int size = sizes[si];
    std::mt19937_64 engine = substream(seed, static_cast<std::uint64_t>(job));

    // partial Fisher-Yates draw of `size` subject indices
    std::vector<int> idx(ds.n());
    for (int i = 0; i < ds.n(); ++i) idx[i] = i;
    for (int i = 0; i < size; ++i) {
      std::uniform_int_distribution<int> pick(i, ds.n() - 1);
      std::swap(idx[i], idx[pick(engine)]);
    }
    SurvivalDataset sub;
    sub.covariate_names = ds.covariate_names;
    for (int i = 0; i < size; ++i) {
      Observation o = ds.observations[idx[i]];
      o.id = i + 1;
      sub.observations.push_back(std::move(o));
    }
    sub.t_max = 0;
    for (const auto& o : sub.observations) sub.t_max = std::max(sub.t_max, o.t_tilde);

    try {
      NuisanceFit fit = fit_nuisance(sub, bases.hazard, bases.censor, bases.propensity);
      NuisancePredictions pred = predict_matrices(fit, sub, arm);
      for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        CurveEstimate est = run_method(methods[mi], sub, pred, onestep, iterative);
        mono[job][mi] = est.monotone() ? 1 : 0;
      }
      usable[job] = 1;
    } catch (const std::exception&) {
      usable[job] = 0;
    }
  });

  for (std::size_t si = 0; si < sizes.size(); ++si) {
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      int ok = 0, m = 0;
      for (int rep = 0; rep < reps; ++rep) {
        int job = static_cast<int>(si) * reps + rep;
        if (!usable[job]) continue;
        ++ok;
        m += mono[job][mi];
      }
      table.percentage[si][mi] = ok > 0 ? 100.0 * m / ok : 0.0;
    }
  }
  return table;
}

}  // namespace moss::sim
