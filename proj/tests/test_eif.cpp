#include <doctest.h>

#include "moss/eif.hpp"
#include "moss/glm.hpp"
#include "test_support.hpp"

using namespace moss;
using moss::testing::RandomState;
using moss::testing::random_state;

namespace {

// Single-subject state used by the worked examples.
RandomState worked_example() {
  RandomState s;
  s.ds.covariate_names = {};
  s.ds.observations = {{1, {}, 1, 1, 1}};
  s.ds.t_max = 1;
  s.pred.arm = 1;
  s.pred.t_max = 1;
  s.pred.hazard = Eigen::MatrixXd::Constant(1, 1, 0.5);
  s.pred.survival = Eigen::MatrixXd::Constant(1, 1, 0.5);
  s.pred.censor_surv_left = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s.pred.censor_surv = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s.pred.g = Eigen::VectorXd::Constant(1, 0.5);
  return s;
}

}  // namespace

TEST_CASE("clever covariate hand value: ratio 0.8 over g=0.5 gives -1.6") {
  SurvivalDataset ds;
  ds.covariate_names = {};
  ds.observations = {{1, {}, 1, 2, 1}};
  ds.t_max = 2;
  // S(k=1) = 0.5, S(t'=2) = 0.4 -> ratio 0.8
  Eigen::MatrixXd survival(1, 2);
  survival << 0.5, 0.4;
  Eigen::MatrixXd censor_left = Eigen::MatrixXd::Ones(1, 2);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 0.5);
  CleverTensor tensor = clever_covariates(ds, 1, survival, censor_left, g);
  CHECK(tensor.value(0, 2) == doctest::Approx(-1.6).epsilon(1e-12));
}

TEST_CASE("clever covariates vanish off-arm and above the target time") {
  RandomState s = random_state(321);
  CleverTensor tensor =
      clever_covariates(s.ds, 1, s.pred.survival, s.pred.censor_surv_left, s.pred.g);
  REQUIRE(tensor.h.rows() > 0);
  for (Eigen::Index r = 0; r < tensor.h.rows(); ++r) {
    int i = tensor.row_subject[r];
    int k = tensor.row_k[r];
    for (int t = 1; t <= tensor.t_max; ++t) {
      if (s.ds.observations[i].a != 1) CHECK(tensor.value(r, t) == 0.0);
      if (k > t) CHECK(tensor.value(r, t) == 0.0);
      CHECK(std::isfinite(tensor.value(r, t)));
    }
  }
}

TEST_CASE("EIF hand value on the single-subject case is -1") {
  RandomState s = worked_example();
  Eigen::VectorXd psi = Eigen::VectorXd::Constant(1, 0.5);
  Eigen::MatrixXd eif = eif_matrix(s.ds, 1, s.pred.hazard, s.pred.survival,
                                   s.pred.censor_surv_left, s.pred.g, psi);
  CHECK(eif(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("off-arm subjects contribute only the centered survival term") {
  RandomState s = random_state(654);
  Eigen::VectorXd psi = s.pred.survival.colwise().mean().transpose();
  Eigen::MatrixXd eif = eif_matrix(s.ds, 1, s.pred.hazard, s.pred.survival,
                                   s.pred.censor_surv_left, s.pred.g, psi);
  for (int i = 0; i < s.ds.n(); ++i) {
    if (s.ds.observations[i].a == 1) continue;
    for (int t = 1; t <= s.pred.t_max; ++t)
      CHECK(eif(i, t - 1) ==
            doctest::Approx(s.pred.survival(i, t - 1) - psi[t - 1]).epsilon(1e-12));
  }
}

TEST_CASE("plug-in centering zeroes the mean of the D2 component") {
  RandomState s = random_state(987);
  Eigen::VectorXd psi = s.pred.survival.colwise().mean().transpose();
  Eigen::MatrixXd eif = eif_matrix(s.ds, 1, s.pred.hazard, s.pred.survival,
                                   s.pred.censor_surv_left, s.pred.g, psi);
  // subtract the martingale part computed from the tensor; the remainder is
  // D2 whose column means must vanish under plug-in centering
  CleverTensor tensor =
      clever_covariates(s.ds, 1, s.pred.survival, s.pred.censor_surv_left, s.pred.g);
  Eigen::MatrixXd d2 = eif;
  for (Eigen::Index r = 0; r < tensor.h.rows(); ++r) {
    int i = tensor.row_subject[r];
    int k = tensor.row_k[r];
    double resid = tensor.event[r] - s.pred.hazard(i, k - 1);
    for (int t = 1; t <= s.pred.t_max; ++t) d2(i, t - 1) -= tensor.value(r, t) * resid;
  }
  for (int t = 0; t < s.pred.t_max; ++t)
    CHECK(std::abs(d2.col(t).mean()) <= 1e-12);
}

TEST_CASE("eif_matrix agrees with the explicit tensor evaluation") {
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    RandomState s = random_state(seed);
    Eigen::VectorXd psi = s.pred.survival.colwise().mean().transpose();
    Eigen::MatrixXd fast = eif_matrix(s.ds, 1, s.pred.hazard, s.pred.survival,
                                      s.pred.censor_surv_left, s.pred.g, psi);
    CleverTensor tensor =
        clever_covariates(s.ds, 1, s.pred.survival, s.pred.censor_surv_left, s.pred.g);
    Eigen::MatrixXd direct(s.ds.n(), s.pred.t_max);
    for (int i = 0; i < s.ds.n(); ++i)
      for (int t = 1; t <= s.pred.t_max; ++t)
        direct(i, t - 1) = s.pred.survival(i, t - 1) - psi[t - 1];
    for (Eigen::Index r = 0; r < tensor.h.rows(); ++r) {
      int i = tensor.row_subject[r];
      int k = tensor.row_k[r];
      double resid = tensor.event[r] - s.pred.hazard(i, k - 1);
      for (int t = 1; t <= s.pred.t_max; ++t) direct(i, t - 1) += tensor.value(r, t) * resid;
    }
    CHECK((fast - direct).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("score identity: loss derivative along the submodel equals the D1 mean") {
  // the property behind the universal least favorable submodel
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    RandomState s = random_state(seed);
    const int n = s.ds.n();
    CleverTensor tensor =
        clever_covariates(s.ds, 1, s.pred.survival, s.pred.censor_surv_left, s.pred.g);
    Eigen::VectorXd offsets(tensor.h.rows());
    for (Eigen::Index r = 0; r < offsets.size(); ++r)
      offsets[r] = logit(s.pred.hazard(tensor.row_subject[r], tensor.row_k[r] - 1));

    for (int target = 1; target <= s.pred.t_max; ++target) {
      Eigen::VectorXd direction = tensor.h.col(target - 1);
      auto mean_loglik = [&](double eps) {
        return bernoulli_loglik(tensor.event, offsets + eps * direction) / n;
      };
      const double step = 1e-6;
      double fd = (mean_loglik(step) - mean_loglik(-step)) / (2.0 * step);

      double d1_mean = 0.0;
      for (Eigen::Index r = 0; r < tensor.h.rows(); ++r) {
        int i = tensor.row_subject[r];
        int k = tensor.row_k[r];
        d1_mean += tensor.value(r, target) * (tensor.event[r] - s.pred.hazard(i, k - 1));
      }
      d1_mean /= n;

      double scale = std::max(std::abs(d1_mean), 1e-8);
      CHECK(std::abs(fd - d1_mean) / scale <= 1e-5);
    }
  }
}

TEST_CASE("inverse weights: constant case and monotonicity in t") {
  RandomState s = random_state(777);
  const int n = s.ds.n();
  NuisancePredictions flat = s.pred;
  flat.g = Eigen::VectorXd::Constant(n, 0.5);
  flat.censor_surv = Eigen::MatrixXd::Ones(n, flat.t_max);
  auto rows = inverse_weight_summary(flat);
  for (const auto& r : rows) {
    CHECK(r.mean == doctest::Approx(2.0));
    CHECK(r.sd == doctest::Approx(0.0));
    CHECK(r.min == doctest::Approx(2.0));
    CHECK(r.max == doctest::Approx(2.0));
  }

  // non-increasing censoring survival makes weights non-decreasing in t
  auto rows2 = inverse_weight_summary(s.pred);
  for (std::size_t t = 1; t < rows2.size(); ++t) {
    CHECK(rows2[t].min >= rows2[t - 1].min - 1e-12);
    CHECK(rows2[t].max >= rows2[t - 1].max - 1e-12);
  }
}
