#include <doctest.h>

#include "moss/errors.hpp"
#include "moss/inference.hpp"

using namespace moss;

namespace {

// n rows alternating +/-1 per column with sign patterns making the
// uncentered covariance exactly the identity.
Eigen::MatrixXd orthogonal_unit_eif(int n) {
  Eigen::MatrixXd eif(n, 2);
  for (int i = 0; i < n; ++i) {
    eif(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
    eif(i, 1) = (i / 2) % 2 == 0 ? 1.0 : -1.0;
  }
  return eif;
}

}  // namespace

TEST_CASE("normal quantile reference values") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.84) == doctest::Approx(0.9944578832097532).epsilon(1e-10));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
}

TEST_CASE("pointwise interval arithmetic") {
  const int n = 100;
  Eigen::MatrixXd eif(n, 1);
  for (int i = 0; i < n; ++i) eif(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;  // sigma = 1
  Eigen::VectorXd psi = Eigen::VectorXd::Constant(1, 0.5);
  BandResult band = pointwise_ci(eif, psi, 0.05);
  CHECK(band.se[0] == doctest::Approx(0.1));
  CHECK(band.hi_pw[0] - psi[0] == doctest::Approx(0.1959963984540054).epsilon(1e-12));

  BandResult one_sigma = pointwise_ci(eif, psi, 0.32);
  CHECK(one_sigma.hi_pw[0] - psi[0] == doctest::Approx(0.09944578832097532).epsilon(1e-9));
}

TEST_CASE("zero influence values give zero-width intervals") {
  Eigen::MatrixXd eif = Eigen::MatrixXd::Zero(50, 3);
  Eigen::VectorXd psi = Eigen::VectorXd::Constant(3, 0.7);
  BandResult band = simultaneous_band(eif, psi, 0.05, 2000, 7);
  for (int t = 0; t < 3; ++t) {
    CHECK(band.lo_pw[t] == doctest::Approx(0.7));
    CHECK(band.hi_simul[t] == doctest::Approx(0.7));
  }
}

TEST_CASE("simultaneous quantile: single time point reduces to the normal") {
  const int n = 200;
  Eigen::MatrixXd eif(n, 1);
  for (int i = 0; i < n; ++i) eif(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
  Eigen::VectorXd psi = Eigen::VectorXd::Constant(1, 0.5);
  BandResult band = simultaneous_band(eif, psi, 0.05, 10000, 11);
  CHECK(band.simultaneous_quantile == doctest::Approx(1.96).epsilon(0.02));
}

TEST_CASE("simultaneous quantile: independent pair needs 2.236") {
  Eigen::MatrixXd eif = orthogonal_unit_eif(400);
  Eigen::VectorXd psi = Eigen::VectorXd::Constant(2, 0.5);
  BandResult band = simultaneous_band(eif, psi, 0.05, 20000, 13);
  CHECK(band.simultaneous_quantile == doctest::Approx(2.2360).epsilon(0.025));
  CHECK(band.simultaneous_quantile >= band.pointwise_quantile - 0.03);
}

TEST_CASE("perfectly correlated columns fall back to the pointwise quantile") {
  const int n = 300;
  Eigen::MatrixXd eif(n, 4);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < 4; ++t) eif(i, t) = (i % 2 == 0) ? 0.8 : -0.8;
  Eigen::VectorXd psi = Eigen::VectorXd::Constant(4, 0.4);
  BandResult band = simultaneous_band(eif, psi, 0.05, 10000, 17);
  CHECK(band.simultaneous_quantile == doctest::Approx(1.96).epsilon(0.02));
}

TEST_CASE("degenerate time points keep zero width without breaking the band") {
  const int n = 100;
  Eigen::MatrixXd eif(n, 3);
  for (int i = 0; i < n; ++i) {
    eif(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;
    eif(i, 1) = 0.0;  // everyone survives here
    eif(i, 2) = (i % 2 == 0) ? -0.5 : 0.5;
  }
  Eigen::VectorXd psi = Eigen::VectorXd::Constant(3, 0.9);
  BandResult band = simultaneous_band(eif, psi, 0.05, 5000, 23);
  CHECK(band.se[1] == doctest::Approx(0.0));
  CHECK(band.lo_simul[1] == doctest::Approx(0.9));
  CHECK(std::isfinite(band.simultaneous_quantile));
}

TEST_CASE("band is deterministic for a seed and independent of the thread count") {
  Eigen::MatrixXd eif = orthogonal_unit_eif(128);
  Eigen::VectorXd psi = Eigen::VectorXd::Constant(2, 0.6);
  BandResult serial = simultaneous_band(eif, psi, 0.05, 4000, 31, 1);
  BandResult threaded = simultaneous_band(eif, psi, 0.05, 4000, 31, 4);
  CHECK(serial.simultaneous_quantile == threaded.simultaneous_quantile);
  BandResult repeat = simultaneous_band(eif, psi, 0.05, 4000, 31, 2);
  CHECK(serial.simultaneous_quantile == repeat.simultaneous_quantile);
}

TEST_CASE("simultaneous band contains the pointwise band") {
  Eigen::MatrixXd eif = orthogonal_unit_eif(256);
  Eigen::VectorXd psi(2);
  psi << 0.8, 0.6;
  BandResult band = simultaneous_band(eif, psi, 0.05, 10000, 37);
  double mc_slack = 3.0 / std::sqrt(10000.0);
  for (int t = 0; t < 2; ++t) {
    CHECK(band.lo_simul[t] <= band.lo_pw[t] + mc_slack * band.se[t]);
    CHECK(band.hi_simul[t] >= band.hi_pw[t] - mc_slack * band.se[t]);
  }
}

TEST_CASE("tiny samples are rejected") {
  Eigen::MatrixXd eif(1, 2);
  eif << 1.0, 2.0;
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(pointwise_ci(eif, psi, 0.05), data_error);
}
