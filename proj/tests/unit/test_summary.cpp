#include <doctest.h>

#include <random>

#include <Eigen/Dense>

#include "gce/error.hpp"
#include "gce/estimate.hpp"
#include "gce/summary.hpp"

using namespace gce;

TEST_CASE("ratio with zero covariance") {
  const auto s = summarize(SummaryMap(SummarySpec::ratio()), {0.6, 0.4}, Eigen::Matrix2d::Zero());
  CHECK(s.value == doctest::Approx(1.5));
  CHECK(s.variance == 0.0);
}

TEST_CASE("difference variance is s1 + s0 - 2c") {
  Eigen::Matrix2d cov;
  cov << 0.04, 0.01, 0.01, 0.09;
  const auto s = summarize(SummaryMap(SummarySpec::difference()), {0.7, 0.2}, cov);
  CHECK(s.value == doctest::Approx(0.5));
  CHECK(s.variance == doctest::Approx(0.04 + 0.09 - 0.02));
}

TEST_CASE("ratio gradient and delta variance against Monte Carlo") {
  const SummaryMap f(SummarySpec::ratio());
  const Eigen::Vector2d lam(0.6, 0.4);
  const auto g = f.gradient(lam);
  CHECK(g(0) == doctest::Approx(2.5));
  CHECK(g(1) == doctest::Approx(-3.75));

  Eigen::Matrix2d cov;
  cov << 1e-4, -4e-5, -4e-5, 9e-5;
  const double delta = summarize(f, lam, cov).variance;
  const Eigen::Matrix2d L = cov.llt().matrixL();
  std::mt19937_64 rng(99);
  std::normal_distribution<double> z;
  const int n = 1000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d x = lam + L * Eigen::Vector2d(z(rng), z(rng));
    const double v = x(0) / x(1);
    s += v;
    s2 += v * v;
  }
  const double mc = (s2 - s * s / n) / (n - 1);
  CHECK(std::abs(mc / delta - 1.0) < 0.05);
}

TEST_CASE("custom expressions") {
  const SummaryMap f(SummarySpec::custom("log_odds", "log(u / v)", "1 / u", "-1 / v"));
  CHECK(f.value({0.6, 0.4}) == doctest::Approx(std::log(1.5)));
  CHECK_NOTHROW(f.check_gradient({0.6, 0.4}));
  const SummaryMap wrong(SummarySpec::custom("bad", "u * v", "v", "v"));
  CHECK_THROWS_AS(wrong.check_gradient({0.6, 0.4}), NumericalError);
  CHECK(Expression("-2 ^ 2 + sqrt(abs(-9)) - exp(0)")(0, 0) == doctest::Approx(-4.0 + 3.0 - 1.0));
  CHECK(Expression("2 * (u + v) / 4")(1, 3) == doctest::Approx(2.0));
  CHECK_THROWS_AS(Expression("u +"), ConfigError);
  CHECK_THROWS_AS(Expression("foo(u)"), ConfigError);
}

TEST_CASE("ratio with zero denominator is singular") {
  CHECK_THROWS_AS(SummaryMap(SummarySpec::ratio()).value({0.5, 0.0}), SingularityError);
}

TEST_CASE("df correction inflates by m/(m-p) and uses t quantiles") {
  GceEstimate e;
  e.m = 30;
  e.lambda = {0.6, 0.4};
  e.cov << 0.001 * 30, 0.0, 0.0, 0.001 * 30;
  refresh_inference(e);
  const auto c = df_correct(e, 4);
  CHECK((*c.cov_df)(0, 0) / 30.0 == doctest::Approx(0.001 * 30.0 / 26.0));
  CHECK(c.df->dof == 26.0);
  const double half = c.arms[0].ci_df->upper - c.arms[0].estimate;
  CHECK(half == doctest::Approx(t_quantile(0.975, 26) * *c.arms[0].se_df));
  CHECK_THROWS_AS(df_correct(e, 30), ConfigError);

  GceEstimate big = e;
  big.m = 10000;
  refresh_inference(big);
  const auto bc = df_correct(big, 4);
  const double ratio = (bc.arms[0].ci_df->upper - bc.arms[0].estimate) /
                       (bc.arms[0].ci.upper - bc.arms[0].estimate);
  CHECK(std::abs(ratio - 1.0) < 1e-3);
}
