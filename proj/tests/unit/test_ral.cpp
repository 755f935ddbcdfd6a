#include <doctest.h>

#include <cmath>
#include <random>

#include "rode/error.hpp"
#include "rode/ral.hpp"

using namespace rode;

TEST_CASE("well-separated losses recover both means") {
  const double losses[] = {0.09, 0.10, 0.11, 0.89, 0.90, 0.91};
  const GmmParams g = fit_gmm_2(losses, RalConfig{});
  CHECK(std::abs(g.means[0] - 0.10) <= 0.02);
  CHECK(std::abs(g.means[1] - 0.90) <= 0.02);
  CHECK(g.weights[0] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("two points are a fixed point") {
  const double losses[] = {0.0, 1.0};
  const GmmParams g = fit_gmm_2(losses, RalConfig{});
  CHECK(g.means[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(g.means[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g.weights[0] == doctest::Approx(0.5));
  CHECK(g.weights[1] == doctest::Approx(0.5));
}

TEST_CASE("the clean component is the lower mean") {
  const double losses[] = {5.0, 5.1, 4.9, 1.0, 1.2, 0.8, 1.1};
  const GmmParams g = fit_gmm_2(losses, RalConfig{});
  CHECK(g.means[0] < g.means[1]);
}

TEST_CASE("degenerate input throws") {
  const double same[] = {0.3, 0.3, 0.3};
  CHECK_THROWS_AS(fit_gmm_2(same, RalConfig{}), Error);
  const double one[] = {0.3};
  CHECK_THROWS_AS(fit_gmm_2(one, RalConfig{}), Error);
  const double bad[] = {0.3, NAN};
  CHECK_THROWS_AS(fit_gmm_2(bad, RalConfig{}), Error);
}

TEST_CASE("EM never decreases the log-likelihood") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::normal_distribution<double> a(0.2, 0.1), b(0.6, 0.2);
    std::vector<double> x;
    for (int i = 0; i < 300; ++i) x.push_back(i % 3 == 0 ? b(rng) : a(rng));
    const GmmFit fit = fit_gmm_2_detailed(x, RalConfig{});
    for (std::size_t k = 1; k < fit.log_likelihood.size(); ++k)
      CHECK(fit.log_likelihood[k] >= fit.log_likelihood[k - 1] - 1e-9);
    CHECK(fit.log_likelihood.back() == doctest::Approx(gmm_log_likelihood(fit.params, x)));
  }
}

TEST_CASE("clean posterior") {
  GmmParams g;
  g.means = {0.1, 0.9};
  g.variances = {0.01, 0.01};
  g.weights = {0.5, 0.5};
  CHECK(clean_posterior(g, 0.1) > 0.99);
  CHECK(clean_posterior(g, 0.9) < 0.01);
  CHECK(clean_posterior(g, 0.5) == doctest::Approx(0.5));
  // Far tails stay finite.
  CHECK(clean_posterior(g, -50.0) == doctest::Approx(1.0));
  CHECK(clean_posterior(g, 50.0) == doctest::Approx(0.0));
}

TEST_CASE("gamma from the clean posterior") {
  const RalConfig c;
  CHECK(c.mu == doctest::Approx(0.581977).epsilon(1e-6));
  CHECK(gamma_from_posterior(0.0, c) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gamma_from_posterior(1.0, c) == c.gamma_floor);
  CHECK(gamma_from_posterior(1.0 - std::pow(0.2, 4), c) ==
        doctest::Approx(std::log(0.2 * (std::exp(1.0) - 1.0) + 1.0)).epsilon(1e-12));
  CHECK(gamma_from_posterior(1.0 - std::pow(0.2, 4), c) == doctest::Approx(0.29539).epsilon(1e-5));
}

TEST_CASE("gamma decreases as the clean posterior grows") {
  const RalConfig c;
  double prev = 2.0;
  for (int i = 0; i <= 1000; ++i) {
    const double g = gamma_from_posterior(i / 1000.0, c);
    CHECK(g <= prev);
    CHECK(g >= c.gamma_floor);
    CHECK(g <= 1.0);
    prev = g;
  }
}

TEST_CASE("min-max normalization") {
  const double x[] = {2.0, 4.0, 3.0};
  CHECK(minmax_normalize(x) == std::vector<double>{0.0, 1.0, 0.5});
  const double flat[] = {7.0, 7.0};
  CHECK(minmax_normalize(flat) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("adaptive gammas give small-loss samples the smaller exponent") {
  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) losses.push_back(0.5 + 0.01 * (i % 7));
  for (int i = 0; i < 20; ++i) losses.push_back(4.0 + 0.02 * (i % 5));
  const AdaptiveGammas a = adaptive_gammas(losses, RalConfig{});
  REQUIRE_FALSE(a.degenerate);
  REQUIRE(a.gammas.size() == losses.size());
  CHECK(a.gammas[0] < 0.5);
  CHECK(a.gammas[60] > 0.9);
}

TEST_CASE("adaptive gammas fall back on degenerate input") {
  const std::vector<double> losses(5, 1.0);
  const AdaptiveGammas a = adaptive_gammas(losses, RalConfig{});
  CHECK(a.degenerate);
  for (double g : a.gammas) CHECK(g == RalConfig{}.gamma_floor);
}

TEST_CASE("RAL configuration validation") {
  RalConfig c;
  c.mu = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.gamma_floor = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.max_iter = 0;
  CHECK_THROWS_AS(validate(c), Error);
}
