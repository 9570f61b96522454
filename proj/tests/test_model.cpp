#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "phasetrack/model.hpp"

using namespace phasetrack;

TEST_CASE("validate_params accepts in-range parameters") {
  ModelParams p;
  p.lambda = 1.0;
  p.kappa = 1.0;
  p.alpha = 1.0;
  p.mu = 0.0;
  p.delta = 0.0;
  p.dt = 1e-3;
  p.horizon = 100.0;
  REQUIRE_NOTHROW(validate_params(p));
}

TEST_CASE("validate_params names each violated bound") {
  ModelParams p;
  p.kappa = -1.0;
  REQUIRE_THROWS_WITH(validate_params(p),
                      Catch::Matchers::ContainsSubstring("kappa must be > 0"));

  p = ModelParams{};
  p.mu = 1.0;
  REQUIRE_THROWS_WITH(
      validate_params(p),
      Catch::Matchers::ContainsSubstring("mu must satisfy 0 <= mu < 1"));

  p = ModelParams{};
  p.delta = -1.5;
  REQUIRE_THROWS_WITH(
      validate_params(p),
      Catch::Matchers::ContainsSubstring("delta must satisfy |delta| <= 1"));

  p = ModelParams{};
  p.kappa = 0.0;
  p.alpha = -2.0;
  p.dt = -1.0;
  const auto v = param_violations(p);
  REQUIRE(v.size() == 3);  // kappa, alpha, dt (horizon bound needs dt > 0)
}

TEST_CASE("lambda = 0 is admitted (Wiener limit)") {
  ModelParams p;
  p.lambda = 0.0;
  REQUIRE_NOTHROW(validate_params(p));
}

TEST_CASE("horizon must cover at least ten steps") {
  ModelParams p;
  p.horizon = 5e-3;
  p.dt = 1e-3;
  REQUIRE_THROWS_WITH(
      validate_params(p),
      Catch::Matchers::ContainsSubstring("horizon must be >= 10*dt"));
}

TEST_CASE("validation is total on arbitrary finite and non-finite input") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  const double specials[] = {0.0,
                             -0.0,
                             1e-308,
                             std::numeric_limits<double>::infinity(),
                             -std::numeric_limits<double>::infinity(),
                             std::numeric_limits<double>::quiet_NaN()};
  for (int i = 0; i < 2000; ++i) {
    ModelParams p;
    auto draw = [&] {
      if (rng() % 8 == 0) return specials[rng() % 6];
      return u(rng);
    };
    p.lambda = draw();
    p.kappa = draw();
    p.alpha = draw();
    if (rng() % 2) p.chi = draw();
    p.mu = draw();
    p.delta = draw();
    p.dt = draw();
    p.horizon = draw();
    try {
      validate_params(p);
    } catch (const std::invalid_argument&) {
      // expected for out-of-range input; anything else would fail the test
    }
  }
  SUCCEED();
}

TEST_CASE("chi defaults to the optimal bandwidth") {
  ModelParams p;
  p.kappa = 4.0;
  p.alpha = 3.0;
  REQUIRE(p.resolved_chi() == Catch::Approx(12.0));
  p.chi = 1.5;
  REQUIRE(p.resolved_chi() == 1.5);
}

TEST_CASE("default burn-in covers ten time constants of the slowest mode") {
  ModelParams p;  // unit parameters: rates are sqrt(5), chi = 2, sqrt(5)
  REQUIRE(default_burn_in(p) == 5000);

  p.mu = 0.9;  // robust rate sqrt(1 - 0.81 + 4) ~ 2.047, chi still slowest
  REQUIRE(default_burn_in(p) == 5000);

  p = ModelParams{};
  p.chi = 10.0;  // now lambda + K_f = sqrt(5) is slowest
  REQUIRE(default_burn_in(p) ==
          static_cast<std::size_t>(std::ceil(10.0 / std::sqrt(5.0) / 1e-3)));
}

TEST_CASE("sample_count matches floor(T/dt)+1 with tolerance for FP grids") {
  REQUIRE(sample_count(100.0, 1e-3) == 100001);
  REQUIRE(sample_count(1.0, 0.3) == 4);  // 0.3*3 covers 0.9, plus t=0
  REQUIRE(sample_count(1.0, 0.1) == 11);
}

TEST_CASE("scheme names round-trip and unknown names are rejected") {
  for (Scheme s : all_schemes())
    REQUIRE(scheme_from_string(to_string(s)) == s);
  REQUIRE_THROWS_AS(scheme_from_string("kalmann"), std::invalid_argument);
}
