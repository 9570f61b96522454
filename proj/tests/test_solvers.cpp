#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "phasetrack/solvers.hpp"

using namespace phasetrack;
using namespace phasetrack::solvers;

namespace {

double lyap_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p,
                     const Eigen::MatrixXd& q) {
  return (a * p + p * a.transpose() + q).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("1x1 Lyapunov agrees with the closed form -Q/(2A)") {
  Eigen::MatrixXd a(1, 1), q(1, 1);
  a << -1.0;
  q << 1.0;
  const auto p = solve_lyapunov({a, q});
  REQUIRE(p(0, 0) == 0.5);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 50; ++i) {
    a(0, 0) = -u(rng);
    q(0, 0) = u(rng);
    const auto p1 = solve_lyapunov({a, q});
    REQUIRE(p1(0, 0) == Catch::Approx(-q(0, 0) / (2.0 * a(0, 0))).epsilon(1e-14));
  }
}

TEST_CASE("2x2 dual-homodyne low-pass system reproduces the closed forms") {
  // lambda=1, kappa=1, alpha=1, chi=2; noise PSD into the filter is
  // chi^2/(2 alpha^2) on the dual-homodyne channel.
  const double lam = 1.0, kap = 1.0, al = 1.0, chi = 2.0;
  Eigen::Matrix2d a;
  a << -lam, 0.0, chi, -chi;
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  q(0, 0) = kap;
  q(1, 1) = chi * chi / (2.0 * al * al);

  // Independent oracle: the closed-form entries, residual-checked first.
  Eigen::Matrix2d expected;
  const double p1 = kap / (2.0 * lam);
  const double p2 = chi * kap / (2.0 * lam * (lam + chi));
  const double p3 = 0.5 * chi * (kap / (lam * (lam + chi)) + 1.0 / (2.0 * al * al));
  expected << p1, p2, p2, p3;
  REQUIRE(lyap_residual(a, expected, q) < 1e-12);

  const auto p = solve_lyapunov({Eigen::MatrixXd(a), Eigen::MatrixXd(q)});
  REQUIRE(p(0, 0) == Catch::Approx(0.5).epsilon(1e-12));
  REQUIRE(p(0, 1) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  REQUIRE(p(1, 1) == Catch::Approx(5.0 / 6.0).epsilon(1e-12));
  // (1,-1) quadratic form = error covariance 2/3
  REQUIRE(p(0, 0) - 2.0 * p(0, 1) + p(1, 1) ==
          Catch::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("non-Hurwitz dynamics are rejected") {
  Eigen::MatrixXd a(2, 2), q(2, 2);
  a << 1.0, 0.0, 0.0, -1.0;
  q.setIdentity();
  REQUIRE_THROWS_WITH(solve_lyapunov({a, q}),
                      Catch::Matchers::ContainsSubstring("unstable dynamics"));
}

TEST_CASE("asymmetric Q is rejected") {
  Eigen::MatrixXd a(2, 2), q(2, 2);
  a << -1.0, 0.0, 0.0, -1.0;
  q << 1.0, 0.5, -0.5, 1.0;
  REQUIRE_THROWS_AS(solve_lyapunov({a, q}), std::invalid_argument);
}

TEST_CASE("random Hurwitz systems: symmetry, PSD, residual") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 1 + static_cast<int>(rng() % 4);
    Eigen::MatrixXd m(n, n), b(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        m(i, j) = u(rng);
        b(i, j) = u(rng);
      }
    const double shift =
        m.eigenvalues().real().maxCoeff() + 0.3 + 0.5 * std::abs(u(rng));
    const Eigen::MatrixXd a = m - shift * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd q = b * b.transpose();

    const auto p = solve_lyapunov({a, q});
    REQUIRE((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
    REQUIRE(es.eigenvalues().minCoeff() > -1e-12 * (1.0 + p.cwiseAbs().maxCoeff()));
    REQUIRE(lyap_residual(a, p, q) <
            1e-10 * (1.0 + q.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("stabilizing root of the SQL Riccati at the Wiener limit") {
  // -2 lambda P - 2 alpha^2 P^2 + kappa = 0 at lambda=0, kappa=1, alpha=1.
  const double root = stabilizing_root({-2.0, 0.0, 1.0},
                                       [](double r) { return -2.0 * r; });
  REQUIRE(root == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("stabilizing roots of the forward and backward filter Riccatis") {
  const double lam = 1.0, al2 = 1.0, kap = 1.0;
  // Forward: -2 lambda P - 4 alpha^2 P^2 + kappa = 0.
  const double pf = stabilizing_root(
      {-4.0 * al2, -2.0 * lam, kap},
      [&](double r) { return -lam - 4.0 * al2 * r; });
  REQUIRE(pf == Catch::Approx((-1.0 + std::sqrt(5.0)) / 4.0).epsilon(1e-14));
  REQUIRE(std::abs(-2.0 * lam * pf - 4.0 * al2 * pf * pf + kap) < 1e-12);
  REQUIRE(pf > 0.0);

  // Backward: 2 lambda P - 4 alpha^2 P^2 + kappa = 0, reverse-time loop.
  const double pb = stabilizing_root(
      {-4.0 * al2, 2.0 * lam, kap},
      [&](double r) { return lam - 4.0 * al2 * r; });
  REQUIRE(pb == Catch::Approx((1.0 + std::sqrt(5.0)) / 4.0).epsilon(1e-14));
  REQUIRE(std::abs(2.0 * lam * pb - 4.0 * al2 * pb * pb + kap) < 1e-12);
}

TEST_CASE("the rejected root fails the stability test") {
  const double lam = 1.0, al2 = 1.0, kap = 1.0;
  const double other = (-lam - std::sqrt(lam * lam + 4.0 * kap * al2)) /
                       (4.0 * al2);  // the "-sqrt" branch
  REQUIRE(-lam - 4.0 * al2 * other >= 0.0);
}

TEST_CASE("complex roots and destabilizing roots are hard errors") {
  REQUIRE_THROWS_WITH(
      stabilizing_root({1.0, 0.0, 1.0}, [](double) { return -1.0; }),
      Catch::Matchers::ContainsSubstring("complex roots"));
  // Roots 1 and 2, closed loop +r for both.
  REQUIRE_THROWS_WITH(
      stabilizing_root({1.0, -3.0, 2.0}, [](double r) { return r; }),
      Catch::Matchers::ContainsSubstring("both roots destabilizing"));
  // Larger root unstable while smaller is stable surfaces as a branch error.
  REQUIRE_THROWS_WITH(
      stabilizing_root({1.0, -3.0, 2.0}, [](double r) { return r - 1.5; }),
      Catch::Matchers::ContainsSubstring("not the larger root"));
}

TEST_CASE("linear (a = 0) equations return the unique stabilized root") {
  const double root =
      stabilizing_root({0.0, 2.0, -1.0}, [](double) { return -1.0; });
  REQUIRE(root == 0.5);
  REQUIRE_THROWS_AS(
      stabilizing_root({0.0, 0.0, 1.0}, [](double) { return -1.0; }),
      NumericalError);
}
