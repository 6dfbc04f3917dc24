#include <doctest.h>

#include <cmath>

#include "quadrature.hpp"
#include "rng.hpp"
#include "support/oracles.hpp"

using namespace sace;

TEST_SUITE("quadrature") {

TEST_CASE("order-1 rule is the single node at zero with weight sqrt(pi)") {
  const GhRule rule = gh_nodes(1);
  CHECK(rule.nodes.size() == 1);
  CHECK(rule.nodes[0] == 0.0);
  CHECK(rule.weights[0] == doctest::Approx(1.7724539).epsilon(1e-7));
}

TEST_CASE("order-2 rule matches the closed-form roots of H_2") {
  const GhRule rule = gh_nodes(2);
  CHECK(rule.nodes[0] == doctest::Approx(-0.7071068).epsilon(1e-7));
  CHECK(rule.nodes[1] == doctest::Approx(+0.7071068).epsilon(1e-7));
  CHECK(rule.weights[0] == doctest::Approx(0.8862269).epsilon(1e-7));
  CHECK(rule.weights[1] == doctest::Approx(0.8862269).epsilon(1e-7));
}

TEST_CASE("weights sum to sqrt(pi) and nodes are antisymmetric at every order") {
  for (int order : {1, 2, 3, 5, 10, 25, 50, 100}) {
    const GhRule rule = gh_nodes(order);
    CHECK(rule.weights.sum() ==
          doctest::Approx(std::sqrt(M_PI)).epsilon(1e-12));
    for (int i = 0; i < order; ++i) {
      CHECK(rule.nodes[i] == -rule.nodes[order - 1 - i]);  // exact mirror
      CHECK(rule.weights[i] > 0.0);
    }
  }
}

TEST_CASE("weights match the explicit Hermite-polynomial formula") {
  // w_i = sqrt(pi) 2^(n-1) (n-1)! / (n H_{n-1}(x_i)^2), evaluated in logs
  for (int n : {3, 6, 11, 20}) {
    const GhRule rule = gh_nodes(n);
    for (int i = 0; i < n; ++i) {
      const double x = rule.nodes[i];
      // physicists' Hermite recurrence for H_{n-1}
      double h0 = 1.0, h1 = 2.0 * x;
      for (int k = 2; k <= n - 1; ++k) {
        const double h2 = 2.0 * x * h1 - 2.0 * (k - 1) * h0;
        h0 = h1;
        h1 = h2;
      }
      const double h_prev = (n - 1 == 0) ? 1.0 : h1;
      double log_num = 0.5 * std::log(M_PI) + (n - 1) * std::log(2.0);
      for (int k = 2; k <= n - 1; ++k) log_num += std::log(static_cast<double>(k));
      const double log_w = log_num - std::log(static_cast<double>(n)) -
                           2.0 * std::log(std::abs(h_prev));
      CHECK(std::log(rule.weights[i]) == doctest::Approx(log_w).epsilon(1e-10));
    }
  }
}

TEST_CASE("order bounds are enforced") {
  CHECK_THROWS_AS(gh_nodes(0), ConfigError);
  CHECK_THROWS_AS(gh_nodes(101), ConfigError);
  CHECK_THROWS_AS(gh_nodes(-3), ConfigError);
}

TEST_CASE("find_center recovers a shifted/scaled Gaussian exactly") {
  LogIntegrand h;
  h.log_value = [](double t) { return -(t - 3.0) * (t - 3.0) / 8.0; };
  const AdaptiveCenter c = find_center(h, -20.0, 20.0);
  CHECK(c.mode == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(c.scale == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("find_center on the standard Gaussian kernel") {
  LogIntegrand h;
  h.log_value = [](double t) { return -t * t / 2.0; };
  h.dlog = [](double t) { return -t; };
  h.d2log = [](double) { return -1.0; };
  const AdaptiveCenter c = find_center(h, -10.0, 10.0);
  CHECK(c.mode == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(c.scale == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("find_center matches the dense-grid oracle on a 3-person kernel") {
  // beta = 0, sigma2_b = 1, S = (1,0,1), unit designs:
  // log g(b) = 2b - 3 log(1+e^b) - b^2/2
  auto logg = [](double b) { return 2.0 * b - 3.0 * std::log1p(std::exp(b)) - b * b / 2.0; };
  const oracle::GridMax gm = oracle::grid_argmax(logg, -10.0, 10.0, 1e-4);
  // frozen from the oracle: mode 0.2865477, scale 0.7592306
  CHECK(gm.argmax == doctest::Approx(0.2865477).epsilon(1e-6));

  LogIntegrand h;
  h.log_value = logg;
  const AdaptiveCenter c = find_center(h, -10.0, 10.0);
  CHECK(c.mode == doctest::Approx(gm.argmax).epsilon(1e-6));
  CHECK(c.scale == doctest::Approx(1.0 / std::sqrt(-gm.curvature)).epsilon(1e-5));
  CHECK(c.mode == doctest::Approx(0.2865477).epsilon(1e-6));
  CHECK(c.scale == doctest::Approx(0.7592306).epsilon(1e-5));
}

TEST_CASE("find_center rejects integrands without an interior maximum") {
  LogIntegrand increasing;
  increasing.log_value = [](double t) { return t; };
  increasing.dlog = [](double) { return 1.0; };
  CHECK_THROWS_AS(find_center(increasing, -5.0, 5.0), IntegrationError);

  LogIntegrand convex;
  convex.log_value = [](double t) { return t * t; };
  convex.dlog = [](double t) { return 2.0 * t; };
  convex.d2log = [](double) { return 2.0; };
  CHECK_THROWS_AS(find_center(convex, -5.0, 5.0), IntegrationError);
}

TEST_CASE("adaptive integration is exact for Gaussians at order 1") {
  const GhRule rule = gh_nodes(1);
  auto gauss = [](double t) { return std::exp(-t * t / 2.0); };
  const double v1 = adaptive_integrate(gauss, rule, {0.0, 1.0});
  CHECK(v1 == doctest::Approx(2.5066283).epsilon(1e-7));  // sqrt(2 pi)

  auto shifted = [](double t) { return std::exp(-(t - 3.0) * (t - 3.0) / 8.0); };
  const double v2 = adaptive_integrate(shifted, rule, {3.0, 2.0});
  CHECK(v2 == doctest::Approx(5.0132565).epsilon(1e-7));  // sqrt(8 pi)
}

TEST_CASE("Gaussian integrands are exact to 1e-12 at every order") {
  for (int order : {1, 2, 5, 15, 40}) {
    const GhRule rule = gh_nodes(order);
    auto gauss = [](double t) { return std::exp(-(t - 1.5) * (t - 1.5) / 4.5); };
    const double expected = std::sqrt(4.5 * M_PI);
    const double got = adaptive_integrate(gauss, rule, {1.5, std::sqrt(2.25)});
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("logistic-tilted Gaussian matches the trapezoid oracle at order 25") {
  auto h = [](double t) { return std::exp(-t * t / 2.0) / (1.0 + std::exp(-t)); };
  LogIntegrand li;
  li.log_value = [](double t) {
    return -t * t / 2.0 - std::log1p(std::exp(-t));
  };
  const AdaptiveCenter c = find_center(li, -8.0, 8.0);
  const double got = adaptive_integrate(h, gh_nodes(25), c);
  const double expected = oracle::trapezoid(h);
  CHECK(std::abs(got - expected) / expected < 1e-9);
}

TEST_CASE("NaN from the integrand names the offending node") {
  auto h = [](double t) { return t > 1.0 ? std::nan("") : std::exp(-t * t); };
  CHECK_THROWS_WITH_AS(adaptive_integrate(h, gh_nodes(15), {0.0, 1.0}),
                       doctest::Contains("node"), IntegrationError);
}

namespace {

// one random small-cluster fixture per draw
struct ClusterFixture {
  Eigen::MatrixXd D;
  Eigen::VectorXd S;
  Eigen::VectorXd beta;
  double sigma2;
};

ClusterFixture random_fixture(RngStream& rng, int max_n = 6, int max_p = 3) {
  ClusterFixture f;
  const int n = rng.uniform_int(1, max_n);
  const int p = rng.uniform_int(1, max_p);
  f.D.resize(n, p);
  f.S.resize(n);
  for (int j = 0; j < n; ++j) {
    f.D(j, 0) = 1.0;
    for (int k = 1; k < p; ++k) f.D(j, k) = rng.normal(0.0, 1.0);
    f.S[j] = rng.bernoulli(0.6) ? 1.0 : 0.0;
  }
  f.beta.resize(p);
  for (int k = 0; k < p; ++k) f.beta[k] = rng.normal(0.0, 0.5);
  f.sigma2 = 0.2 + rng.uniform() * 1.3;
  return f;
}

}  // namespace

TEST_CASE("all seven cluster integrals match the trapezoid oracle") {
  RngStream rng(20240 /*seed*/, RngPurpose::kScience, 5);
  const GhRule rule = gh_nodes(25);
  for (int rep = 0; rep < 20; ++rep) {
    const ClusterFixture f = random_fixture(rng);
    const IntegralSet got = cluster_integrals(f.D, f.S, f.beta, f.sigma2, rule);
    const oracle::SevenIntegrals want =
        oracle::seven_integrals(f.D, f.S, f.beta, f.sigma2);
    // error measured relative to the magnitude of each form: entries that
    // cancel to ~0 are held to the form's scale, not their own
    const double scale = std::exp(got.log_gmax);
    CHECK(std::abs(scale * got.i1 - want.i1) / want.i1 < 1e-8);
    CHECK(std::abs(scale * got.i2 - want.i2) / std::abs(want.i2) < 1e-8);
    CHECK(std::abs(scale * got.i3 - want.i3) / std::abs(want.i3) < 1e-8);
    const double s4 = want.i4.lpNorm<Eigen::Infinity>();
    const double s5 = want.i5.lpNorm<Eigen::Infinity>();
    const double s6 = want.i6.lpNorm<Eigen::Infinity>();
    const double s7 = want.i7.lpNorm<Eigen::Infinity>();
    for (int k = 0; k < f.beta.size(); ++k) {
      CHECK(std::abs(scale * got.i4[k] - want.i4[k]) / s4 < 1e-8);
      CHECK(std::abs(scale * got.i5[k] - want.i5[k]) / s5 < 1e-8);
      for (int l = 0; l < f.beta.size(); ++l) {
        CHECK(std::abs(scale * got.i6(k, l) - want.i6(k, l)) / s6 < 1e-8);
        CHECK(std::abs(scale * got.i7(k, l) - want.i7(k, l)) / s7 < 1e-8);
      }
    }
  }
}

TEST_CASE("single-individual integral (1) against the trapezoid oracle") {
  Eigen::MatrixXd D(1, 1);
  D << 1.0;
  Eigen::VectorXd S(1), beta(1);
  S << 1.0;
  beta << 0.0;
  const IntegralSet got = cluster_integrals(D, S, beta, 1.0, gh_nodes(25));
  const double want = oracle::trapezoid(
      [&](double b) { return oracle::g_kernel(b, D, S, beta, 1.0); });
  CHECK(std::abs(got.value1() - want) < 1e-8);
}

TEST_CASE("tilted-density moments satisfy the Jensen inequalities") {
  RngStream rng(7, RngPurpose::kScience, 1);
  const GhRule rule = gh_nodes(25);
  for (int rep = 0; rep < 10; ++rep) {
    const ClusterFixture f = random_fixture(rng);
    const IntegralSet I = cluster_integrals(f.D, f.S, f.beta, f.sigma2, rule);
    CHECK(I.r2() >= 0.0);
    CHECK(I.r3() >= I.r2() * I.r2());  // E[b^4] >= (E[b^2])^2
  }
}

TEST_CASE("identical individuals make the vector integral additive") {
  Eigen::MatrixXd D1(1, 2), D4(4, 2);
  D1 << 1.0, 0.5;
  D4 << 1.0, 0.5, 1.0, 0.5, 1.0, 0.5, 1.0, 0.5;
  Eigen::VectorXd S1(1), S4(4), beta(2);
  S1 << 1.0;
  S4 << 1.0, 1.0, 1.0, 1.0;
  beta << 0.2, -0.4;
  const GhRule rule = gh_nodes(31);
  const IntegralSet one = cluster_integrals(D1, S1, beta, 0.7, rule);
  const IntegralSet four = cluster_integrals(D4, S4, beta, 0.7, rule);
  // with all-identical rows, (integral 4)/(integral 1) is n_i times the
  // single-individual ratio at the same posterior; the posteriors differ, so
  // compare the per-integrand structure instead: sum_j inside the integrand
  // is exactly 4x the single-row summand pointwise
  auto q1 = [&](double b) {
    return oracle::g_kernel(b, D4, S4, beta, 0.7) * oracle::expit(D1.row(0).dot(beta) + b);
  };
  const double base = oracle::trapezoid(q1);
  const double got = std::exp(four.log_gmax) * four.i4[0];
  CHECK(got == doctest::Approx(4.0 * base).epsilon(1e-8));
}

TEST_CASE("orders 15 -> 25 -> 35 converge monotonically on cluster fixtures") {
  RngStream rng(99, RngPurpose::kScience, 3);
  for (int rep = 0; rep < 8; ++rep) {
    const ClusterFixture f = random_fixture(rng);
    const oracle::SevenIntegrals want = oracle::seven_integrals(f.D, f.S, f.beta, f.sigma2);
    double err_prev = 1e300;
    for (int order : {15, 25, 35}) {
      const IntegralSet I = cluster_integrals(f.D, f.S, f.beta, f.sigma2, gh_nodes(order));
      const double err = std::abs(std::exp(I.log_gmax) * I.i1 - want.i1) / want.i1;
      // shrinking increments until the double-precision floor
      CHECK(err <= std::max(err_prev, 1e-12));
      err_prev = err;
    }
  }
}

TEST_CASE("shared center agrees with independently centered evaluation") {
  RngStream rng(15, RngPurpose::kScience, 9);
  const GhRule rule = gh_nodes(25);
  for (int rep = 0; rep < 6; ++rep) {
    const ClusterFixture f = random_fixture(rng);
    const IntegralSet I = cluster_integrals(f.D, f.S, f.beta, f.sigma2, rule);
    // recenter integral (2) at its own mode and compare
    auto h2 = [&](double b) {
      return oracle::g_kernel(b, f.D, f.S, f.beta, f.sigma2) * b * b;
    };
    LogIntegrand li;
    li.log_value = [&](double b) { return std::log(std::max(h2(b), 1e-300)); };
    // b^2 vanishes at 0; when the mode of g is near 0 the product is bimodal,
    // so only exercise fixtures whose kernel mode is clearly off-origin
    if (std::abs(I.center.mode) < 0.3) continue;
    const double lo = I.center.mode > 0 ? 0.05 : -12.0;
    const double hi = I.center.mode > 0 ? 12.0 : -0.05;
    AdaptiveCenter own;
    try {
      own = find_center(li, lo, hi);
    } catch (const IntegrationError&) {
      continue;  // genuinely bimodal draw
    }
    const double independent = adaptive_integrate(h2, gh_nodes(45), own);
    const double shared = std::exp(I.log_gmax) * I.i2;
    CHECK(std::abs(shared - independent) / std::abs(independent) < 1e-6);
  }
}

TEST_CASE("cluster_integrals rejects non-positive variance") {
  Eigen::MatrixXd D(1, 1);
  D << 1.0;
  Eigen::VectorXd S(1), beta(1);
  S << 1.0;
  beta << 0.0;
  CHECK_THROWS_AS(cluster_integrals(D, S, beta, 0.0, gh_nodes(5)), ConfigError);
  CHECK_THROWS_AS(cluster_integrals(D, S, beta, -1.0, gh_nodes(5)), ConfigError);
}

}  // TEST_SUITE
