#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "semisens/score.hpp"

using namespace semisens;

namespace {

// independent logistic helpers: plain formulas, no library code
double ilogit(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

double bern(double v, double p) { return v == 1.0 ? p : 1.0 - p; }

// independent joint cell probability under the binary-outcome model
double cell_prob(double y, double z, const Eigen::VectorXd& x, double u,
                 const Theta& t, const SensitivityPoint& sp) {
  const double p1 = ilogit(t.lambda.dot(x) + t.beta * z + sp.delta * u);
  const double p2 = ilogit(t.kappa.dot(x) + sp.gamma * u);
  return bern(y, p1) * bern(z, p2);
}

Theta random_theta(std::mt19937& gen, int p) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Theta t;
  t.lambda = Eigen::VectorXd::NullaryExpr(p, [&](int) { return unif(gen); });
  t.beta = unif(gen);
  t.kappa = Eigen::VectorXd::NullaryExpr(p, [&](int) { return unif(gen); });
  return t;
}

}  // namespace

TEST_CASE("full_score closed-form cells") {
  Theta t;
  t.lambda = Eigen::VectorXd::Zero(1);
  t.beta = 0.0;
  t.kappa = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{0.0, 0.0};
  ModelSpec bernoulli;
  Eigen::VectorXd s = full_score(1.0, 1.0, x, 0.0, t, sp, bernoulli);
  REQUIRE(s.size() == 3);
  CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));  // (y - 1/2) * x
  CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));  // (y - 1/2) * z
  CHECK(s[2] == doctest::Approx(0.5).epsilon(1e-15));  // (z - 1/2) * x
}

TEST_CASE("full_score vanishes at residual zero and matches hand formula") {
  Theta t;
  t.lambda = Eigen::Vector2d(0.5, -0.2);
  t.beta = 1.0;
  t.kappa = Eigen::Vector2d(-0.3, 0.4);
  Eigen::Vector2d x(1.0, 0.7);
  SensitivityPoint sp{0.2, -0.4};
  ModelSpec bernoulli;
  const double u = 0.5;
  const double mu1 = ilogit(t.lambda.dot(x) + t.beta * 1.0 + sp.delta * u);
  const double mu2 = ilogit(t.kappa.dot(x) + sp.gamma * u);

  Eigen::VectorXd s = full_score(1.0, 1.0, x, u, t, sp, bernoulli);
  CHECK(s[0] == doctest::Approx((1.0 - mu1) * x[0]).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx((1.0 - mu1) * x[1]).epsilon(1e-12));
  CHECK(s[2] == doctest::Approx((1.0 - mu1) * 1.0).epsilon(1e-12));
  CHECK(s[3] == doctest::Approx((1.0 - mu2) * x[0]).epsilon(1e-12));
  CHECK(s[4] == doctest::Approx((1.0 - mu2) * x[1]).epsilon(1e-12));
}

TEST_CASE("gaussian full_score scales residuals by 1/sigma^2") {
  Theta t;
  t.lambda = Eigen::VectorXd::Constant(1, 0.3);
  t.beta = 0.7;
  t.kappa = Eigen::VectorXd::Constant(1, -0.1);
  t.sigma = 2.0;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{0.5, 0.0};
  ModelSpec gauss{OutcomeFamily::gaussian_identity};
  const double u = 0.25, y = 1.9, z = 1.0;
  const double eta1 = 0.3 + 0.7 + 0.5 * 0.25;
  const double mu2 = ilogit(-0.1);
  Eigen::VectorXd s = full_score(y, z, x, u, t, sp, gauss);
  CHECK(s[0] == doctest::Approx((y - eta1) / 4.0).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx((y - eta1) / 4.0).epsilon(1e-12));
  CHECK(s[2] == doctest::Approx((z - mu2) * 1.0).epsilon(1e-12));
}

TEST_CASE("full_score has mean zero over the four cells") {
  std::mt19937 gen(71);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  ModelSpec bernoulli;
  for (int rep = 0; rep < 5; ++rep) {
    Theta t = random_theta(gen, 2);
    Eigen::Vector2d x(1.0, unif(gen));
    SensitivityPoint sp{2.0 * unif(gen), 2.0 * unif(gen)};
    const double u = unif(gen);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
    for (double y : {0.0, 1.0}) {
      for (double z : {0.0, 1.0}) {
        mean += cell_prob(y, z, x, u, t, sp) *
                full_score(y, z, x, u, t, sp, bernoulli);
      }
    }
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("istar is the prior mixture of cell probabilities") {
  std::mt19937 gen(19);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  ModelSpec bernoulli;
  WorkingPrior prior = make_weights_prior({-0.5, 0.1, 0.8}, {0.2, 0.5, 0.3});
  for (int rep = 0; rep < 20; ++rep) {
    Theta t = random_theta(gen, 2);
    Eigen::Vector2d x(1.0, unif(gen));
    SensitivityPoint sp{2.0 * unif(gen), 2.0 * unif(gen)};
    const double y = gen() % 2, z = gen() % 2;
    double direct = 0.0;
    for (int k = 0; k < prior.size(); ++k) {
      direct += prior.weights[k] * cell_prob(y, z, x, prior.support[k], t, sp);
    }
    CHECK(istar(y, z, x, t, sp, prior, bernoulli) ==
          doctest::Approx(direct).epsilon(1e-12));
    CHECK(log_istar(y, z, x, t, sp, prior, bernoulli) ==
          doctest::Approx(std::log(direct)).epsilon(1e-12));
  }
}

TEST_CASE("istar cells sum to one and collapse for point masses") {
  Theta t;
  t.lambda = Eigen::Vector2d(0.4, -0.6);
  t.beta = 0.9;
  t.kappa = Eigen::Vector2d(0.2, 0.3);
  Eigen::Vector2d x(1.0, 0.25);
  SensitivityPoint sp{1.5, -0.7};
  ModelSpec bernoulli;
  WorkingPrior prior = make_bernoulli_prior(0.35);
  double total = 0.0;
  for (double y : {0.0, 1.0}) {
    for (double z : {0.0, 1.0}) {
      total += istar(y, z, x, t, sp, prior, bernoulli);
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  WorkingPrior point = make_weights_prior({0.4}, {1.0});
  CHECK(istar(1.0, 0.0, x, t, sp, point, bernoulli) ==
        doctest::Approx(cell_prob(1.0, 0.0, x, 0.4, t, sp)).epsilon(1e-12));

  // delta = gamma = 0: likelihood ignores u entirely
  SensitivityPoint null_sp{0.0, 0.0};
  CHECK(istar(1.0, 0.0, x, t, null_sp, prior, bernoulli) ==
        doctest::Approx(cell_prob(1.0, 0.0, x, 7.7, t, null_sp)).epsilon(1e-12));
}

TEST_CASE("posterior weights: normalization, null point, strong confounding") {
  Theta t;
  t.lambda = Eigen::VectorXd::Constant(1, 0.2);
  t.beta = -0.4;
  t.kappa = Eigen::VectorXd::Constant(1, 0.1);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  ModelSpec bernoulli;
  WorkingPrior prior = make_bernoulli_prior(0.5);

  SensitivityPoint null_sp{0.0, 0.0};
  Eigen::VectorXd w0 = posterior_weights(1.0, 1.0, x, t, null_sp, prior,
                                         bernoulli);
  CHECK(w0[0] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(w0[1] == doctest::Approx(0.5).epsilon(1e-13));

  // y = 1 nearly impossible at u = 0, certain at u = 1 for large delta
  Theta rare = t;
  rare.lambda[0] = -8.0;
  SensitivityPoint strong{30.0, 0.0};
  Eigen::VectorXd w1 = posterior_weights(1.0, 1.0, x, rare, strong, prior,
                                         bernoulli);
  CHECK(w1[1] > 0.999);
  CHECK(w1.sum() == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937 gen(5);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    Theta rt = random_theta(gen, 1);
    SensitivityPoint sp{3.0 * unif(gen), 3.0 * unif(gen)};
    const double y = gen() % 2, z = gen() % 2;
    Eigen::VectorXd w = posterior_weights(y, z, x, rt, sp, prior, bernoulli);
    CHECK(w.minCoeff() >= 0.0);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("observed_score equals the posterior average of full scores") {
  Theta t;
  t.lambda = Eigen::Vector2d(0.4, -0.1);
  t.beta = 0.6;
  t.kappa = Eigen::Vector2d(-0.2, 0.5);
  Eigen::Vector2d x(1.0, 0.8);
  SensitivityPoint sp{1.0, -1.3};
  ModelSpec bernoulli;
  WorkingPrior prior = make_weights_prior({0.0, 0.5, 1.0}, {0.25, 0.5, 0.25});

  const double y = 1.0, z = 0.0;
  Eigen::VectorXd w = posterior_weights(y, z, x, t, sp, prior, bernoulli);
  Eigen::VectorXd manual = Eigen::VectorXd::Zero(5);
  for (int k = 0; k < prior.size(); ++k) {
    manual += w[k] * full_score(y, z, x, prior.support[k], t, sp, bernoulli);
  }
  Eigen::VectorXd s = observed_score(y, z, x, t, sp, prior, bernoulli);
  CHECK((s - manual).cwiseAbs().maxCoeff() < 1e-13);

  // null sensitivity point: equals the full score at any u
  SensitivityPoint null_sp{0.0, 0.0};
  Eigen::VectorXd a = observed_score(y, z, x, t, null_sp, prior, bernoulli);
  Eigen::VectorXd b = full_score(y, z, x, 0.33, t, null_sp, bernoulli);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("observed_score has mean zero under the mixture law it scores") {
  // when the working prior equals the true U law, the observed score is the
  // score of the observed-data likelihood, so its mean under that law is 0
  Theta t;
  t.lambda = Eigen::Vector2d(0.3, -0.5);
  t.beta = 0.8;
  t.kappa = Eigen::Vector2d(0.6, -0.4);
  Eigen::Vector2d x(1.0, 0.45);
  SensitivityPoint sp{1.4, 2.2};
  ModelSpec bernoulli;
  WorkingPrior prior = make_bernoulli_prior(0.2);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
  for (double y : {0.0, 1.0}) {
    for (double z : {0.0, 1.0}) {
      double mix = 0.0;
      for (int k = 0; k < prior.size(); ++k) {
        mix += prior.weights[k] * cell_prob(y, z, x, prior.support[k], t, sp);
      }
      mean += mix * observed_score(y, z, x, t, sp, prior, bernoulli);
    }
  }
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-12);
}
