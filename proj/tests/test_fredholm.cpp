#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "semisens/fredholm.hpp"
#include "semisens/score.hpp"

using namespace semisens;

namespace {

Theta simple_theta(double l0, double b, double k0) {
  Theta t;
  t.lambda = Eigen::VectorXd::Constant(1, l0);
  t.beta = b;
  t.kappa = Eigen::VectorXd::Constant(1, k0);
  return t;
}

}  // namespace

TEST_CASE("null sensitivity point: zero forcing and rank-one kernel") {
  Theta t = simple_theta(0.4, -0.8, 0.3);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{0.0, 0.0};
  ModelSpec bern;
  HermiteRule h = hermite_rule(10);
  WorkingPrior prior = make_weights_prior({0.0, 0.5, 1.0}, {0.3, 0.4, 0.3});

  Eigen::MatrixXd b = build_forcing(x, t, sp, prior, bern, h);
  CHECK(b.cwiseAbs().maxCoeff() < 1e-14);

  Eigen::MatrixXd k = build_kernel(x, t, sp, prior, bern, h);
  // the likelihood ignores u, so every column is constant: rank one
  for (int j = 1; j < k.cols(); ++j) {
    CHECK((k.col(j) - k.col(0)).cwiseAbs().maxCoeff() < 1e-14);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(k);
  CHECK(svd.singularValues()[1] < 1e-12 * svd.singularValues()[0]);
}

TEST_CASE("kernel scaled symmetry") {
  // K(u_i, u_j) / pistar(u_i) is symmetric because E[f_i f_j / I*] is
  Theta t = simple_theta(0.2, 0.9, -0.5);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{1.3, 0.7};
  ModelSpec bern;
  HermiteRule h = hermite_rule(10);

  WorkingPrior atoms = make_weights_prior({-0.4, 0.1, 0.9}, {0.2, 0.5, 0.3});
  Eigen::MatrixXd k = build_kernel(x, t, sp, atoms, bern, h);
  for (int i = 0; i < atoms.size(); ++i) {
    for (int j = 0; j < atoms.size(); ++j) {
      const double sij = k(i, j) / atoms.weights[i];
      const double sji = k(j, i) / atoms.weights[j];
      CHECK(sij == doctest::Approx(sji).epsilon(1e-10));
    }
  }

  // grid prior: pistar is weight / mesh, the mesh cancels in the ratio
  WorkingPrior grid = make_grid_prior(0.0, 1.0, 0.25);
  Eigen::MatrixXd kg = build_kernel(x, t, sp, grid, bern, h);
  for (int i = 0; i < grid.size(); ++i) {
    for (int j = 0; j < grid.size(); ++j) {
      const double sij = kg(i, j) / grid.weights[i];
      const double sji = kg(j, i) / grid.weights[j];
      CHECK(sij == doctest::Approx(sji).epsilon(1e-10));
    }
  }
}

TEST_CASE("planted solution round trip, exact path") {
  Theta t = simple_theta(-0.3, 1.1, 0.4);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{2.0, 1.5};
  ModelSpec bern;
  HermiteRule h = hermite_rule(10);
  WorkingPrior prior = make_bernoulli_prior(0.3);

  FredholmSystem sys = build_system(x, t, sp, prior, bern, h, 0.0);
  Eigen::MatrixXd planted(2, 3);
  planted << 0.7, -0.2, 1.4, -0.9, 0.5, 0.3;
  sys.forcing = sys.lhs_matrix() * planted;
  CorrectionFunction corr = solve_exact(sys);
  CHECK_FALSE(corr.regularized);
  CHECK((corr.values - planted).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(corr.residual_norm < 1e-10);
}

TEST_CASE("planted solution round trip, tikhonov path") {
  // a Gaussian outcome with well-separated component means keeps the
  // discretized operator comfortably conditioned, so a small ridge barely
  // perturbs the planted solution
  Theta t = simple_theta(0.1, 0.8, -0.2);
  t.sigma = 0.3;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{4.0, 0.6};
  ModelSpec bern{OutcomeFamily::gaussian_identity};
  HermiteRule h = hermite_rule(20);
  WorkingPrior prior = make_grid_prior(0.0, 1.0, 0.25);

  FredholmSystem sys = build_system(x, t, sp, prior, bern, h, 1e-6);
  Eigen::MatrixXd planted =
      Eigen::MatrixXd::Random(prior.size(), 3);  // deterministic in Eigen
  sys.forcing = sys.lhs_matrix() * planted;
  CorrectionFunction corr = solve_tikhonov(sys);
  CHECK(corr.regularized);
  const double rel = (corr.values - planted).norm() / planted.norm();
  CHECK(rel < 1e-3);
}

TEST_CASE("ridge norm decreases as alpha grows") {
  Theta t = simple_theta(0.5, -0.6, 0.2);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{1.2, 0.9};
  ModelSpec bern;
  HermiteRule h = hermite_rule(10);
  WorkingPrior prior = make_grid_prior(0.0, 1.0, 0.1);

  // heavier regularization shrinks the solution: norm nonincreasing in alpha
  double prev = -1.0;
  for (double alpha : {1e-4, 0.01, 0.1, 1.0}) {
    FredholmSystem sys = build_system(x, t, sp, prior, bern, h, alpha);
    CorrectionFunction corr = solve_tikhonov(sys);
    const double norm = corr.values.norm();
    if (prev >= 0.0) CHECK(norm <= prev * (1.0 + 1e-12));
    prev = norm;
  }
}

TEST_CASE("tikhonov requires positive alpha; exact solve rejects ill-posed") {
  Theta t = simple_theta(0.3, 0.4, 0.1);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{0.8, 0.5};
  ModelSpec bern;
  HermiteRule h = hermite_rule(10);

  WorkingPrior prior = make_grid_prior(0.0, 1.0, 0.1);
  FredholmSystem sys = build_system(x, t, sp, prior, bern, h, 0.0);
  CHECK_THROWS_AS((void)solve_tikhonov(sys), std::invalid_argument);

  // a fine grid with a smooth kernel is numerically rank deficient
  WorkingPrior fine = make_grid_prior(0.0, 1.0, 0.02);
  FredholmSystem bad = build_system(x, t, sp, fine, bern, h, 0.0);
  CHECK_THROWS_WITH_AS((void)solve_exact(bad),
                       doctest::Contains("ill-posed; use tikhonov"),
                       std::runtime_error);
}

TEST_CASE("picard diagnostics") {
  Theta t = simple_theta(0.2, 0.7, -0.3);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{1.5, 1.0};
  ModelSpec bern;
  HermiteRule h = hermite_rule(10);
  WorkingPrior prior = make_grid_prior(0.0, 1.0, 0.1);

  FredholmSystem sys = build_system(x, t, sp, prior, bern, h, 0.1);
  PicardDiagnostics diag = picard_diagnostics(sys);
  REQUIRE(diag.singular_values.size() == prior.size());
  for (int i = 1; i < diag.singular_values.size(); ++i) {
    CHECK(diag.singular_values[i] <= diag.singular_values[i - 1]);
  }
  CHECK(diag.condition >= 1.0);
  CHECK(diag.capture_fraction >= 0.0);
  CHECK(diag.capture_fraction <= 1.0);

  // with alpha below sigma_min^2 every direction is captured
  FredholmSystem all = sys;
  const double smin = diag.singular_values.minCoeff();
  all.alpha = 0.5 * smin * smin;
  CHECK(picard_diagnostics(all).capture_fraction ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correction expectation averages rows by posterior weight") {
  Theta t = simple_theta(0.4, 0.5, 0.6);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{0.9, -0.5};
  ModelSpec bern;
  WorkingPrior prior = make_weights_prior({0.0, 1.0}, {0.4, 0.6});

  CorrectionFunction corr;
  corr.values = Eigen::MatrixXd(2, 3);
  corr.values << 1.0, 2.0, 3.0, -1.0, 0.0, 5.0;
  const double y = 1.0, z = 0.0;
  Eigen::VectorXd w = posterior_weights(y, z, x, t, sp, prior, bern);
  Eigen::VectorXd want = w[0] * corr.values.row(0).transpose() +
                         w[1] * corr.values.row(1).transpose();
  Eigen::VectorXd got = correction_expectation(corr, y, z, x, t, sp, prior,
                                               bern);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("solved system satisfies the conditional mean-zero property") {
  // the whole point of the correction: the corrected score has exactly zero
  // conditional mean at every confounder value in the support (atom priors
  // solve the system exactly)
  Theta t = simple_theta(0.5, -1.0, 0.8);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  SensitivityPoint sp{1.8, -1.2};
  ModelSpec bern;
  HermiteRule h = hermite_rule(10);
  WorkingPrior prior = make_bernoulli_prior(0.25);

  FredholmSystem sys = build_system(x, t, sp, prior, bern, h, 0.0);
  CorrectionFunction corr = solve_exact(sys);
  for (int j = 0; j < prior.size(); ++j) {
    Eigen::VectorXd defect = Eigen::VectorXd::Zero(3);
    for (double y : {0.0, 1.0}) {
      for (double z : {0.0, 1.0}) {
        Eigen::VectorXd s_eff =
            observed_score(y, z, x, t, sp, prior, bern) -
            correction_expectation(corr, y, z, x, t, sp, prior, bern);
        defect += joint_density(y, z, x, prior.support[j], t, sp, bern) * s_eff;
      }
    }
    CHECK(defect.cwiseAbs().maxCoeff() < 1e-10);
  }
}
