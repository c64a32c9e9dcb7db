#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "semisens/glm.hpp"

using namespace semisens;

namespace {

// fixed 20-row design shared by the reference fits below; the expected
// coefficients were computed with an unrelated IRLS implementation
struct Fixture {
  Eigen::VectorXd y, z, x1, x2;
  Eigen::MatrixXd X;    // (1, x1, x2)
  Eigen::MatrixXd Dz;   // (1, x1, x2, z)
  Fixture() {
    const double x1v[] = {0.12, 0.47, 0.91, 0.33, 0.68, 0.05, 0.79,
                          0.26, 0.54, 0.88, 0.15, 0.61, 0.42, 0.97,
                          0.08, 0.73, 0.36, 0.59, 0.22, 0.84};
    const double x2v[] = {0.55, 0.13, 0.72, 0.94, 0.31, 0.48, 0.09,
                          0.66, 0.27, 0.81, 0.38, 0.92, 0.17, 0.44,
                          0.63, 0.29, 0.85, 0.06, 0.71, 0.52};
    const double zv[] = {1, 0, 1, 1, 0, 0, 1, 0, 1, 1,
                         0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const double yv[] = {1, 0, 1, 0, 1, 0, 1, 1, 0, 1,
                         0, 1, 0, 1, 0, 0, 1, 1, 0, 1};
    const int n = 20;
    y.resize(n); z.resize(n); x1.resize(n); x2.resize(n);
    X.resize(n, 3); Dz.resize(n, 4);
    for (int i = 0; i < n; ++i) {
      y[i] = yv[i]; z[i] = zv[i]; x1[i] = x1v[i]; x2[i] = x2v[i];
      X(i, 0) = 1.0; X(i, 1) = x1v[i]; X(i, 2) = x2v[i];
      Dz(i, 0) = 1.0; Dz(i, 1) = x1v[i]; Dz(i, 2) = x2v[i]; Dz(i, 3) = zv[i];
    }
  }
};

}  // namespace

TEST_CASE("logistic regression matches the reference solver") {
  Fixture f;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(20);
  Eigen::VectorXd off = Eigen::VectorXd::Zero(20);

  GlmFit fy = glm_logistic(f.y, f.Dz, w, off);
  REQUIRE(fy.converged);
  CHECK(fy.coef[0] == doctest::Approx(-3.69320605930842).epsilon(1e-8));
  CHECK(fy.coef[1] == doctest::Approx(5.27176226945429).epsilon(1e-8));
  CHECK(fy.coef[2] == doctest::Approx(2.71487049294108).epsilon(1e-8));
  CHECK(fy.coef[3] == doctest::Approx(0.187757659943961).epsilon(1e-8));

  GlmFit fz = glm_logistic(f.z, f.X, w, off);
  REQUIRE(fz.converged);
  CHECK(fz.coef[0] == doctest::Approx(-4.0862318291415).epsilon(1e-8));
  CHECK(fz.coef[1] == doctest::Approx(7.00156234789808).epsilon(1e-8));
  CHECK(fz.coef[2] == doctest::Approx(2.06287127071434).epsilon(1e-8));
}

TEST_CASE("weighted logistic regression with offset matches the reference") {
  Fixture f;
  Eigen::VectorXd w(20);
  w << 1.0, 2.0, 0.5, 1.5, 1.0, 1.0, 2.5, 0.5, 1.0, 1.0, 3.0, 0.5, 1.0, 1.0,
      0.5, 2.0, 1.0, 1.5, 1.0, 0.5;
  Eigen::VectorXd off = 0.3 * f.z.array() - 0.1;
  GlmFit fit = glm_logistic(f.y, f.Dz, w, off);
  REQUIRE(fit.converged);
  CHECK(fit.coef[0] == doctest::Approx(-3.48922941842802).epsilon(1e-8));
  CHECK(fit.coef[1] == doctest::Approx(5.01284277067047).epsilon(1e-8));
  CHECK(fit.coef[2] == doctest::Approx(1.65267724527625).epsilon(1e-8));
  CHECK(fit.coef[3] == doctest::Approx(0.10915891265075).epsilon(1e-8));
}

TEST_CASE("gaussian least squares matches the reference") {
  Fixture f;
  Eigen::VectorXd noise(20);
  noise << 0.05, -0.12, 0.31, -0.22, 0.08, 0.17, -0.31, 0.02, -0.09, 0.25,
      -0.18, 0.11, 0.04, -0.27, 0.19, -0.06, 0.13, -0.15, 0.22, -0.08;
  Eigen::VectorXd yg = 0.5 + 1.2 * f.x1.array() - 0.4 * f.x2.array() +
                       2.0 * f.z.array() + noise.array();
  Eigen::VectorXd w = Eigen::VectorXd::Ones(20);
  Eigen::VectorXd off = Eigen::VectorXd::Zero(20);
  GlmFit fit = glm_gaussian(yg, f.Dz, w, off);
  REQUIRE(fit.converged);
  CHECK(fit.coef[0] == doctest::Approx(0.35762269904874).epsilon(1e-10));
  CHECK(fit.coef[1] == doctest::Approx(1.29981208748263).epsilon(1e-10));
  CHECK(fit.coef[2] == doctest::Approx(-0.0382173163812303).epsilon(1e-8));
  CHECK(fit.coef[3] == doctest::Approx(1.84972028144224).epsilon(1e-10));
}

TEST_CASE("offset shifts the intercept exactly") {
  Fixture f;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(20);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(20);
  Eigen::VectorXd off = Eigen::VectorXd::Constant(20, 0.7);
  GlmFit base = glm_logistic(f.y, f.Dz, w, zero);
  GlmFit shifted = glm_logistic(f.y, f.Dz, w, off);
  CHECK(shifted.coef[0] == doctest::Approx(base.coef[0] - 0.7).epsilon(1e-8));
  CHECK(shifted.coef[1] == doctest::Approx(base.coef[1]).epsilon(1e-8));
}

TEST_CASE("integer weights equal row duplication") {
  Fixture f;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(20);
  w[3] = 3.0;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(20);
  GlmFit weighted = glm_logistic(f.y, f.Dz, w, zero);

  Eigen::VectorXd y2(22);
  Eigen::MatrixXd D2(22, 4);
  y2.head(20) = f.y;
  D2.topRows(20) = f.Dz;
  y2[20] = f.y[3];
  y2[21] = f.y[3];
  D2.row(20) = f.Dz.row(3);
  D2.row(21) = f.Dz.row(3);
  GlmFit dup = glm_logistic(y2, D2, Eigen::VectorXd::Ones(22),
                            Eigen::VectorXd::Zero(22));
  CHECK((weighted.coef - dup.coef).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("separation and rank deficiency are rejected") {
  // perfectly separated outcome
  const int n = 10;
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n),
                        off = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd D(n, 2);
  for (int i = 0; i < n; ++i) {
    const double x = i < 5 ? -1.0 - 0.1 * i : 1.0 + 0.1 * i;
    D(i, 0) = 1.0;
    D(i, 1) = x;
    y[i] = x > 0 ? 1.0 : 0.0;
  }
  CHECK_THROWS_AS((void)glm_logistic(y, D, w, off), std::runtime_error);

  // duplicated column
  Eigen::MatrixXd Ddup(n, 2);
  Ddup.col(0) = Eigen::VectorXd::Ones(n);
  Ddup.col(1) = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd yb = Eigen::VectorXd::Zero(n);
  yb.head(4).setOnes();
  CHECK_THROWS(glm_logistic(yb, Ddup, w, off));
}

TEST_CASE("glm_init stacks the two marginal fits") {
  Fixture f;
  Dataset d;
  d.y = f.y;
  d.z = f.z;
  d.X = f.X;
  ModelSpec bern;
  Theta t = glm_init(d, Eigen::VectorXd::Ones(20), bern);
  CHECK(t.lambda.size() == 3);
  CHECK(t.kappa.size() == 3);
  CHECK(t.lambda[0] == doctest::Approx(-3.69320605930842).epsilon(1e-8));
  CHECK(t.beta == doctest::Approx(0.187757659943961).epsilon(1e-8));
  CHECK(t.kappa[1] == doctest::Approx(7.00156234789808).epsilon(1e-8));
}
