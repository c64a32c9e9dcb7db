#pragma once

// Parametric maximum-likelihood comparator: treats the confounder as a latent
// Bernoulli(p) variable with p fixed and maximizes the observed-data
// likelihood by EM at a fixed sensitivity point.  Binary outcomes only.

#include <vector>

#include <Eigen/Dense>

#include "semisens/model.hpp"

namespace semisens {

struct EmOptions {
  double p_u = 0.5;         // P(U = 1), held fixed
  int max_iter = 500;
  double tol = 1e-8;        // on successive log-likelihood increments
  double hess_step = 1e-4;  // relative step for the observed information
};

struct EmResult {
  Theta theta_hat;
  Eigen::MatrixXd vcov;     // inverse observed information
  double beta_hat = 0.0;
  double beta_se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.95;
  double loglik = 0.0;
  std::vector<double> loglik_trace;  // one entry per iteration, nondecreasing
  int iterations = 0;
  bool converged = false;
};

// Observed-data log-likelihood under the two-point latent model.
double em_loglik(const Dataset& data, const Theta& theta,
                 const SensitivityPoint& sp, double p_u);

// EM iteration: E-step posterior responsibilities for U = 1, M-step two
// weighted logistic regressions on duplicated rows with offsets delta * u and
// gamma * u.  A log-likelihood decrease beyond 1e-10 aborts with an error.
EmResult em_fit(const Dataset& data, const SensitivityPoint& sp,
                const EmOptions& opts, double level = 0.95);

}  // namespace semisens
