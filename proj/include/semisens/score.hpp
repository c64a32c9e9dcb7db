#pragma once

// Score functions for theta = (lambda, beta, kappa).  full_score is the
// complete-data score treating the confounder value u as known; observed
// score integrates it against the posterior of U given (y, z, x) under the
// working prior.  istar is the observed-data likelihood under that prior,
// i.e. the prior mixture of the conditional joint densities.

#include <Eigen/Dense>

#include "semisens/model.hpp"

namespace semisens {

// Complete-data score at confounder value u, packed as (lambda, beta, kappa):
// outcome block (y - mu1) * (x, z) / sigma^2, treatment block (z - mu2) * x.
Eigen::VectorXd full_score(double y, double z,
                           const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                           const Theta& theta, const SensitivityPoint& sp,
                           const ModelSpec& spec);

// log of the observed-data likelihood sum_k pi_k f(y, z | x, u_k), via
// log-sum-exp.  Throws std::runtime_error if every mixture component
// underflows to an effective zero.
double log_istar(double y, double z, const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Theta& theta, const SensitivityPoint& sp,
                 const WorkingPrior& prior, const ModelSpec& spec);
double istar(double y, double z, const Eigen::Ref<const Eigen::VectorXd>& x,
             const Theta& theta, const SensitivityPoint& sp,
             const WorkingPrior& prior, const ModelSpec& spec);

// Posterior mass of each prior atom given the observation: proportional to
// pi_k f(y, z | x, u_k); sums to one.
Eigen::VectorXd posterior_weights(double y, double z,
                                  const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const Theta& theta, const SensitivityPoint& sp,
                                  const WorkingPrior& prior,
                                  const ModelSpec& spec);

// Posterior expectation of full_score over the working prior.
Eigen::VectorXd observed_score(double y, double z,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               const Theta& theta, const SensitivityPoint& sp,
                               const WorkingPrior& prior, const ModelSpec& spec);

}  // namespace semisens
