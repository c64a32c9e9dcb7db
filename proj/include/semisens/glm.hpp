#pragma once

// Weighted GLM fitting with offsets: logistic regression by iteratively
// reweighted least squares and Gaussian-identity weighted least squares.
// Used for estimator initialization at the no-confounding point and as the
// M-step solver of the EM baseline.

#include <Eigen/Dense>

#include "semisens/model.hpp"

namespace semisens {

struct GlmFit {
  Eigen::VectorXd coef;
  int iterations = 0;
  bool converged = false;
};

// Logistic regression of y on D with per-row weights and offset; IRLS to
// coefficient tolerance tol.  Throws on rank-deficient design or suspected
// separation (diverging linear predictor without convergence).
GlmFit glm_logistic(const Eigen::VectorXd& y, const Eigen::MatrixXd& D,
                    const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& offset, int max_iter = 100,
                    double tol = 1e-10);

// Weighted least squares of y on D with offset (Gaussian-identity GLM).
GlmFit glm_gaussian(const Eigen::VectorXd& y, const Eigen::MatrixXd& D,
                    const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& offset);

// GLM solution at the no-confounding point: outcome regressed on (X, z),
// treatment on X, with per-row weights.  This is both the Newton initializer
// and the exact root of the estimating equations at delta = gamma = 0.
Theta glm_init(const Dataset& data, const Eigen::VectorXd& row_weights,
               const ModelSpec& spec, double sigma = 1.0);

}  // namespace semisens
