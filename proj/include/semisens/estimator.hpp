#pragma once

// Efficient-score estimation at a fixed sensitivity point: per-observation
// efficient scores (observed score minus the posterior expectation of the
// Fredholm correction), Newton root finding with a finite-difference
// Jacobian, sandwich covariance, (delta, gamma) sweeps with warm starts, and
// tipping-point search along the diagonal path delta = gamma = t.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semisens/model.hpp"
#include "semisens/quadrature.hpp"

namespace semisens {

struct FitOptions {
  WorkingPrior prior;
  double alpha = 0.1;           // Tikhonov level for grid priors
  int max_iter = 100;
  double tol = 1e-8;            // on ||mean efficient score||_inf
  double fd_step = 1e-5;        // relative central-difference step
  int max_halvings = 20;        // step-halving limit per Newton iteration
  int hermite_order = 20;       // Gaussian-outcome y-integrals
  double sigma = 1.0;           // fixed outcome scale, Gaussian family only
  std::optional<Eigen::VectorXd> init;  // packed theta; GLM fit when absent
};

struct FitResult {
  Theta theta_hat;
  Eigen::MatrixXd vcov;       // q x q sandwich covariance of theta_hat
  double beta_hat = 0.0;
  double beta_se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.95;
  Eigen::MatrixXd scores;     // n x q efficient scores at theta_hat
  Eigen::MatrixXd influence;  // n x q rows -J^{-1} s_i
  int iterations = 0;
  bool converged = false;
  double final_norm = 0.0;    // ||mean score||_inf at exit
};

// Efficient score for one observation.  At delta = gamma = 0 this is exactly
// the stacked GLM score (the correction vanishes); otherwise the Fredholm
// system is built and solved at (x, theta): direct solve for atom priors,
// Tikhonov for grid priors.
Eigen::VectorXd efficient_score(double y, double z,
                                const Eigen::Ref<const Eigen::VectorXd>& x,
                                const Theta& theta, const SensitivityPoint& sp,
                                const FitOptions& opts, const ModelSpec& spec);

// Sandwich covariance (1/n) J^{-1} M J^{-T} with M = (1/n) sum s_i s_i^T.
Eigen::MatrixXd sandwich_variance(const Eigen::MatrixXd& scores,
                                  const Eigen::MatrixXd& jacobian, int n);

// Newton solve of (1/n) sum_i efficient_score(theta) = 0.  Non-convergence
// is reported through the converged flag; a singular Jacobian throws.
FitResult fit(const Dataset& data, const SensitivityPoint& sp,
              const FitOptions& opts, const ModelSpec& spec,
              double level = 0.95);

// Frequency-weighted variant solving (sum_i w_i s_i) / (sum_i w_i) = 0; used
// for population-level (integrated) versions of the estimating equations.
FitResult fit_weighted(const Dataset& data, const Eigen::VectorXd& row_weights,
                       const SensitivityPoint& sp, const FitOptions& opts,
                       const ModelSpec& spec, double level = 0.95);

struct SweepRow {
  SensitivityPoint sp;
  bool converged = false;
  std::string message;          // failure reason when not converged
  std::optional<FitResult> fit; // present when the solve ran to completion
};

// One fit per grid point.  Points are solved nearest-first (each warm-started
// from the closest already-solved point); returned rows follow input order.
std::vector<SweepRow> sweep(const Dataset& data,
                            const std::vector<SensitivityPoint>& grid,
                            const FitOptions& opts, const ModelSpec& spec,
                            double level = 0.95);

struct TippingResult {
  std::optional<double> t_star;  // smallest t with CI covering zero, if any
  double resolution = 0.01;
  int evaluations = 0;
};

// Bisection along delta = gamma = t over [0, t_max] for the smallest t whose
// confidence interval contains zero.
TippingResult tipping_point(const Dataset& data, double t_max,
                            const FitOptions& opts, const ModelSpec& spec,
                            double level = 0.95, double resolution = 0.01);

}  // namespace semisens
