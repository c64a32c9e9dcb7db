#pragma once

// Per-observation Fredholm integral equation of the first kind for the
// correction function a(u, x):
//
//   integral over u' of a(u', x) K(u', u, x) dmu(u') = b(u, x)
//
// with kernel K(u', u, x) = pistar(u') * E[f(y,z|x,u') f(y,z|x,u) / I*] and
// forcing b(u, x) = E[observed_score(y,z,x) * f(y,z|x,u)], both expectations
// over the dominating (y, z) measure.  Discretized on the prior support as
// h K^T W a = b (trapezoid W for grid priors; h = 1, W = I for atom priors,
// where the system is exact rather than a quadrature).

#include <Eigen/Dense>

#include "semisens/model.hpp"
#include "semisens/quadrature.hpp"

namespace semisens {

struct FredholmSystem {
  Eigen::VectorXd support;       // prior support (u_0 < ... < u_K)
  Eigen::MatrixXd kernel;        // entry (i, j) = K(u'_i, u_j, x)
  Eigen::VectorXd quad_weights;  // diagonal of W
  Eigen::MatrixXd forcing;       // row j = b(u_j, x), (K+1) x q
  double h = 1.0;                // mesh factor (1 for atom priors)
  double alpha = 0.0;            // Tikhonov level used by solve_tikhonov

  // A = h K^T W, the matrix of the discretized equation A a = b.
  Eigen::MatrixXd lhs_matrix() const;
};

struct CorrectionFunction {
  Eigen::MatrixXd values;       // row i = a(u'_i, x), (K+1) x q
  double residual_norm = 0.0;   // ||A a - b||_F
  bool regularized = false;     // true when produced by solve_tikhonov
};

struct PicardDiagnostics {
  Eigen::VectorXd singular_values;  // of A, descending
  double condition = 0.0;           // sigma_max / sigma_min
  double capture_fraction = 0.0;    // ||b||^2 share on directions with
                                    // sigma_i > sqrt(alpha)
};

Eigen::MatrixXd build_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const Theta& theta, const SensitivityPoint& sp,
                             const WorkingPrior& prior, const ModelSpec& spec,
                             const HermiteRule& herm);

Eigen::MatrixXd build_forcing(const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Theta& theta, const SensitivityPoint& sp,
                              const WorkingPrior& prior, const ModelSpec& spec,
                              const HermiteRule& herm);

FredholmSystem build_system(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Theta& theta, const SensitivityPoint& sp,
                            const WorkingPrior& prior, const ModelSpec& spec,
                            const HermiteRule& herm, double alpha);

// Direct solve of A a = b via SVD; one factorization serves all q columns.
// Throws std::runtime_error "ill-posed; use tikhonov" when the condition
// estimate reaches 1e10.
CorrectionFunction solve_exact(const FredholmSystem& system);

// Ridge solve: a = (A^T A + alpha I)^{-1} A^T b.  Requires alpha > 0.
CorrectionFunction solve_tikhonov(const FredholmSystem& system);

PicardDiagnostics picard_diagnostics(const FredholmSystem& system);

// Posterior expectation of the correction at an observation:
// sum_k posterior_weights_k(y, z, x) * a[k, :].
Eigen::VectorXd correction_expectation(const CorrectionFunction& corr,
                                       double y, double z,
                                       const Eigen::Ref<const Eigen::VectorXd>& x,
                                       const Theta& theta,
                                       const SensitivityPoint& sp,
                                       const WorkingPrior& prior,
                                       const ModelSpec& spec);

}  // namespace semisens
