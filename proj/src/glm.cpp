#include "semisens/glm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "semisens/mathutil.hpp"

namespace semisens {

namespace {

void check_shapes(const Eigen::VectorXd& y, const Eigen::MatrixXd& D,
                  const Eigen::VectorXd& weights,
                  const Eigen::VectorXd& offset, const char* who) {
  if (D.rows() != y.size() || weights.size() != y.size() ||
      offset.size() != y.size()) {
    throw std::invalid_argument(std::string(who) + ": inconsistent row counts");
  }
  if (D.cols() == 0 || D.rows() < D.cols()) {
    throw std::invalid_argument(std::string(who) +
                                ": need at least as many rows as columns");
  }
  if (weights.minCoeff() < 0.0) {
    throw std::invalid_argument(std::string(who) + ": negative weight");
  }
}

// Solves the weighted least-squares problem min ||sqrt(w) (r - D c)||^2 by
// column-pivoted QR, throwing on rank deficiency.
Eigen::VectorXd weighted_solve(const Eigen::MatrixXd& D,
                               const Eigen::VectorXd& w,
                               const Eigen::VectorXd& r, const char* who) {
  const Eigen::VectorXd sw = w.array().sqrt();
  Eigen::MatrixXd Dw = sw.asDiagonal() * D;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Dw);
  if (qr.rank() < D.cols()) {
    throw std::runtime_error(std::string(who) +
                             ": design matrix is rank deficient (rank " +
                             std::to_string(qr.rank()) + " of " +
                             std::to_string(D.cols()) + ")");
  }
  return qr.solve((sw.array() * r.array()).matrix());
}

}  // namespace

GlmFit glm_logistic(const Eigen::VectorXd& y, const Eigen::MatrixXd& D,
                    const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& offset, int max_iter, double tol) {
  check_shapes(y, D, weights, offset, "glm_logistic");
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(D.cols());

  GlmFit fit;
  fit.coef = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta(n), mu(n), irls_w(n), resp(n);
  for (int it = 1; it <= max_iter; ++it) {
    eta = D * fit.coef + offset;
    double max_abs_eta = 0.0;
    for (int i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      // clamp the curvature weight so pinned fitted values cannot zero out
      // a row entirely and stall the working response
      irls_w[i] = weights[i] * std::max(mu[i] * (1.0 - mu[i]), 1e-10);
      resp[i] = (eta[i] - offset[i]) + (y[i] - mu[i]) / std::max(mu[i] * (1.0 - mu[i]), 1e-10);
      max_abs_eta = std::max(max_abs_eta, std::abs(eta[i]));
    }
    const Eigen::VectorXd next = weighted_solve(D, irls_w, resp, "glm_logistic");
    const double step = (next - fit.coef).lpNorm<Eigen::Infinity>();
    fit.coef = next;
    fit.iterations = it;
    if (step < tol) {
      fit.converged = true;
      return fit;
    }
    if (max_abs_eta > 30.0) {
      throw std::runtime_error(
          "glm_logistic: linear predictor exceeded 30 before convergence "
          "(possible separation)");
    }
  }
  throw std::runtime_error(
      "glm_logistic: IRLS did not converge in " + std::to_string(max_iter) +
      " iterations (possible separation)");
}

GlmFit glm_gaussian(const Eigen::VectorXd& y, const Eigen::MatrixXd& D,
                    const Eigen::VectorXd& weights,
                    const Eigen::VectorXd& offset) {
  check_shapes(y, D, weights, offset, "glm_gaussian");
  GlmFit fit;
  fit.coef = weighted_solve(D, weights, y - offset, "glm_gaussian");
  fit.iterations = 1;
  fit.converged = true;
  return fit;
}

Theta glm_init(const Dataset& data, const Eigen::VectorXd& row_weights,
               const ModelSpec& spec, double sigma) {
  data.validate(spec.outcome);
  if (row_weights.size() != data.n()) {
    throw std::invalid_argument("glm_init: weight length mismatch");
  }
  const int n = data.n();
  const int p = data.p();
  Eigen::MatrixXd Dy(n, p + 1);
  Dy.leftCols(p) = data.X;
  Dy.col(p) = data.z;
  const Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);

  Theta theta;
  theta.sigma = sigma;
  if (spec.outcome == OutcomeFamily::bernoulli_logit) {
    const GlmFit outcome = glm_logistic(data.y, Dy, row_weights, offset);
    theta.lambda = outcome.coef.head(p);
    theta.beta = outcome.coef[p];
  } else {
    const GlmFit outcome = glm_gaussian(data.y, Dy, row_weights, offset);
    theta.lambda = outcome.coef.head(p);
    theta.beta = outcome.coef[p];
  }
  const GlmFit treat = glm_logistic(data.z, data.X, row_weights, offset);
  theta.kappa = treat.coef;
  theta.validate();
  return theta;
}

}  // namespace semisens
