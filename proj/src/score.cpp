#include "semisens/score.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "semisens/mathutil.hpp"

namespace semisens {

Eigen::VectorXd full_score(double y, double z,
                           const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                           const Theta& theta, const SensitivityPoint& sp,
                           const ModelSpec& spec) {
  const int p = theta.p();
  Eigen::VectorXd s(theta.q());
  const double eta1 = eta_outcome(theta, x, z, u, sp);
  double resid1;  // (y - mu1) / sigma^2
  if (spec.outcome == OutcomeFamily::bernoulli_logit) {
    resid1 = y - expit(eta1);
  } else {
    resid1 = (y - eta1) / (theta.sigma * theta.sigma);
  }
  const double mu2 = expit(eta_treatment(theta, x, u, sp));
  s.head(p) = resid1 * x;
  s[p] = resid1 * z;
  s.tail(p) = (z - mu2) * x;
  return s;
}

double log_istar(double y, double z, const Eigen::Ref<const Eigen::VectorXd>& x,
                 const Theta& theta, const SensitivityPoint& sp,
                 const WorkingPrior& prior, const ModelSpec& spec) {
  const int K = prior.size();
  Eigen::VectorXd terms(K);
  for (int k = 0; k < K; ++k) {
    const double w = prior.weights[k];
    terms[k] = (w > 0.0)
                   ? std::log(w) + log_joint_density(y, z, x, prior.support[k],
                                                     theta, sp, spec)
                   : -std::numeric_limits<double>::infinity();
  }
  const double v = log_sum_exp(terms);
  if (!std::isfinite(v)) {
    throw std::runtime_error(
        "istar: degenerate likelihood at observation (all prior components "
        "vanish)");
  }
  return v;
}

double istar(double y, double z, const Eigen::Ref<const Eigen::VectorXd>& x,
             const Theta& theta, const SensitivityPoint& sp,
             const WorkingPrior& prior, const ModelSpec& spec) {
  return std::exp(log_istar(y, z, x, theta, sp, prior, spec));
}

Eigen::VectorXd posterior_weights(double y, double z,
                                  const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const Theta& theta, const SensitivityPoint& sp,
                                  const WorkingPrior& prior,
                                  const ModelSpec& spec) {
  const int K = prior.size();
  Eigen::VectorXd logs(K);
  double m = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    const double w = prior.weights[k];
    logs[k] = (w > 0.0)
                  ? std::log(w) + log_joint_density(y, z, x, prior.support[k],
                                                    theta, sp, spec)
                  : -std::numeric_limits<double>::infinity();
    m = std::max(m, logs[k]);
  }
  if (!std::isfinite(m)) {
    throw std::runtime_error(
        "posterior_weights: degenerate likelihood at observation");
  }
  Eigen::VectorXd w(K);
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    w[k] = std::exp(logs[k] - m);
    total += w[k];
  }
  return w / total;
}

Eigen::VectorXd observed_score(double y, double z,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               const Theta& theta, const SensitivityPoint& sp,
                               const WorkingPrior& prior,
                               const ModelSpec& spec) {
  const Eigen::VectorXd w = posterior_weights(y, z, x, theta, sp, prior, spec);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(theta.q());
  for (int k = 0; k < prior.size(); ++k) {
    if (w[k] == 0.0) continue;
    s.noalias() +=
        w[k] * full_score(y, z, x, prior.support[k], theta, sp, spec);
  }
  return s;
}

}  // namespace semisens
