#include "semisens/em.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "semisens/glm.hpp"
#include "semisens/mathutil.hpp"
#include "semisens/model.hpp"

namespace semisens {
namespace {

constexpr double kMonotoneSlack = 1e-10;

// log P(y, z | x, u) for the binary-outcome model.
double log_cell(double y, double z, const Eigen::Ref<const Eigen::VectorXd>& x,
                double u, const Theta& theta, const SensitivityPoint& sp) {
  const ModelSpec spec;  // Bernoulli outcome
  return log_joint_density(y, z, x, u, theta, sp, spec);
}

void check_em_inputs(const Dataset& data, const SensitivityPoint& sp,
                     const EmOptions& opts) {
  data.validate(OutcomeFamily::bernoulli_logit);
  if (!(opts.p_u > 0.0 && opts.p_u < 1.0)) {
    throw std::invalid_argument("em_fit: p_u must lie strictly in (0, 1)");
  }
  if (opts.max_iter < 1) {
    throw std::invalid_argument("em_fit: max_iter must be at least 1");
  }
  if (!(opts.tol > 0.0) || !(opts.hess_step > 0.0)) {
    throw std::invalid_argument("em_fit: tol and hess_step must be positive");
  }
  if (!std::isfinite(sp.delta) || !std::isfinite(sp.gamma)) {
    throw std::invalid_argument("em_fit: sensitivity point must be finite");
  }
}

}  // namespace

double em_loglik(const Dataset& data, const Theta& theta,
                 const SensitivityPoint& sp, double p_u) {
  const double lp1 = std::log(p_u);
  const double lp0 = std::log1p(-p_u);
  double ll = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    const Eigen::VectorXd xi = data.X.row(i).transpose();
    const double a = lp1 + log_cell(data.y(i), data.z(i), xi, 1.0, theta, sp);
    const double b = lp0 + log_cell(data.y(i), data.z(i), xi, 0.0, theta, sp);
    const double m = std::max(a, b);
    if (!std::isfinite(m)) {
      throw std::runtime_error(
          "em_fit: likelihood vanished at observation " + std::to_string(i));
    }
    ll += m + std::log(std::exp(a - m) + std::exp(b - m));
  }
  return ll;
}

EmResult em_fit(const Dataset& data, const SensitivityPoint& sp,
                const EmOptions& opts, double level) {
  check_em_inputs(data, sp, opts);
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("em_fit: confidence level must lie in (0, 1)");
  }
  const int n = data.n();
  const int p = data.p();
  const int q = 2 * p + 1;

  // Duplicated-row design matrices: first block u = 1, second block u = 0.
  Eigen::MatrixXd d_out(2 * n, p + 1);
  d_out.block(0, 0, n, p) = data.X;
  d_out.block(0, p, n, 1) = data.z;
  d_out.block(n, 0, n, p + 1) = d_out.block(0, 0, n, p + 1);
  Eigen::MatrixXd d_trt(2 * n, p);
  d_trt.topRows(n) = data.X;
  d_trt.bottomRows(n) = data.X;
  Eigen::VectorXd y_dup(2 * n);
  y_dup << data.y, data.y;
  Eigen::VectorXd z_dup(2 * n);
  z_dup << data.z, data.z;
  Eigen::VectorXd off_out = Eigen::VectorXd::Zero(2 * n);
  off_out.head(n).setConstant(sp.delta);
  Eigen::VectorXd off_trt = Eigen::VectorXd::Zero(2 * n);
  off_trt.head(n).setConstant(sp.gamma);

  const ModelSpec spec;
  Theta theta = glm_init(data, Eigen::VectorXd::Ones(n), spec, 1.0);

  EmResult out;
  out.level = level;
  double ll = em_loglik(data, theta, sp, opts.p_u);
  out.loglik_trace.push_back(ll);

  const double lp1 = std::log(opts.p_u);
  const double lp0 = std::log1p(-opts.p_u);
  Eigen::VectorXd resp(2 * n);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // E-step: responsibilities for u = 1 given the current parameters.
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = data.X.row(i).transpose();
      const double a =
          lp1 + log_cell(data.y(i), data.z(i), xi, 1.0, theta, sp);
      const double b =
          lp0 + log_cell(data.y(i), data.z(i), xi, 0.0, theta, sp);
      const double r = expit(a - b);
      resp(i) = r;
      resp(n + i) = 1.0 - r;
    }

    // M-step: weighted logistic fits with known confounder offsets.
    Theta next = theta;
    const GlmFit out_fit = glm_logistic(y_dup, d_out, resp, off_out);
    next.lambda = out_fit.coef.head(p);
    next.beta = out_fit.coef(p);
    const GlmFit trt_fit = glm_logistic(z_dup, d_trt, resp, off_trt);
    next.kappa = trt_fit.coef;

    const double ll_next = em_loglik(data, next, sp, opts.p_u);
    if (ll_next < ll - kMonotoneSlack) {
      throw std::runtime_error(
          "em_fit: log-likelihood decreased at iteration " +
          std::to_string(iter + 1) + " (" + std::to_string(ll) + " -> " +
          std::to_string(ll_next) + ")");
    }
    theta = next;
    out.loglik_trace.push_back(ll_next);
    ++out.iterations;
    const double gain = ll_next - ll;
    ll = ll_next;
    if (gain < opts.tol) {
      out.converged = true;
      break;
    }
  }

  out.theta_hat = theta;
  out.loglik = ll;

  // Observed information via central differences of the log-likelihood.
  Eigen::VectorXd packed = theta.pack();
  Eigen::VectorXd step(q);
  for (int j = 0; j < q; ++j) {
    step(j) = opts.hess_step * std::max(1.0, std::abs(packed(j)));
  }
  auto ll_at = [&](const Eigen::VectorXd& v) {
    return em_loglik(data, Theta::unpack(v, 1.0), sp, opts.p_u);
  };
  Eigen::MatrixXd hess(q, q);
  const double ll0 = ll_at(packed);
  for (int j = 0; j < q; ++j) {
    Eigen::VectorXd up = packed;
    Eigen::VectorXd dn = packed;
    up(j) += step(j);
    dn(j) -= step(j);
    hess(j, j) = (ll_at(up) - 2.0 * ll0 + ll_at(dn)) / (step(j) * step(j));
  }
  for (int j = 0; j < q; ++j) {
    for (int k = j + 1; k < q; ++k) {
      Eigen::VectorXd pp = packed, pm = packed, mp = packed, mm = packed;
      pp(j) += step(j);
      pp(k) += step(k);
      pm(j) += step(j);
      pm(k) -= step(k);
      mp(j) -= step(j);
      mp(k) += step(k);
      mm(j) -= step(j);
      mm(k) -= step(k);
      const double v = (ll_at(pp) - ll_at(pm) - ll_at(mp) + ll_at(mm)) /
                       (4.0 * step(j) * step(k));
      hess(j, k) = v;
      hess(k, j) = v;
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(-hess);
  if (!lu.isInvertible()) {
    throw std::runtime_error(
        "em_fit: observed information singular at the EM solution");
  }
  out.vcov = lu.inverse();
  const double var_beta = out.vcov(p, p);
  if (!(var_beta > 0.0)) {
    throw std::runtime_error(
        "em_fit: observed information not positive definite at the EM "
        "solution");
  }
  out.beta_hat = packed(p);
  out.beta_se = std::sqrt(var_beta);
  const double zq = normal_quantile(0.5 * (1.0 + level));
  out.ci_lo = out.beta_hat - zq * out.beta_se;
  out.ci_hi = out.beta_hat + zq * out.beta_se;
  return out;
}

}  // namespace semisens
