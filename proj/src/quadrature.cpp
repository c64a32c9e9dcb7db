#include "semisens/quadrature.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "semisens/mathutil.hpp"

namespace semisens {

Eigen::VectorXd trapezoid_weights(int cells) {
  if (cells < 1) {
    throw std::invalid_argument("trapezoid_weights: need at least one cell");
  }
  Eigen::VectorXd w = Eigen::VectorXd::Ones(cells + 1);
  w[0] = 0.5;
  w[cells] = 0.5;
  return w;
}

HermiteRule hermite_rule(int order) {
  if (order < 1 || order > 128) {
    throw std::invalid_argument("hermite_rule: order must be in [1, 128], got " +
                                std::to_string(order));
  }
  // Golub-Welsch: eigen-decompose the symmetric tridiagonal Jacobi matrix
  // with off-diagonal sqrt(k/2); nodes are eigenvalues, weights sqrt(pi)
  // times the squared first eigenvector components.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = std::sqrt(0.5 * k);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("hermite_rule: eigen decomposition failed");
  }
  HermiteRule rule;
  rule.order = order;
  rule.nodes = es.eigenvalues();
  rule.weights = Eigen::VectorXd(order);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < order; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = sqrt_pi * v0 * v0;
  }
  // Enforce exact symmetry of the computed rule about zero.
  for (int i = 0, j = order - 1; i < j; ++i, --j) {
    const double t = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -t;
    rule.nodes[j] = t;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  if (order % 2 == 1) {
    rule.nodes[order / 2] = 0.0;
  }
  return rule;
}

namespace {

// Shared driver: accumulates acc += E[g] with g evaluated cellwise
// (Bernoulli) or on Hermite nodes (Gaussian).
template <typename Value, typename Accumulate>
void yz_expectation_impl(const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                         const Theta& theta, const SensitivityPoint& sp,
                         const ModelSpec& spec, const HermiteRule& herm,
                         const std::function<Value(double, double)>& g,
                         const Accumulate& add) {
  if (spec.outcome == OutcomeFamily::bernoulli_logit) {
    for (double z : {0.0, 1.0}) {
      const double pz = std::exp(log_density_z(z, x, u, theta, sp));
      const double mu1 = expit(eta_outcome(theta, x, z, u, sp));
      add(g(1.0, z), pz * mu1);
      add(g(0.0, z), pz * (1.0 - mu1));
    }
    return;
  }
  if (herm.order < 1) {
    throw std::invalid_argument("yz_expectation: Hermite rule required");
  }
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  const double s2sigma = std::sqrt(2.0) * theta.sigma;
  for (double z : {0.0, 1.0}) {
    const double pz = std::exp(log_density_z(z, x, u, theta, sp));
    const double eta = eta_outcome(theta, x, z, u, sp);
    for (int t = 0; t < herm.order; ++t) {
      const double y = eta + s2sigma * herm.nodes[t];
      add(g(y, z), pz * inv_sqrt_pi * herm.weights[t]);
    }
  }
}

}  // namespace

double yz_expectation(const std::function<double(double, double)>& g,
                      const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                      const Theta& theta, const SensitivityPoint& sp,
                      const ModelSpec& spec, const HermiteRule& herm) {
  double acc = 0.0;
  yz_expectation_impl<double>(
      x, u, theta, sp, spec, herm, g, [&](double v, double w) {
        if (!std::isfinite(v)) {
          throw std::runtime_error(
              "yz_expectation: integrand returned a non-finite value");
        }
        acc += w * v;
      });
  return acc;
}

Eigen::VectorXd yz_expectation_vec(
    const std::function<Eigen::VectorXd(double, double)>& g, int dim,
    const Eigen::Ref<const Eigen::VectorXd>& x, double u, const Theta& theta,
    const SensitivityPoint& sp, const ModelSpec& spec,
    const HermiteRule& herm) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
  yz_expectation_impl<Eigen::VectorXd>(
      x, u, theta, sp, spec, herm, g, [&](const Eigen::VectorXd& v, double w) {
        if (!v.allFinite()) {
          throw std::runtime_error(
              "yz_expectation: integrand returned a non-finite value");
        }
        acc.noalias() += w * v;
      });
  return acc;
}

MixtureYRule mixture_y_rule(const Eigen::Ref<const Eigen::VectorXd>& x,
                            double z, const Theta& theta,
                            const SensitivityPoint& sp,
                            const WorkingPrior& prior, const HermiteRule& herm,
                            double window_frac, double pad) {
  if (!(window_frac > 0.0) || !(pad > 0.0)) {
    throw std::invalid_argument("mixture_y_rule: window_frac and pad must be positive");
  }
  const double sigma = theta.sigma;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int k = 0; k < prior.size(); ++k) {
    const double eta = eta_outcome(theta, x, z, prior.support[k], sp);
    lo = std::min(lo, eta);
    hi = std::max(hi, eta);
  }
  lo -= pad * sigma;
  hi += pad * sigma;
  const double s = window_frac * sigma;
  const int ncen = static_cast<int>(std::ceil((hi - lo) / s)) + 1;
  const Eigen::VectorXd centers = Eigen::VectorXd::LinSpaced(ncen, lo, hi);
  const double spacing = (hi - lo) / (ncen - 1);

  MixtureYRule rule;
  const int npts = ncen * herm.order;
  rule.points.resize(npts);
  rule.weights.resize(npts);
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  const double s2s = std::sqrt(2.0) * s;
  int idx = 0;
  for (int m = 0; m < ncen; ++m) {
    for (int t = 0; t < herm.order; ++t, ++idx) {
      rule.points[idx] = centers[m] + s2s * herm.nodes[t];
      rule.weights[idx] = inv_sqrt_pi * herm.weights[t];
    }
  }
  // Divide by the partition-of-unity normalizer M(y) = sum_m phi(y; c_m, s):
  // integrating f/M against each window then reproduces the integral of f
  // exactly up to per-window Hermite error, with no truncation bias over the
  // covered range.  Away from the edges the equispaced Gaussian comb has the
  // Poisson-summation value (1 + 2 q cos(2 pi (y - lo) / spacing)) / spacing
  // with q = exp(-2 pi^2 (s / spacing)^2); spacing <= s keeps the dropped
  // terms below 1e-33.  Near the edges the comb is summed directly (windows
  // beyond 10 sd contribute < 1e-22 and are skipped).
  const double norm = 1.0 / (s * std::sqrt(2.0 * M_PI));
  const double q_comb =
      std::exp(-2.0 * M_PI * M_PI * (s / spacing) * (s / spacing));
  const double edge = 12.0 * s;
  for (int i = 0; i < npts; ++i) {
    const double y = rule.points[i];
    double M;
    if (y - lo > edge && hi - y > edge) {
      M = (1.0 + 2.0 * q_comb * std::cos(2.0 * M_PI * (y - lo) / spacing)) /
          spacing;
    } else {
      const int m_lo = std::max(
          0, static_cast<int>(std::floor((y - 10.0 * s - lo) / spacing)));
      const int m_hi = std::min(
          ncen - 1, static_cast<int>(std::ceil((y + 10.0 * s - lo) / spacing)));
      M = 0.0;
      for (int m = m_lo; m <= m_hi; ++m) {
        const double r = (y - centers[m]) / s;
        M += norm * std::exp(-0.5 * r * r);
      }
    }
    rule.weights[i] /= M;
  }
  return rule;
}

}  // namespace semisens
