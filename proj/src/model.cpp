#include "semisens/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "semisens/mathutil.hpp"

namespace semisens {

Eigen::VectorXd Theta::pack() const {
  Eigen::VectorXd v(q());
  v.head(p()) = lambda;
  v[p()] = beta;
  v.tail(p()) = kappa;
  return v;
}

Theta Theta::unpack(const Eigen::VectorXd& v, double sigma) {
  if (v.size() < 3 || v.size() % 2 == 0) {
    throw std::invalid_argument(
        "Theta::unpack: packed vector must have odd length 2p+1 >= 3, got " +
        std::to_string(v.size()));
  }
  const int p = static_cast<int>((v.size() - 1) / 2);
  Theta t;
  t.lambda = v.head(p);
  t.beta = v[p];
  t.kappa = v.tail(p);
  t.sigma = sigma;
  return t;
}

void Theta::validate() const {
  if (lambda.size() == 0 || kappa.size() == 0) {
    throw std::invalid_argument("Theta: lambda and kappa must be nonempty");
  }
  if (lambda.size() != kappa.size()) {
    throw std::invalid_argument(
        "Theta: lambda has length " + std::to_string(lambda.size()) +
        " but kappa has length " + std::to_string(kappa.size()));
  }
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("Theta: sigma must be positive, got " +
                                std::to_string(sigma));
  }
  if (!lambda.allFinite() || !kappa.allFinite() || !std::isfinite(beta)) {
    throw std::invalid_argument("Theta: parameters must be finite");
  }
}

void Dataset::validate(OutcomeFamily family) const {
  const int nn = n();
  if (nn == 0) {
    throw std::invalid_argument("Dataset: no observations");
  }
  if (z.size() != nn || X.rows() != nn) {
    throw std::invalid_argument(
        "Dataset: inconsistent sizes (y " + std::to_string(y.size()) + ", z " +
        std::to_string(z.size()) + ", X rows " + std::to_string(X.rows()) +
        ")");
  }
  if (X.cols() == 0) {
    throw std::invalid_argument("Dataset: X has no columns");
  }
  if (!y.allFinite() || !z.allFinite() || !X.allFinite()) {
    throw std::invalid_argument("Dataset: non-finite values present");
  }
  for (int i = 0; i < nn; ++i) {
    if (z[i] != 0.0 && z[i] != 1.0) {
      throw std::invalid_argument("Dataset: treatment must be 0/1, row " +
                                  std::to_string(i + 1) + " has " +
                                  std::to_string(z[i]));
    }
    if (family == OutcomeFamily::bernoulli_logit && y[i] != 0.0 &&
        y[i] != 1.0) {
      throw std::invalid_argument(
          "Dataset: binary outcome must be 0/1, row " + std::to_string(i + 1) +
          " has " + std::to_string(y[i]));
    }
  }
}

void WorkingPrior::validate() const {
  if (support.size() == 0) {
    throw std::invalid_argument("WorkingPrior: empty support");
  }
  if (weights.size() != support.size()) {
    throw std::invalid_argument("WorkingPrior: support/weights length mismatch");
  }
  for (int k = 1; k < size(); ++k) {
    if (!(support[k] > support[k - 1])) {
      throw std::invalid_argument(
          "WorkingPrior: support must be strictly increasing");
    }
  }
  double total = 0.0;
  for (int k = 0; k < size(); ++k) {
    if (weights[k] < 0.0) {
      throw std::invalid_argument("WorkingPrior: negative weight at atom " +
                                  std::to_string(k));
    }
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("WorkingPrior: weights sum to " +
                                std::to_string(total) + ", expected 1");
  }
  if (!atoms && size() < 2) {
    throw std::invalid_argument("WorkingPrior: grid prior needs >= 2 points");
  }
}

WorkingPrior make_grid_prior(double lo, double hi, double mesh) {
  if (!(hi > lo)) {
    throw std::invalid_argument("make_grid_prior: need hi > lo");
  }
  if (!(mesh > 0.0)) {
    throw std::invalid_argument("make_grid_prior: mesh must be positive");
  }
  const int cells = static_cast<int>(std::ceil((hi - lo) / mesh - 1e-12));
  const int npts = cells + 1;
  const double h = (hi - lo) / cells;
  WorkingPrior prior;
  prior.support = Eigen::VectorXd::LinSpaced(npts, lo, hi);
  prior.weights = Eigen::VectorXd::Constant(npts, 1.0 / npts);
  prior.atoms = false;
  prior.mesh = h;
  prior.validate();
  return prior;
}

WorkingPrior make_bernoulli_prior(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("make_bernoulli_prior: p must be in [0,1]");
  }
  WorkingPrior prior;
  prior.support = Eigen::Vector2d(0.0, 1.0);
  prior.weights = Eigen::Vector2d(1.0 - p, p);
  prior.atoms = true;
  prior.mesh = 1.0;
  prior.validate();
  return prior;
}

WorkingPrior make_weights_prior(const std::vector<double>& support,
                                const std::vector<double>& weights) {
  if (support.empty() || support.size() != weights.size()) {
    throw std::invalid_argument(
        "make_weights_prior: support and weights must be nonempty and of "
        "equal length");
  }
  WorkingPrior prior;
  prior.support = Eigen::Map<const Eigen::VectorXd>(
      support.data(), static_cast<Eigen::Index>(support.size()));
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(
      weights.data(), static_cast<Eigen::Index>(weights.size()));
  const double total = w.sum();
  if (!(total > 0.0) || !w.allFinite()) {
    throw std::invalid_argument(
        "make_weights_prior: weights must be finite with positive sum");
  }
  prior.weights = w / total;
  prior.atoms = true;
  prior.mesh = 1.0;
  prior.validate();
  return prior;
}

double eta_outcome(const Theta& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                   double z, double u, const SensitivityPoint& sp) {
  return theta.lambda.dot(x) + theta.beta * z + sp.delta * u;
}

double eta_treatment(const Theta& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                     double u, const SensitivityPoint& sp) {
  return theta.kappa.dot(x) + sp.gamma * u;
}

double log_density_y(double y, const Eigen::Ref<const Eigen::VectorXd>& x,
                     double z, double u, const Theta& theta,
                     const SensitivityPoint& sp, const ModelSpec& spec) {
  const double eta = eta_outcome(theta, x, z, u, sp);
  if (spec.outcome == OutcomeFamily::bernoulli_logit) {
    if (y != 0.0 && y != 1.0) {
      throw std::invalid_argument(
          "density_y: Bernoulli outcome must be 0/1, got " +
          std::to_string(y));
    }
    // y*eta - log(1 + exp(eta)) for y in {0,1}
    return y * eta + log_expit(-eta);
  }
  if (!(theta.sigma > 0.0)) {
    throw std::invalid_argument("density_y: sigma must be positive, got " +
                                std::to_string(theta.sigma));
  }
  const double r = (y - eta) / theta.sigma;
  return normal_log_pdf(r) - std::log(theta.sigma);
}

double log_density_z(double z, const Eigen::Ref<const Eigen::VectorXd>& x,
                     double u, const Theta& theta, const SensitivityPoint& sp) {
  if (z != 0.0 && z != 1.0) {
    throw std::invalid_argument("density_z: treatment must be 0/1, got " +
                                std::to_string(z));
  }
  const double eta = eta_treatment(theta, x, u, sp);
  return z * eta + log_expit(-eta);
}

double density_y(double y, const Eigen::Ref<const Eigen::VectorXd>& x,
                 double z, double u, const Theta& theta,
                 const SensitivityPoint& sp, const ModelSpec& spec) {
  return std::exp(log_density_y(y, x, z, u, theta, sp, spec));
}

double density_z(double z, const Eigen::Ref<const Eigen::VectorXd>& x,
                 double u, const Theta& theta, const SensitivityPoint& sp) {
  return std::exp(log_density_z(z, x, u, theta, sp));
}

double log_joint_density(double y, double z,
                         const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                         const Theta& theta, const SensitivityPoint& sp,
                         const ModelSpec& spec) {
  return log_density_y(y, x, z, u, theta, sp, spec) +
         log_density_z(z, x, u, theta, sp);
}

double joint_density(double y, double z,
                     const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                     const Theta& theta, const SensitivityPoint& sp,
                     const ModelSpec& spec) {
  return std::exp(log_joint_density(y, z, x, u, theta, sp, spec));
}

}  // namespace semisens
