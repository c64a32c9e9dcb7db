#pragma once

// Core model objects for sensitivity analysis under an unmeasured binary-or-
// continuous confounder U.  The outcome follows a canonical exponential
// family GLM in (X, Z, U) and the treatment a logistic regression in (X, U).
// The confounder coefficients (delta for the outcome, gamma for the
// treatment) are not estimated: they form the sensitivity point at which all
// downstream estimation is carried out.

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace semisens {

enum class OutcomeFamily { bernoulli_logit, gaussian_identity };

// Fixed, user-chosen confounder coefficients.
struct SensitivityPoint {
  double delta = 0.0;  // confounder effect on the outcome (linear predictor)
  double gamma = 0.0;  // confounder effect on treatment assignment (log odds)

  bool is_null() const { return delta == 0.0 && gamma == 0.0; }
};

struct ModelSpec {
  OutcomeFamily outcome = OutcomeFamily::bernoulli_logit;
};

// Estimated parameters.  q() = 2p + 1 packs as (lambda, beta, kappa); sigma
// is the Gaussian outcome scale, fixed rather than estimated.
struct Theta {
  Eigen::VectorXd lambda;  // outcome covariate coefficients (incl. intercept)
  double beta = 0.0;       // treatment effect, the target of inference
  Eigen::VectorXd kappa;   // treatment-model covariate coefficients
  double sigma = 1.0;      // outcome scale, Gaussian family only

  int p() const { return static_cast<int>(lambda.size()); }
  int q() const { return 2 * p() + 1; }

  Eigen::VectorXd pack() const;
  static Theta unpack(const Eigen::VectorXd& v, double sigma = 1.0);
  void validate() const;  // throws std::invalid_argument
};

// Observed data.  X carries the intercept column; y is the outcome on its
// natural scale and z the 0/1 treatment indicator.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  Eigen::MatrixXd X;

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(X.cols()); }
  void validate(OutcomeFamily family) const;  // throws std::invalid_argument
};

// Discrete working distribution for U.  Grid priors stand in for a continuous
// density (their weights are interpreted as mass h * density, and the
// Fredholm discretization applies trapezoid quadrature); atom priors are
// genuinely discrete (Bernoulli or user-supplied atoms) and are used as-is.
struct WorkingPrior {
  Eigen::VectorXd support;  // strictly increasing
  Eigen::VectorXd weights;  // nonnegative, sums to one
  bool atoms = true;        // false for grid priors approximating a density
  double mesh = 1.0;        // grid spacing; 1 for atom priors

  int size() const { return static_cast<int>(support.size()); }
  void validate() const;  // throws std::invalid_argument
};

// Equal-weight grid over [lo, hi] with spacing at most mesh (the realized
// spacing divides hi - lo evenly); represents Uniform(lo, hi).
WorkingPrior make_grid_prior(double lo, double hi, double mesh);

// Two atoms {0, 1} with P(U = 1) = p.
WorkingPrior make_bernoulli_prior(double p);

// Arbitrary atoms; weights are normalized to sum to one.
WorkingPrior make_weights_prior(const std::vector<double>& support,
                                const std::vector<double>& weights);

// Linear predictors.
double eta_outcome(const Theta& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                   double z, double u, const SensitivityPoint& sp);
double eta_treatment(const Theta& theta, const Eigen::Ref<const Eigen::VectorXd>& x,
                     double u, const SensitivityPoint& sp);

// Conditional densities given the confounder value u.
double log_density_y(double y, const Eigen::Ref<const Eigen::VectorXd>& x,
                     double z, double u, const Theta& theta,
                     const SensitivityPoint& sp, const ModelSpec& spec);
double log_density_z(double z, const Eigen::Ref<const Eigen::VectorXd>& x,
                     double u, const Theta& theta, const SensitivityPoint& sp);
double density_y(double y, const Eigen::Ref<const Eigen::VectorXd>& x,
                 double z, double u, const Theta& theta,
                 const SensitivityPoint& sp, const ModelSpec& spec);
double density_z(double z, const Eigen::Ref<const Eigen::VectorXd>& x,
                 double u, const Theta& theta, const SensitivityPoint& sp);
double log_joint_density(double y, double z,
                         const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                         const Theta& theta, const SensitivityPoint& sp,
                         const ModelSpec& spec);
double joint_density(double y, double z,
                     const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                     const Theta& theta, const SensitivityPoint& sp,
                     const ModelSpec& spec);

}  // namespace semisens
