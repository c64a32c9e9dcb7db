#pragma once

// Data-generating processes for the shipped simulation designs and the Monte
// Carlo harness computing bias / coverage / RMSE tables over replications.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "semisens/estimator.hpp"
#include "semisens/model.hpp"

namespace semisens {

// All designs share X1, X2 ~ Unif(0,1) and true treatment effect beta = 2:
//   binary_u:           U ~ Bern(0.2),      logit Z = 3X1-3X2+4U,
//                       logit Y = 4X1-4X2+2Z+4U
//   beta_u:             U ~ Beta(2,2),      same X coefficients, U coef 2
//   dependent_beta_u:   U = X1 + Beta(2,2), U coefficient 2
//   dependent_normal_u: U = X1 + N(0, sd 0.1), U coefficient 2
//   gaussian_y:         U ~ Bern(0.2), logit Z = 3X1-3X2+4U,
//                       Y = X1+X2+2Z+4U+N(0,1)
enum class DgpKind {
  binary_u,
  beta_u,
  dependent_beta_u,
  dependent_normal_u,
  gaussian_y,
};

struct DgpSpec {
  DgpKind kind = DgpKind::binary_u;
  int n = 500;
  std::uint64_t seed = 0;

  double true_beta() const { return 2.0; }
  void validate() const;  // n >= 50
};

struct GeneratedData {
  Dataset data;       // X = (1, X1, X2), z, y
  Eigen::VectorXd u;  // hidden confounder, kept for diagnostics only
};

// Draw order is fixed per row: X1, X2, U (noise), Z, Y.  A fixed seed yields
// a bitwise-identical dataset on every platform we target.
GeneratedData generate(const DgpSpec& dgp);

// The (delta, gamma) the design was generated under.
SensitivityPoint design_point(DgpKind kind);
// The outcome family of the design.
ModelSpec design_model(DgpKind kind);
// The working prior used in the shipped studies: the true Bern(0.2) law for
// the binary-confounder designs, and an equal-weight grid otherwise
// ([0,1] for beta_u, [0,2] for dependent_beta_u, [-0.4,0.4] for
// dependent_normal_u); mesh is ignored for atom priors.
WorkingPrior design_prior(DgpKind kind, double mesh);

struct StudyMethod {
  enum class Kind { semi, em };
  Kind kind = Kind::semi;
  WorkingPrior prior;   // semi only
  double alpha = 0.1;   // semi only
  double p_u = 0.5;     // em only
};

struct StudyMetrics {
  double mean = 0.0;
  double se = 0.0;        // Monte Carlo SD across replications
  double abs_bias = 0.0;
  double pct_bias = 0.0;
  double coverage = 0.0;
  double rmse = 0.0;
  int reps = 0;           // replications included
  int failures = 0;       // replications excluded
};

// Metrics over per-replication point estimates and intervals.  The SD uses
// the population divisor so that rmse^2 = abs_bias^2 + se^2 exactly.
StudyMetrics metrics(const std::vector<double>& estimates,
                     const std::vector<double>& ses,
                     const std::vector<double>& ci_lo,
                     const std::vector<double>& ci_hi, double true_beta);

// reps independent generate-and-fit cycles at the design's own sensitivity
// point, parallel over replications with per-replication derived seeds.
// Failed replications (errors or non-convergence) are excluded and counted;
// a failure rate above 20% aborts.
StudyMetrics run_study(const DgpSpec& dgp, const StudyMethod& method,
                       const SensitivityPoint& sp, int reps, double level,
                       std::uint64_t seed);

}  // namespace semisens
