#pragma once

// Closed-form identification for the no-covariate, all-binary case.  The
// observed 2x2 law L(y, z), together with the conditional law of U given
// (Y = 0, Z = 0), pins down the three log-linear parameters of the joint
//   f(y, z, u)  proportional to  c(u) exp{b0 y + a0 z + bz yz + dl yu + gm zu}
// through moment-generating-function ratios.  Used as an independent
// correctness oracle for the estimating-equation machinery.

#include <Eigen/Dense>

#include "semisens/model.hpp"

namespace semisens {

struct ObservedCells {
  double l00 = 0.25;  // L(Y=0, Z=0)
  double l01 = 0.25;  // L(Y=0, Z=1)
  double l10 = 0.25;  // L(Y=1, Z=0)
  double l11 = 0.25;  // L(Y=1, Z=1)

  double total() const { return l00 + l01 + l10 + l11; }
  void validate() const;  // finite, nonnegative, sum to one within 1e-12
};

struct IdentifiedParams {
  double alpha0 = 0.0;  // treatment main effect
  double beta0 = 0.0;   // outcome main effect
  double beta_z = 0.0;  // outcome-treatment interaction (the causal target)
};

// Moment generating function of a discrete working law: sum_k pi_k e^{t u_k}.
double mgf(const WorkingPrior& prior, double t);

// Forward map: the (y, z) table produced by the log-linear joint above, with
// cond_null the law of U given (Y = 0, Z = 0).  Summing the confounder out
// gives L(y, z) proportional to exp{b0 y + a0 z + bz yz} M(delta y + gamma z).
ObservedCells enumerate_cells(const IdentifiedParams& params,
                              const WorkingPrior& cond_null,
                              const SensitivityPoint& sp);

// Inverse map.  Cells may be supplied up to a common scale; they are
// renormalized internally.  Any zero cell is a boundary law and aborts.
IdentifiedParams identify(const ObservedCells& cells,
                          const WorkingPrior& cond_null,
                          const SensitivityPoint& sp);

// Law of U given (Y = 0, Z = 0) implied by a marginal law of U and logistic
// conditionals:  weights proportional to
//   pi_k * (1 - expit(treatment_intercept + gamma u_k))
//        * (1 - expit(outcome_intercept + delta u_k)).
// The distinction between this conditional law and the marginal is easy to
// miss and breaks the inversion if ignored.
WorkingPrior conditional_given_null_cell(const WorkingPrior& marginal,
                                         double outcome_intercept,
                                         double treatment_intercept,
                                         const SensitivityPoint& sp);

}  // namespace semisens
