#include "semisens/ident.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "semisens/mathutil.hpp"

namespace semisens {

void ObservedCells::validate() const {
  const double cells[4] = {l00, l01, l10, l11};
  for (double c : cells) {
    if (!std::isfinite(c) || c < 0.0) {
      throw std::invalid_argument(
          "ObservedCells: entries must be finite and nonnegative");
    }
  }
  if (std::abs(total() - 1.0) > 1e-12) {
    throw std::invalid_argument("ObservedCells: entries must sum to one");
  }
}

double mgf(const WorkingPrior& prior, double t) {
  prior.validate();
  if (!std::isfinite(t)) {
    throw std::invalid_argument("mgf: t must be finite");
  }
  double acc = 0.0;
  for (int k = 0; k < prior.size(); ++k) {
    acc += prior.weights(k) * std::exp(t * prior.support(k));
  }
  if (!std::isfinite(acc)) {
    throw std::runtime_error("mgf: overflow at t = " + std::to_string(t));
  }
  return acc;
}

ObservedCells enumerate_cells(const IdentifiedParams& params,
                              const WorkingPrior& cond_null,
                              const SensitivityPoint& sp) {
  if (!std::isfinite(params.alpha0) || !std::isfinite(params.beta0) ||
      !std::isfinite(params.beta_z)) {
    throw std::invalid_argument("enumerate_cells: parameters must be finite");
  }
  ObservedCells out;
  out.l00 = 1.0;  // exp(0) * M(0)
  out.l01 = std::exp(params.alpha0) * mgf(cond_null, sp.gamma);
  out.l10 = std::exp(params.beta0) * mgf(cond_null, sp.delta);
  out.l11 = std::exp(params.beta0 + params.alpha0 + params.beta_z) *
            mgf(cond_null, sp.delta + sp.gamma);
  const double c = out.total();
  if (!std::isfinite(c) || !(c > 0.0)) {
    throw std::runtime_error("enumerate_cells: table failed to normalize");
  }
  out.l00 /= c;
  out.l01 /= c;
  out.l10 /= c;
  out.l11 /= c;
  return out;
}

IdentifiedParams identify(const ObservedCells& cells,
                          const WorkingPrior& cond_null,
                          const SensitivityPoint& sp) {
  const double cell[4] = {cells.l00, cells.l01, cells.l10, cells.l11};
  for (double c : cell) {
    if (!std::isfinite(c) || !(c > 0.0)) {
      throw std::runtime_error(
          "identify: boundary likelihood; not identifiable by inversion");
    }
  }
  const double tot = cells.total();
  const double l00 = cells.l00 / tot;
  const double l01 = cells.l01 / tot;
  const double l10 = cells.l10 / tot;
  const double l11 = cells.l11 / tot;

  const double m_g = mgf(cond_null, sp.gamma);
  const double m_d = mgf(cond_null, sp.delta);
  const double m_dg = mgf(cond_null, sp.delta + sp.gamma);

  IdentifiedParams out;
  out.alpha0 = std::log(l01 / (l00 * m_g));
  out.beta0 = std::log(l10 / (l00 * m_d));
  out.beta_z = std::log((l11 * l00) / (l01 * l10) * (m_d * m_g) / m_dg);
  return out;
}

WorkingPrior conditional_given_null_cell(const WorkingPrior& marginal,
                                         double outcome_intercept,
                                         double treatment_intercept,
                                         const SensitivityPoint& sp) {
  marginal.validate();
  if (!std::isfinite(outcome_intercept) || !std::isfinite(treatment_intercept)) {
    throw std::invalid_argument(
        "conditional_given_null_cell: intercepts must be finite");
  }
  WorkingPrior out = marginal;
  for (int k = 0; k < marginal.size(); ++k) {
    const double u = marginal.support(k);
    // P(Z = 0 | u) * P(Y = 0 | Z = 0, u) under the logistic conditionals.
    const double pz0 = expit(-(treatment_intercept + sp.gamma * u));
    const double py0 = expit(-(outcome_intercept + sp.delta * u));
    out.weights(k) = marginal.weights(k) * pz0 * py0;
  }
  const double tot = out.weights.sum();
  if (!(tot > 0.0)) {
    throw std::runtime_error(
        "conditional_given_null_cell: conditional law degenerated to zero");
  }
  out.weights /= tot;
  return out;
}

}  // namespace semisens
