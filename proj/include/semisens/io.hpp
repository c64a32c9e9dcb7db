#pragma once

// CSV ingestion, the working-prior mini-language, serialization of fit /
// sweep / band / study results, and the human-readable interpretation report.

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "semisens/estimator.hpp"
#include "semisens/model.hpp"
#include "semisens/simstudy.hpp"
#include "semisens/uncertainty.hpp"

namespace semisens {

struct ColumnRoles {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
};

// Comma-separated file with a header row.  Role columns are validated by
// name; the treatment (and, for the Bernoulli family, the outcome) must be
// coded 0/1; an intercept column is prepended to the covariates.  Rows with
// missing cells are rejected collectively with a count.
Dataset ingest(const std::string& path, const ColumnRoles& roles,
               OutcomeFamily family);

// Prior mini-language: "bernoulli:<p>", "grid:<lo>:<hi>:<h>",
// "weights:<u1=w1,u2=w2,...>".
WorkingPrior parse_prior(const std::string& text);

// Shortest decimal form that parses back to the same double.
std::string fmt_double(double v);

// CSV with columns delta,gamma,beta_hat,se,ci_lo,ci_hi,converged,
// interpretation_gamma_factor,interpretation_delta_factor.  The gamma factor
// is exp(gamma); the delta column is exp(delta) for a logistic outcome and
// delta/sigma (standard deviations) for a Gaussian outcome.  Failed points
// leave the numeric fields empty.
std::string sweep_csv(const std::vector<SweepRow>& rows, const ModelSpec& spec,
                      double sigma);

// Sweep CSV columns plus c_hat,band_lo,band_hi.
std::string band_csv(const BandResult& band, const ModelSpec& spec,
                     double sigma);

// Metrics table row layout shared by the simulate subcommand.
std::string metrics_csv_header();
std::string metrics_csv_row(const std::string& design,
                            const std::string& method, int n, double h,
                            double alpha, const SensitivityPoint& sp,
                            const StudyMetrics& m);

// Machine-readable single-fit payload; influence rows only on request.
nlohmann::json fit_json(const FitResult& fit, const SensitivityPoint& sp,
                        const ModelSpec& spec, bool include_influence);

// Reads (beta_hat, se) back from a fit JSON file, for pooling.
std::pair<double, double> read_fit_json(const std::string& path);

// Per-point estimate lines plus the sensitivity-interpretation sentences:
// the odds-of-treatment factor exp(gamma), and either the odds-of-outcome
// factor exp(delta) (logistic) or delta/sigma in standard deviations
// (Gaussian).  Zero parameters suppress their sentence.
std::string report(const std::vector<SweepRow>& rows, const ModelSpec& spec,
                   double sigma);

}  // namespace semisens
