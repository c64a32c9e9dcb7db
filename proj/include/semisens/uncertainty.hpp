#pragma once

// Uniform-in-(delta, gamma) confidence bands via a Gaussian multiplier
// bootstrap over a finite sensitivity grid, and Rubin's-rules pooling across
// multiply-imputed fits.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "semisens/estimator.hpp"
#include "semisens/model.hpp"

namespace semisens {

struct BandResult {
  std::vector<SensitivityPoint> grid;
  Eigen::VectorXd beta;      // per-point estimate
  Eigen::VectorXd variance;  // per-point sandwich variance of beta-hat
  double c_hat = 0.0;        // bootstrap critical value
  Eigen::VectorXd band_lo;   // beta - c_hat * sqrt(variance)
  Eigen::VectorXd band_hi;
  int draws = 0;
  std::uint64_t seed = 0;
  double level = 0.95;
};

// Multiplier bootstrap for the supremum statistic over the grid.  Each draw
// shares one vector of i.i.d. standard normal multipliers across all grid
// points and evaluates max_g |(1/n) sum_i eps_i IF_i(g)| / sqrt(V_g), with
// IF the beta row of the influence function; c_hat is the empirical
// level-quantile over draws.  With raw_scores the per-observation efficient
// scores replace the influence values and the sum is scaled by 1/sqrt(n)
// (the literal supremum form); its quantile is reported for comparison only,
// with no coverage claim.
BandResult uniform_band(const std::vector<FitResult>& fits,
                        const std::vector<SensitivityPoint>& grid,
                        double level, int draws, std::uint64_t seed,
                        bool raw_scores = false);

struct PooledResult {
  double beta = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double level = 0.95;
  double within = 0.0;   // mean squared SE
  double between = 0.0;  // sample variance of the estimates
  int m = 0;
};

// Rubin's rules: pooled mean, total variance W + (1 + 1/m) B, normal-quantile
// interval.
PooledResult rubin_pool(const std::vector<double>& estimates,
                        const std::vector<double>& ses, double level);

}  // namespace semisens
