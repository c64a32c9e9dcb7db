#include "semisens/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "semisens/mathutil.hpp"

namespace semisens {

BandResult uniform_band(const std::vector<FitResult>& fits,
                        const std::vector<SensitivityPoint>& grid,
                        double level, int draws, std::uint64_t seed,
                        bool raw_scores) {
  if (fits.empty() || fits.size() != grid.size()) {
    throw std::invalid_argument(
        "uniform_band: need one converged fit per grid point");
  }
  if (draws < 100) {
    throw std::invalid_argument("uniform_band: insufficient draws (need >= "
                                "100)");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument(
        "uniform_band: confidence level must lie in (0, 1)");
  }
  const int g = static_cast<int>(fits.size());
  const int n = static_cast<int>(fits[0].influence.rows());
  const int p_idx = fits[0].theta_hat.p();
  for (int k = 0; k < g; ++k) {
    if (!fits[k].converged) {
      throw std::runtime_error("uniform_band: fit at grid point " +
                               std::to_string(k) + " did not converge");
    }
    if (fits[k].influence.rows() != n || fits[k].scores.rows() != n) {
      throw std::invalid_argument(
          "uniform_band: fits disagree on the number of observations");
    }
  }

  // Per-point beta columns of the influence (or raw score) matrix, and the
  // per-point normalizers.
  Eigen::MatrixXd cols(n, g);
  Eigen::VectorXd variance(g);
  Eigen::VectorXd beta(g);
  for (int k = 0; k < g; ++k) {
    cols.col(k) = raw_scores ? fits[k].scores.col(p_idx)
                             : fits[k].influence.col(p_idx);
    variance(k) = fits[k].vcov(p_idx, p_idx);
    beta(k) = fits[k].beta_hat;
    if (!(variance(k) > 0.0)) {
      throw std::runtime_error("uniform_band: nonpositive variance at grid "
                               "point " + std::to_string(k));
    }
  }
  const double scale = raw_scores ? 1.0 / std::sqrt(static_cast<double>(n))
                                  : 1.0 / static_cast<double>(n);

  std::vector<double> sup(draws);
  parallel_for(draws, [&](int b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    Eigen::VectorXd eps(n);
    for (int i = 0; i < n; ++i) eps(i) = rng.normal();
    double worst = 0.0;
    for (int k = 0; k < g; ++k) {
      const double s = scale * cols.col(k).dot(eps) / std::sqrt(variance(k));
      worst = std::max(worst, std::abs(s));
    }
    sup[b] = worst;
  });

  std::sort(sup.begin(), sup.end());
  const int idx = static_cast<int>(
      std::ceil(level * static_cast<double>(draws))) - 1;
  const double c_hat = sup[std::min(std::max(idx, 0), draws - 1)];

  BandResult out;
  out.grid = grid;
  out.beta = beta;
  out.variance = variance;
  out.c_hat = c_hat;
  out.band_lo = beta - c_hat * variance.cwiseSqrt();
  out.band_hi = beta + c_hat * variance.cwiseSqrt();
  out.draws = draws;
  out.seed = seed;
  out.level = level;
  return out;
}

PooledResult rubin_pool(const std::vector<double>& estimates,
                        const std::vector<double>& ses, double level) {
  const std::size_t m = estimates.size();
  if (m < 2) {
    throw std::invalid_argument("rubin_pool: need at least two estimates");
  }
  if (ses.size() != m) {
    throw std::invalid_argument("rubin_pool: estimate/SE lengths differ");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument(
        "rubin_pool: confidence level must lie in (0, 1)");
  }
  double mean = 0.0;
  double within = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(estimates[i]) || !std::isfinite(ses[i]) ||
        ses[i] < 0.0) {
      throw std::invalid_argument("rubin_pool: inputs must be finite with "
                                  "nonnegative SEs");
    }
    mean += estimates[i];
    within += ses[i] * ses[i];
  }
  const double dm = static_cast<double>(m);
  mean /= dm;
  within /= dm;
  double between = 0.0;
  for (double e : estimates) between += (e - mean) * (e - mean);
  between /= dm - 1.0;

  PooledResult out;
  out.m = static_cast<int>(m);
  out.beta = mean;
  out.within = within;
  out.between = between;
  const double total = within + (1.0 + 1.0 / dm) * between;
  out.se = std::sqrt(total);
  out.level = level;
  const double zq = normal_quantile(0.5 * (1.0 + level));
  out.ci_lo = mean - zq * out.se;
  out.ci_hi = mean + zq * out.se;
  return out;
}

}  // namespace semisens
