#pragma once

// Quadrature rules used by the Fredholm discretization and by expectations
// over the observed-data law given a confounder value: trapezoid weights for
// equally spaced grids, Gauss-Hermite nodes/weights via the Golub-Welsch
// eigenvalue method, and expectation helpers over (y, z) given (x, u).

#include <functional>

#include <Eigen/Dense>

#include "semisens/model.hpp"

namespace semisens {

// Composite trapezoid weights (1/2, 1, ..., 1, 1/2) for a grid with K cells,
// i.e. K + 1 points.  The mesh factor is applied by the caller.
Eigen::VectorXd trapezoid_weights(int cells);  // throws if cells < 1

struct HermiteRule {
  Eigen::VectorXd nodes;    // roots of H_n, symmetric about 0, increasing
  Eigen::VectorXd weights;  // positive, sum to sqrt(pi)
  int order = 0;
};

// Gauss-Hermite rule for integrals of exp(-t^2) * g(t); order capped at 128.
HermiteRule hermite_rule(int order);

// E[g(Y, Z) | x, u] under the model.  Bernoulli outcomes enumerate the four
// (y, z) cells exactly; Gaussian outcomes sum over z and apply the Hermite
// rule to the outcome density centered at its conditional mean.  Throws
// std::runtime_error if g evaluates to a non-finite value.
double yz_expectation(const std::function<double(double, double)>& g,
                      const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                      const Theta& theta, const SensitivityPoint& sp,
                      const ModelSpec& spec, const HermiteRule& herm);

// Vector-valued variant, for score-like integrands.
Eigen::VectorXd yz_expectation_vec(
    const std::function<Eigen::VectorXd(double, double)>& g, int dim,
    const Eigen::Ref<const Eigen::VectorXd>& x, double u, const Theta& theta,
    const SensitivityPoint& sp, const ModelSpec& spec, const HermiteRule& herm);

// Composite y-quadrature for Gaussian-outcome integrands that involve ratios
// of mixture components (the Fredholm kernel and forcing integrands), whose
// posterior-weight factors vary on a scale much narrower than sigma when the
// component means are far apart.  A single Hermite window cannot resolve
// those transitions, so we tile a partition of unity of narrow Gaussian
// windows (sd = window_frac * sigma, spacing <= sd) across every component
// mean +- pad sigmas and integrate each window with the supplied Hermite
// rule.  The window layout depends only on the model geometry, not on the
// rule order, so increasing the order refines the same integral.
struct MixtureYRule {
  Eigen::VectorXd points;
  Eigen::VectorXd weights;  // include the partition-of-unity normalizer
};

MixtureYRule mixture_y_rule(const Eigen::Ref<const Eigen::VectorXd>& x,
                            double z, const Theta& theta,
                            const SensitivityPoint& sp,
                            const WorkingPrior& prior, const HermiteRule& herm,
                            double window_frac = 0.15, double pad = 8.0);

}  // namespace semisens
