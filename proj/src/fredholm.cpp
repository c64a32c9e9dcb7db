#include "semisens/fredholm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "semisens/mathutil.hpp"
#include "semisens/score.hpp"

namespace semisens {

namespace {

// Prior as a density on the grid (mass / h) for grid priors, raw masses for
// atom priors; this is the pistar(u') factor scaling kernel rows.
Eigen::VectorXd pistar_values(const WorkingPrior& prior) {
  if (prior.atoms) {
    return prior.weights;
  }
  return prior.weights / prior.mesh;
}

// One pass assembling the symmetric kernel base B(i,j) = E[f_i f_j / I*] and
// the forcing rows b(j) = E[observed_score * f_j], sharing all density
// evaluations.  The caller applies the pistar row scaling to the kernel.
void assemble_parts(const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Theta& theta, const SensitivityPoint& sp,
                    const WorkingPrior& prior, const ModelSpec& spec,
                    const HermiteRule& herm, Eigen::MatrixXd* base,
                    Eigen::MatrixXd* forcing) {
  const int K = prior.size();
  const int q = theta.q();
  if (base) base->setZero(K, K);
  if (forcing) forcing->setZero(K, q);

  Eigen::VectorXd f(K);      // per-point component likelihood values
  Eigen::VectorXd sstar(q);  // observed score at the current (y, z)

  // Accumulates one (y, z) location with outer weight w: istar and the
  // posterior-weighted score are formed once, then spread over (i, j).
  auto accumulate = [&](double y, double z, double w) {
    double istar = 0.0;
    for (int k = 0; k < K; ++k) {
      istar += prior.weights[k] * f[k];
    }
    if (!(istar > 0.0)) {
      if (spec.outcome == OutcomeFamily::gaussian_identity) {
        return false;  // far-tail quadrature point; integrand negligible
      }
      throw std::runtime_error(
          "fredholm: degenerate likelihood at a (y, z) cell (istar = 0)");
    }
    if (base) {
      const double c = w / istar;
      for (int i = 0; i < K; ++i) {
        const double ci = c * f[i];
        for (int j = i; j < K; ++j) {
          (*base)(i, j) += ci * f[j];
        }
      }
    }
    if (forcing) {
      sstar.setZero();
      for (int k = 0; k < K; ++k) {
        if (f[k] == 0.0) continue;
        const double wk = prior.weights[k] * f[k] / istar;
        sstar.noalias() +=
            wk * full_score(y, z, x, prior.support[k], theta, sp, spec);
      }
      for (int j = 0; j < K; ++j) {
        forcing->row(j) += (w * f[j]) * sstar.transpose();
      }
    }
    return true;
  };

  if (spec.outcome == OutcomeFamily::bernoulli_logit) {
    for (double z : {0.0, 1.0}) {
      for (double y : {0.0, 1.0}) {
        for (int k = 0; k < K; ++k) {
          f[k] = joint_density(y, z, x, prior.support[k], theta, sp, spec);
        }
        accumulate(y, z, 1.0);
      }
    }
  } else {
    // Gaussian outcome: the composite rule visits thousands of y points per
    // row, so this branch runs allocation-free.  The full score at any point
    // is [a x; a z; (z - b) x] for scalars a (posterior-mean standardized
    // residual) and b (posterior-mean propensity), so scalar accumulators
    // P, Q, R rebuild the forcing rows after the sweep.
    const double sigma = theta.sigma;
    const double inv_s2 = 1.0 / (sigma * sigma);
    const int pdim = static_cast<int>(x.size());
    Eigen::VectorXd eta(K), fz(K), mu2(K);
    for (int k = 0; k < K; ++k) {
      mu2[k] = expit(eta_treatment(theta, x, prior.support[k], sp));
    }
    Eigen::VectorXd P = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd Q = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd R = Eigen::VectorXd::Zero(K);
    for (double z : {0.0, 1.0}) {
      for (int k = 0; k < K; ++k) {
        eta[k] = eta_outcome(theta, x, z, prior.support[k], sp);
        fz[k] = z == 1.0 ? mu2[k] : 1.0 - mu2[k];
      }
      const MixtureYRule rule = mixture_y_rule(x, z, theta, sp, prior, herm);
      for (int t = 0; t < rule.points.size(); ++t) {
        const double y = rule.points[t];
        double istar = 0.0;
        for (int k = 0; k < K; ++k) {
          f[k] = fz[k] * normal_pdf((y - eta[k]) / sigma) / sigma;
          istar += prior.weights[k] * f[k];
        }
        if (!(istar > 0.0)) continue;  // far tail; integrand negligible
        const double w = rule.weights[t];
        if (base) {
          const double c = w / istar;
          for (int i = 0; i < K; ++i) {
            const double ci = c * f[i];
            for (int j = i; j < K; ++j) {
              (*base)(i, j) += ci * f[j];
            }
          }
        }
        if (forcing) {
          double a = 0.0;
          double b = 0.0;
          for (int k = 0; k < K; ++k) {
            const double wk = prior.weights[k] * f[k] / istar;
            a += wk * (y - eta[k]) * inv_s2;
            b += wk * mu2[k];
          }
          for (int j = 0; j < K; ++j) {
            const double wf = w * f[j];
            P[j] += wf * a;
            Q[j] += wf * a * z;
            R[j] += wf * (z - b);
          }
        }
      }
    }
    if (forcing) {
      for (int j = 0; j < K; ++j) {
        forcing->row(j).head(pdim) = P[j] * x.transpose();
        (*forcing)(j, pdim) = Q[j];
        forcing->row(j).tail(pdim) = R[j] * x.transpose();
      }
    }
  }

  if (base) {
    for (int i = 1; i < K; ++i) {
      for (int j = 0; j < i; ++j) {
        (*base)(i, j) = (*base)(j, i);
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd FredholmSystem::lhs_matrix() const {
  return h * kernel.transpose() * quad_weights.asDiagonal();
}

Eigen::MatrixXd build_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                             const Theta& theta, const SensitivityPoint& sp,
                             const WorkingPrior& prior, const ModelSpec& spec,
                             const HermiteRule& herm) {
  prior.validate();
  Eigen::MatrixXd base;
  assemble_parts(x, theta, sp, prior, spec, herm, &base, nullptr);
  return pistar_values(prior).asDiagonal() * base;
}

Eigen::MatrixXd build_forcing(const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Theta& theta, const SensitivityPoint& sp,
                              const WorkingPrior& prior, const ModelSpec& spec,
                              const HermiteRule& herm) {
  prior.validate();
  Eigen::MatrixXd forcing;
  assemble_parts(x, theta, sp, prior, spec, herm, nullptr, &forcing);
  return forcing;
}

FredholmSystem build_system(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Theta& theta, const SensitivityPoint& sp,
                            const WorkingPrior& prior, const ModelSpec& spec,
                            const HermiteRule& herm, double alpha) {
  prior.validate();
  if (alpha < 0.0) {
    throw std::invalid_argument("build_system: alpha must be >= 0");
  }
  FredholmSystem system;
  system.support = prior.support;
  system.alpha = alpha;
  Eigen::MatrixXd base;
  assemble_parts(x, theta, sp, prior, spec, herm, &base, &system.forcing);
  system.kernel = pistar_values(prior).asDiagonal() * base;
  if (prior.atoms) {
    system.h = 1.0;
    system.quad_weights = Eigen::VectorXd::Ones(prior.size());
  } else {
    system.h = prior.mesh;
    system.quad_weights = trapezoid_weights(prior.size() - 1);
  }
  return system;
}

CorrectionFunction solve_exact(const FredholmSystem& system) {
  const Eigen::MatrixXd A = system.lhs_matrix();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smin = sv[sv.size() - 1];
  const double cond = (smin > 0.0)
                          ? sv[0] / smin
                          : std::numeric_limits<double>::infinity();
  if (!(cond < 1e10)) {
    throw std::runtime_error(
        "fredholm solve_exact: condition estimate " + std::to_string(cond) +
        " >= 1e10; ill-posed; use tikhonov");
  }
  CorrectionFunction corr;
  corr.values = svd.solve(system.forcing);
  corr.residual_norm = (A * corr.values - system.forcing).norm();
  corr.regularized = false;
  return corr;
}

CorrectionFunction solve_tikhonov(const FredholmSystem& system) {
  if (!(system.alpha > 0.0)) {
    throw std::invalid_argument("solve_tikhonov: alpha must be > 0");
  }
  const Eigen::MatrixXd A = system.lhs_matrix();
  Eigen::MatrixXd normal = A.transpose() * A;
  normal.diagonal().array() += system.alpha;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("solve_tikhonov: factorization failed");
  }
  CorrectionFunction corr;
  corr.values = ldlt.solve(A.transpose() * system.forcing);
  corr.residual_norm = (A * corr.values - system.forcing).norm();
  corr.regularized = true;
  return corr;
}

PicardDiagnostics picard_diagnostics(const FredholmSystem& system) {
  const Eigen::MatrixXd A = system.lhs_matrix();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU);
  PicardDiagnostics report;
  report.singular_values = svd.singularValues();
  const double smin = report.singular_values[report.singular_values.size() - 1];
  report.condition = (smin > 0.0)
                         ? report.singular_values[0] / smin
                         : std::numeric_limits<double>::infinity();
  const double b2 = system.forcing.squaredNorm();
  if (b2 == 0.0) {
    report.capture_fraction = 1.0;
    return report;
  }
  const double threshold = std::sqrt(system.alpha);
  double captured = 0.0;
  for (int i = 0; i < report.singular_values.size(); ++i) {
    if (report.singular_values[i] > threshold) {
      captured += (svd.matrixU().col(i).transpose() * system.forcing).squaredNorm();
    }
  }
  report.capture_fraction = captured / b2;
  return report;
}

Eigen::VectorXd correction_expectation(const CorrectionFunction& corr,
                                       double y, double z,
                                       const Eigen::Ref<const Eigen::VectorXd>& x,
                                       const Theta& theta,
                                       const SensitivityPoint& sp,
                                       const WorkingPrior& prior,
                                       const ModelSpec& spec) {
  if (corr.values.rows() != prior.size()) {
    throw std::invalid_argument(
        "correction_expectation: correction has " +
        std::to_string(corr.values.rows()) + " rows but prior has " +
        std::to_string(prior.size()) + " support points");
  }
  const Eigen::VectorXd w = posterior_weights(y, z, x, theta, sp, prior, spec);
  return corr.values.transpose() * w;
}

}  // namespace semisens
