#include "semisens/simstudy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "semisens/em.hpp"
#include "semisens/mathutil.hpp"

namespace semisens {
namespace {

struct DesignCoefs {
  double kz1, kz2;    // X coefficients, treatment model
  double ly1, ly2;    // X coefficients, outcome model
  double beta;        // treatment effect
  double lam, del;    // confounder coefficients (treatment, outcome)
};

DesignCoefs coefs(DgpKind kind) {
  switch (kind) {
    case DgpKind::binary_u:
      return {3.0, -3.0, 4.0, -4.0, 2.0, 4.0, 4.0};
    case DgpKind::beta_u:
    case DgpKind::dependent_beta_u:
    case DgpKind::dependent_normal_u:
      return {3.0, -3.0, 4.0, -4.0, 2.0, 2.0, 2.0};
    case DgpKind::gaussian_y:
      return {3.0, -3.0, 1.0, 1.0, 2.0, 4.0, 4.0};
  }
  throw std::invalid_argument("unknown design kind");
}

}  // namespace

void DgpSpec::validate() const {
  if (n < 50) {
    throw std::invalid_argument("DgpSpec: n must be at least 50");
  }
}

GeneratedData generate(const DgpSpec& dgp) {
  dgp.validate();
  const DesignCoefs c = coefs(dgp.kind);
  const bool gaussian = dgp.kind == DgpKind::gaussian_y;

  GeneratedData out;
  out.data.X.resize(dgp.n, 3);
  out.data.z.resize(dgp.n);
  out.data.y.resize(dgp.n);
  out.u.resize(dgp.n);

  Rng rng(dgp.seed);
  for (int i = 0; i < dgp.n; ++i) {
    const double x1 = rng.uniform();
    const double x2 = rng.uniform();
    double u = 0.0;
    switch (dgp.kind) {
      case DgpKind::binary_u:
      case DgpKind::gaussian_y:
        u = rng.bernoulli(0.2) ? 1.0 : 0.0;
        break;
      case DgpKind::beta_u:
        u = rng.beta22();
        break;
      case DgpKind::dependent_beta_u:
        u = x1 + rng.beta22();
        break;
      case DgpKind::dependent_normal_u:
        u = x1 + 0.1 * rng.normal();
        break;
    }
    const double z =
        rng.bernoulli(expit(c.kz1 * x1 + c.kz2 * x2 + c.lam * u)) ? 1.0 : 0.0;
    double y;
    if (gaussian) {
      y = c.ly1 * x1 + c.ly2 * x2 + c.beta * z + c.del * u + rng.normal();
    } else {
      y = rng.bernoulli(expit(c.ly1 * x1 + c.ly2 * x2 + c.beta * z +
                              c.del * u))
              ? 1.0
              : 0.0;
    }
    out.data.X(i, 0) = 1.0;
    out.data.X(i, 1) = x1;
    out.data.X(i, 2) = x2;
    out.u(i) = u;
    out.data.z(i) = z;
    out.data.y(i) = y;
  }
  return out;
}

SensitivityPoint design_point(DgpKind kind) {
  const DesignCoefs c = coefs(kind);
  return SensitivityPoint{c.del, c.lam};
}

ModelSpec design_model(DgpKind kind) {
  ModelSpec spec;
  spec.outcome = kind == DgpKind::gaussian_y
                     ? OutcomeFamily::gaussian_identity
                     : OutcomeFamily::bernoulli_logit;
  return spec;
}

WorkingPrior design_prior(DgpKind kind, double mesh) {
  switch (kind) {
    case DgpKind::binary_u:
    case DgpKind::gaussian_y:
      return make_bernoulli_prior(0.2);
    case DgpKind::beta_u:
      return make_grid_prior(0.0, 1.0, mesh);
    case DgpKind::dependent_beta_u:
      return make_grid_prior(0.0, 2.0, mesh);
    case DgpKind::dependent_normal_u:
      return make_grid_prior(-0.4, 0.4, mesh);
  }
  throw std::invalid_argument("unknown design kind");
}

StudyMetrics metrics(const std::vector<double>& estimates,
                     const std::vector<double>& ses,
                     const std::vector<double>& ci_lo,
                     const std::vector<double>& ci_hi, double true_beta) {
  const std::size_t r = estimates.size();
  if (r == 0) {
    throw std::invalid_argument("metrics: no estimates supplied");
  }
  if (ses.size() != r || ci_lo.size() != r || ci_hi.size() != r) {
    throw std::invalid_argument("metrics: input lengths differ");
  }
  StudyMetrics out;
  out.reps = static_cast<int>(r);
  double sum = 0.0;
  for (double e : estimates) sum += e;
  out.mean = sum / static_cast<double>(r);
  double ss = 0.0;
  double mse = 0.0;
  int covered = 0;
  for (std::size_t i = 0; i < r; ++i) {
    const double d = estimates[i] - out.mean;
    ss += d * d;
    const double err = estimates[i] - true_beta;
    mse += err * err;
    if (ci_lo[i] <= true_beta && true_beta <= ci_hi[i]) ++covered;
  }
  out.se = std::sqrt(ss / static_cast<double>(r));
  out.abs_bias = std::abs(out.mean - true_beta);
  out.pct_bias =
      true_beta == 0.0 ? 0.0 : 100.0 * out.abs_bias / std::abs(true_beta);
  out.coverage = static_cast<double>(covered) / static_cast<double>(r);
  out.rmse = std::sqrt(mse / static_cast<double>(r));
  return out;
}

StudyMetrics run_study(const DgpSpec& dgp, const StudyMethod& method,
                       const SensitivityPoint& sp, int reps, double level,
                       std::uint64_t seed) {
  dgp.validate();
  if (reps < 2) {
    throw std::invalid_argument("run_study: reps must be at least 2");
  }
  const ModelSpec spec = design_model(dgp.kind);
  if (method.kind == StudyMethod::Kind::em &&
      spec.outcome != OutcomeFamily::bernoulli_logit) {
    throw std::invalid_argument("run_study: EM supports binary outcomes only");
  }

  std::vector<double> est(reps), se(reps), lo(reps), hi(reps);
  std::vector<char> ok(reps, 0);

  parallel_for(reps, [&](int r) {
    DgpSpec local = dgp;
    local.seed = derive_seed(seed, static_cast<std::uint64_t>(r));
    const GeneratedData gen = generate(local);
    try {
      if (method.kind == StudyMethod::Kind::semi) {
        FitOptions opts;
        opts.prior = method.prior;
        opts.alpha = method.alpha;
        const FitResult fr = fit(gen.data, sp, opts, spec, level);
        if (fr.converged && std::isfinite(fr.beta_hat) &&
            std::isfinite(fr.beta_se)) {
          est[r] = fr.beta_hat;
          se[r] = fr.beta_se;
          lo[r] = fr.ci_lo;
          hi[r] = fr.ci_hi;
          ok[r] = 1;
        }
      } else {
        EmOptions eo;
        eo.p_u = method.p_u;
        const EmResult er = em_fit(gen.data, sp, eo, level);
        if (er.converged && std::isfinite(er.beta_hat) &&
            std::isfinite(er.beta_se)) {
          est[r] = er.beta_hat;
          se[r] = er.beta_se;
          lo[r] = er.ci_lo;
          hi[r] = er.ci_hi;
          ok[r] = 1;
        }
      }
    } catch (const std::exception&) {
      // counted as a failed replication below
    }
  });

  std::vector<double> kept_est, kept_se, kept_lo, kept_hi;
  kept_est.reserve(reps);
  for (int r = 0; r < reps; ++r) {
    if (!ok[r]) continue;
    kept_est.push_back(est[r]);
    kept_se.push_back(se[r]);
    kept_lo.push_back(lo[r]);
    kept_hi.push_back(hi[r]);
  }
  const int failures = reps - static_cast<int>(kept_est.size());
  if (5 * failures > reps) {
    throw std::runtime_error(
        "run_study: " + std::to_string(failures) + " of " +
        std::to_string(reps) +
        " replications failed (over 20%); design/method mismatch");
  }
  StudyMetrics out =
      metrics(kept_est, kept_se, kept_lo, kept_hi, dgp.true_beta());
  out.failures = failures;
  return out;
}

}  // namespace semisens
