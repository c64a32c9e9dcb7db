#include "semisens/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "semisens/em.hpp"
#include "semisens/fredholm.hpp"
#include "semisens/glm.hpp"
#include "semisens/mathutil.hpp"
#include "semisens/score.hpp"

namespace semisens {
namespace {

bool is_null_point(const SensitivityPoint& sp) {
  return sp.delta == 0.0 && sp.gamma == 0.0;
}

Eigen::VectorXd efficient_score_impl(double y, double z,
                                     const Eigen::VectorXd& x,
                                     const Theta& theta,
                                     const SensitivityPoint& sp,
                                     const FitOptions& opts,
                                     const ModelSpec& spec,
                                     const HermiteRule& herm) {
  if (is_null_point(sp)) {
    // The complete-data score is free of u and the correction vanishes.
    return full_score(y, z, x, opts.prior.support(0), theta, sp, spec);
  }
  FredholmSystem sys = build_system(x, theta, sp, opts.prior, spec, herm,
                                    opts.alpha);
  CorrectionFunction corr =
      opts.prior.atoms ? solve_exact(sys) : solve_tikhonov(sys);
  return observed_score(y, z, x, theta, sp, opts.prior, spec) -
         correction_expectation(corr, y, z, x, theta, sp, opts.prior, spec);
}

void check_options(const FitOptions& opts, const ModelSpec& spec) {
  opts.prior.validate();
  if (opts.max_iter < 1) {
    throw std::invalid_argument("fit: max_iter must be at least 1");
  }
  if (!(opts.tol > 0.0)) {
    throw std::invalid_argument("fit: tol must be positive");
  }
  if (!(opts.fd_step > 0.0)) {
    throw std::invalid_argument("fit: fd_step must be positive");
  }
  if (opts.max_halvings < 0) {
    throw std::invalid_argument("fit: max_halvings must be nonnegative");
  }
  if (!(opts.alpha >= 0.0)) {
    throw std::invalid_argument("fit: alpha must be nonnegative");
  }
  if (spec.outcome == OutcomeFamily::gaussian_identity && !(opts.sigma > 0.0)) {
    throw std::invalid_argument("fit: sigma must be positive");
  }
}

// Mean of the per-observation efficient scores at a packed theta, optionally
// weighted and optionally capturing the individual rows.  Failures are tagged
// with the offending observation index.
Eigen::VectorXd mean_score(const Dataset& data, const Eigen::VectorXd* w,
                           const Eigen::VectorXd& packed,
                           const SensitivityPoint& sp, const FitOptions& opts,
                           const ModelSpec& spec, const HermiteRule& herm,
                           Eigen::MatrixXd* rows) {
  const int n = data.n();
  const Theta theta = Theta::unpack(packed, opts.sigma);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(packed.size());
  double wsum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double wi = w == nullptr ? 1.0 : (*w)(i);
    if (wi == 0.0) {
      if (rows != nullptr) rows->row(i).setZero();
      continue;
    }
    const Eigen::VectorXd xi = data.X.row(i).transpose();
    Eigen::VectorXd s;
    try {
      s = efficient_score_impl(data.y(i), data.z(i), xi, theta, sp, opts, spec,
                               herm);
    } catch (const std::exception& e) {
      throw std::runtime_error("fit: efficient score failed at observation " +
                               std::to_string(i) + ": " + e.what());
    }
    if (rows != nullptr) rows->row(i) = s.transpose();
    acc += wi * s;
    wsum += wi;
  }
  if (!(wsum > 0.0)) {
    throw std::invalid_argument("fit: total observation weight is zero");
  }
  return acc / wsum;
}

Eigen::MatrixXd fd_jacobian(const Dataset& data, const Eigen::VectorXd* w,
                            const Eigen::VectorXd& packed,
                            const SensitivityPoint& sp, const FitOptions& opts,
                            const ModelSpec& spec, const HermiteRule& herm) {
  const int q = static_cast<int>(packed.size());
  Eigen::MatrixXd jac(q, q);
  for (int j = 0; j < q; ++j) {
    const double step = opts.fd_step * std::max(1.0, std::abs(packed(j)));
    Eigen::VectorXd up = packed;
    Eigen::VectorXd dn = packed;
    up(j) += step;
    dn(j) -= step;
    const Eigen::VectorXd gu =
        mean_score(data, w, up, sp, opts, spec, herm, nullptr);
    const Eigen::VectorXd gd =
        mean_score(data, w, dn, sp, opts, spec, herm, nullptr);
    jac.col(j) = (gu - gd) / (2.0 * step);
  }
  return jac;
}

struct NewtonOutcome {
  Eigen::VectorXd packed;
  Eigen::VectorXd g;
  int iterations = 0;
  bool converged = false;
};

// Damped Newton on the mean efficient score.  Step halving guards each raw
// Newton direction; when halving cannot find descent a Levenberg-style
// retry bends the step toward the gradient of the squared-norm merit, which
// widens the basin in curved valleys.  Runs with no relative progress over a
// trailing window stop early instead of crawling to max_iter.
NewtonOutcome newton_solve(const Dataset& data, const Eigen::VectorXd* w,
                           Eigen::VectorXd packed, const SensitivityPoint& sp,
                           const FitOptions& opts, const ModelSpec& spec,
                           const HermiteRule& herm) {
  const int q = static_cast<int>(packed.size());
  Eigen::VectorXd g = mean_score(data, w, packed, sp, opts, spec, herm,
                                 nullptr);
  if (!g.allFinite()) {
    throw std::runtime_error("fit: mean efficient score is not finite at the "
                             "starting value");
  }
  NewtonOutcome out;
  std::vector<double> trail;  // accepted-step norms, for the stagnation stop
  trail.push_back(g.norm());
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (g.cwiseAbs().maxCoeff() <= opts.tol) {
      out.converged = true;
      break;
    }
    // A score or Jacobian failure away from the start is a dead end for this
    // run, not a hard error: report the best iterate and let the caller's
    // restart ladder try elsewhere.
    Eigen::MatrixXd jac;
    Eigen::VectorXd direction;
    try {
      jac = fd_jacobian(data, w, packed, sp, opts, spec, herm);
      if (!jac.allFinite()) break;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
      if (!lu.isInvertible()) break;
      direction = -lu.solve(g);
    } catch (const std::exception&) {
      break;
    }

    const double g2 = g.norm();
    auto try_step = [&](const Eigen::VectorXd& cand) {
      Eigen::VectorXd gc;
      try {
        gc = mean_score(data, w, cand, sp, opts, spec, herm, nullptr);
      } catch (const std::exception&) {
        return false;
      }
      if (!gc.allFinite() || !(gc.norm() < g2)) return false;
      packed = cand;
      g = gc;
      return true;
    };

    // Step halving on the L2 norm of the mean score.
    bool accepted = false;
    double scale = 1.0;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      if (try_step(packed + scale * direction)) {
        accepted = true;
        break;
      }
      scale /= 2.0;
    }
    if (!accepted) {
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd jtg = jac.transpose() * g;
      const double dscale = jtj.diagonal().mean();
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(q, q);
      for (double mu = 1e-4; mu <= 1e4 && !accepted; mu *= 100.0) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(jtj + mu * dscale * eye);
        if (ldlt.info() != Eigen::Success) continue;
        accepted = try_step(packed - ldlt.solve(jtg));
      }
    }
    if (!accepted) break;  // stationary for the merit norm; report best iterate
    ++out.iterations;
    trail.push_back(g.norm());
    const std::size_t window = 8;
    if (trail.size() > window &&
        trail.back() > 0.9 * trail[trail.size() - 1 - window]) {
      break;  // under 10% progress across the window: treat as stalled
    }
  }
  if (g.cwiseAbs().maxCoeff() <= opts.tol) out.converged = true;
  out.packed = std::move(packed);
  out.g = std::move(g);
  return out;
}

// Walks the straight path s * (delta, gamma) from the origin to the target
// point, warm-starting each stage from the previous solution.  At the origin
// the outcome/propensity MLE solves the equation exactly, so short steps keep
// every stage inside its basin.  Step size halves after a failed stage.
NewtonOutcome continuation_solve(const Dataset& data, const Eigen::VectorXd* w,
                                 const Eigen::VectorXd& start,
                                 const SensitivityPoint& sp,
                                 const FitOptions& opts, const ModelSpec& spec,
                                 const HermiteRule& herm, int* extra_iters) {
  NewtonOutcome best;
  best.converged = false;
  Eigen::VectorXd cur = start;
  double s = 0.0;
  double ds = 0.25;
  int budget = 24;
  while (budget-- > 0) {
    const double s_next = std::min(1.0, s + ds);
    const SensitivityPoint stage{s_next * sp.delta, s_next * sp.gamma};
    NewtonOutcome st;
    bool ok = false;
    try {
      st = newton_solve(data, w, cur, stage, opts, spec, herm);
      ok = st.converged;
      *extra_iters += st.iterations;
    } catch (const std::exception&) {
      ok = false;
    }
    if (ok) {
      cur = st.packed;
      s = s_next;
      if (s >= 1.0) {
        best = std::move(st);
        break;
      }
    } else {
      ds /= 2.0;
      if (ds < 1.0 / 64.0) break;  // path cannot be continued
    }
  }
  return best;
}

FitResult fit_impl(const Dataset& data, const Eigen::VectorXd* w,
                   const SensitivityPoint& sp, const FitOptions& opts,
                   const ModelSpec& spec, double level) {
  data.validate(spec.outcome);
  check_options(opts, spec);
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("fit: confidence level must lie in (0, 1)");
  }
  const int n = data.n();
  const int p = data.p();
  const int q = 2 * p + 1;
  if (w != nullptr) {
    if (w->size() != n) {
      throw std::invalid_argument("fit: weight vector length differs from n");
    }
    if (!w->allFinite() || (w->array() < 0.0).any()) {
      throw std::invalid_argument("fit: weights must be finite, nonnegative");
    }
    if (!(w->sum() > 0.0)) {
      throw std::invalid_argument("fit: total observation weight is zero");
    }
  }
  const HermiteRule herm = hermite_rule(opts.hermite_order);

  Eigen::VectorXd start;
  bool have_glm_start = false;
  if (opts.init.has_value()) {
    if (opts.init->size() != q) {
      throw std::invalid_argument(
          "fit: init has length " + std::to_string(opts.init->size()) +
          ", expected " + std::to_string(q));
    }
    start = *opts.init;
    Theta::unpack(start, opts.sigma).validate();
  } else {
    const Eigen::VectorXd ones =
        w == nullptr ? Eigen::VectorXd::Ones(n) : *w;
    start = glm_init(data, ones, spec, opts.sigma).pack();
    have_glm_start = true;
  }

  NewtonOutcome sol;
  try {
    sol = newton_solve(data, w, start, sp, opts, spec, herm);
  } catch (const std::exception&) {
    // A user-supplied start (say, a warm start carried over from a
    // neighboring sweep point) can sit where the score itself is unusable;
    // fall back to the GLM anchor before giving up.
    if (have_glm_start) throw;
    const Eigen::VectorXd ones = w == nullptr ? Eigen::VectorXd::Ones(n) : *w;
    start = glm_init(data, ones, spec, opts.sigma).pack();
    have_glm_start = true;
    sol = newton_solve(data, w, start, sp, opts, spec, herm);
  }
  int iterations = sol.iterations;
  if (!sol.converged && !is_null_point(sp)) {
    // The equation is weakly identified at strong sensitivity points and the
    // score surface folds; a stalled solve usually just started in the wrong
    // basin.  Work through a deterministic ladder of restarts and keep the
    // lowest-norm iterate in case every rung fails.
    auto consider = [&](NewtonOutcome&& cand) {
      iterations += cand.iterations;
      if (cand.g.norm() < sol.g.norm()) sol = std::move(cand);
      return sol.converged;
    };
    bool done = false;

    // GLM anchor, shared by continuation and the restart centers.
    Eigen::VectorXd anchor = start;
    if (!have_glm_start) {
      try {
        const Eigen::VectorXd ones =
            w == nullptr ? Eigen::VectorXd::Ones(n) : *w;
        anchor = glm_init(data, ones, spec, opts.sigma).pack();
      } catch (const std::exception&) {
      }
    }

    // Rung 1: the latent two-point maximum-likelihood solution.  Its score
    // differs from the efficient score only by the sample average of the
    // mean-zero correction, so it usually lands inside the right basin.
    const bool two_point = spec.outcome == OutcomeFamily::bernoulli_logit &&
                           w == nullptr && opts.prior.atoms &&
                           opts.prior.size() == 2 &&
                           opts.prior.support(0) == 0.0 &&
                           opts.prior.support(1) == 1.0;
    if (two_point) {
      try {
        EmOptions eo;
        eo.p_u = opts.prior.weights(1);
        const EmResult em = em_fit(data, sp, eo, level);
        done = consider(newton_solve(data, w, em.theta_hat.pack(), sp, opts,
                                     spec, herm));
      } catch (const std::exception&) {
      }
    }

    // Rung 2: continuation along the sensitivity path from the origin, where
    // the plain MLE is an exact root.
    if (!done) {
      NewtonOutcome cont = continuation_solve(data, w, anchor, sp, opts, spec,
                                              herm, &iterations);
      if (cont.converged) {
        sol = std::move(cont);
        done = true;
      }
    }

    // Rung 3: fixed-seed random restarts, alternating centers between the
    // best iterate seen so far and the GLM anchor.  Throw scales escalate in
    // tiers so nearby roots are found before far ones.  Seeds do not depend
    // on the data, so repeated fits of the same dataset stay bit-identical.
    static const double kTiers[5] = {0.5, 1.0, 1.75, 2.75, 3.5};
    for (int k = 0; k < 40 && !done; ++k) {
      Rng rng(derive_seed(0xA11BA5E5, static_cast<std::uint64_t>(k)));
      const double throw_scale = kTiers[k / 8];
      Eigen::VectorXd pert = k % 2 == 0 ? sol.packed : anchor;
      for (int j = 0; j < q; ++j) pert(j) += throw_scale * rng.normal();
      try {
        Theta::unpack(pert, opts.sigma).validate();
        done = consider(newton_solve(data, w, pert, sp, opts, spec, herm));
      } catch (const std::exception&) {
      }
    }
  }
  Eigen::VectorXd packed = std::move(sol.packed);
  Eigen::VectorXd g = std::move(sol.g);
  const bool converged = sol.converged;

  FitResult out;
  out.theta_hat = Theta::unpack(packed, opts.sigma);
  out.iterations = iterations;
  out.converged = converged;
  out.final_norm = g.cwiseAbs().maxCoeff();
  out.level = level;

  out.scores.resize(n, q);
  mean_score(data, w, packed, sp, opts, spec, herm, &out.scores);
  const Eigen::MatrixXd jac_hat =
      fd_jacobian(data, w, packed, sp, opts, spec, herm);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jac_hat);
  if (!jac_hat.allFinite() || !lu.isInvertible()) {
    throw std::runtime_error("fit: Jacobian singular at theta-hat");
  }
  const Eigen::MatrixXd jinv = lu.inverse();

  double n_eff = static_cast<double>(n);
  Eigen::MatrixXd meat(q, q);
  if (w == nullptr) {
    meat = out.scores.transpose() * out.scores / n_eff;
  } else {
    n_eff = w->sum();
    meat = out.scores.transpose() * w->asDiagonal() * out.scores / n_eff;
  }
  out.vcov = jinv * meat * jinv.transpose() / n_eff;
  out.influence = -(out.scores * jinv.transpose());

  out.beta_hat = packed(p);
  const double var_beta = out.vcov(p, p);
  out.beta_se = var_beta > 0.0 ? std::sqrt(var_beta) : 0.0;
  const double zq = normal_quantile(0.5 * (1.0 + level));
  out.ci_lo = out.beta_hat - zq * out.beta_se;
  out.ci_hi = out.beta_hat + zq * out.beta_se;
  return out;
}

}  // namespace

Eigen::VectorXd efficient_score(double y, double z,
                                const Eigen::Ref<const Eigen::VectorXd>& x,
                                const Theta& theta, const SensitivityPoint& sp,
                                const FitOptions& opts, const ModelSpec& spec) {
  check_options(opts, spec);
  theta.validate();
  const HermiteRule herm = hermite_rule(opts.hermite_order);
  const Eigen::VectorXd xv = x;
  return efficient_score_impl(y, z, xv, theta, sp, opts, spec, herm);
}

Eigen::MatrixXd sandwich_variance(const Eigen::MatrixXd& scores,
                                  const Eigen::MatrixXd& jacobian, int n) {
  if (jacobian.rows() != jacobian.cols() ||
      scores.cols() != jacobian.rows()) {
    throw std::invalid_argument(
        "sandwich_variance: score and Jacobian dimensions disagree");
  }
  if (n < 1) {
    throw std::invalid_argument("sandwich_variance: n must be positive");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jacobian);
  if (!lu.isInvertible()) {
    throw std::runtime_error("fit: Jacobian singular at theta-hat");
  }
  const Eigen::MatrixXd jinv = lu.inverse();
  const Eigen::MatrixXd meat =
      scores.transpose() * scores / static_cast<double>(n);
  return jinv * meat * jinv.transpose() / static_cast<double>(n);
}

FitResult fit(const Dataset& data, const SensitivityPoint& sp,
              const FitOptions& opts, const ModelSpec& spec, double level) {
  return fit_impl(data, nullptr, sp, opts, spec, level);
}

FitResult fit_weighted(const Dataset& data, const Eigen::VectorXd& row_weights,
                       const SensitivityPoint& sp, const FitOptions& opts,
                       const ModelSpec& spec, double level) {
  return fit_impl(data, &row_weights, sp, opts, spec, level);
}

std::vector<SweepRow> sweep(const Dataset& data,
                            const std::vector<SensitivityPoint>& grid,
                            const FitOptions& opts, const ModelSpec& spec,
                            double level) {
  if (grid.empty()) {
    throw std::invalid_argument("sweep: empty sensitivity grid");
  }
  const int m = static_cast<int>(grid.size());
  std::vector<SweepRow> rows(m);
  std::vector<bool> attempted(m, false);
  std::vector<bool> solved(m, false);
  std::vector<Eigen::VectorXd> solution(m);

  auto dist2 = [&](int i, int j) {
    const double dd = grid[i].delta - grid[j].delta;
    const double dg = grid[i].gamma - grid[j].gamma;
    return dd * dd + dg * dg;
  };

  for (int round = 0; round < m; ++round) {
    int pick = -1;
    int anchor = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (attempted[i]) continue;
      if (round == 0) {
        // Start at the point nearest the origin, where the GLM start is best.
        const double d = grid[i].delta * grid[i].delta +
                         grid[i].gamma * grid[i].gamma;
        if (d < best) {
          best = d;
          pick = i;
        }
      } else {
        for (int j = 0; j < m; ++j) {
          if (!solved[j]) continue;
          const double d = dist2(i, j);
          if (d < best) {
            best = d;
            pick = i;
            anchor = j;
          }
        }
      }
    }
    if (pick < 0) {
      // No solved neighbor to extend from; fall back to input order.
      for (int i = 0; i < m; ++i) {
        if (!attempted[i]) {
          pick = i;
          break;
        }
      }
    }
    attempted[pick] = true;

    FitOptions local = opts;
    if (anchor >= 0) local.init = solution[anchor];
    rows[pick].sp = grid[pick];
    try {
      FitResult fr = fit(data, grid[pick], local, spec, level);
      rows[pick].converged = fr.converged;
      if (fr.converged) {
        solved[pick] = true;
        solution[pick] = fr.theta_hat.pack();
      } else {
        rows[pick].message = "did not converge after " +
                             std::to_string(opts.max_iter) + " iterations";
      }
      rows[pick].fit = std::move(fr);
    } catch (const std::exception& e) {
      rows[pick].converged = false;
      rows[pick].message = e.what();
    }
  }
  return rows;
}

TippingResult tipping_point(const Dataset& data, double t_max,
                            const FitOptions& opts, const ModelSpec& spec,
                            double level, double resolution) {
  if (!(t_max > 0.0) || !std::isfinite(t_max)) {
    throw std::invalid_argument("tipping_point: t_max must be positive");
  }
  if (!(resolution > 0.0)) {
    throw std::invalid_argument("tipping_point: resolution must be positive");
  }
  TippingResult out;
  out.resolution = resolution;

  std::vector<std::pair<double, Eigen::VectorXd>> visited;
  auto covers_zero = [&](double t) {
    FitOptions local = opts;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : visited) {
      if (std::abs(v.first - t) < best) {
        best = std::abs(v.first - t);
        local.init = v.second;
      }
    }
    FitResult fr = fit(data, SensitivityPoint{t, t}, local, spec, level);
    ++out.evaluations;
    if (!fr.converged) {
      throw std::runtime_error(
          "tipping_point: fit did not converge at t = " + std::to_string(t));
    }
    visited.emplace_back(t, fr.theta_hat.pack());
    return fr.ci_lo <= 0.0 && 0.0 <= fr.ci_hi;
  };

  if (covers_zero(0.0)) {
    out.t_star = 0.0;
    return out;
  }
  if (!covers_zero(t_max)) {
    out.t_star = std::nullopt;
    return out;
  }
  double lo = 0.0;      // does not cover zero
  double hi = t_max;    // covers zero
  while (hi - lo > resolution) {
    const double mid = 0.5 * (lo + hi);
    if (covers_zero(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.t_star = hi;
  return out;
}

}  // namespace semisens
