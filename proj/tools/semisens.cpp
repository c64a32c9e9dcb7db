// Command-line front end: fit / sweep / band / em / simulate / pool /
// identify.  Exit codes: 0 success, 1 usage error, 2 numerical failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "semisens/em.hpp"
#include "semisens/estimator.hpp"
#include "semisens/ident.hpp"
#include "semisens/io.hpp"
#include "semisens/model.hpp"
#include "semisens/simstudy.hpp"
#include "semisens/uncertainty.hpp"

namespace {

using namespace semisens;

struct DataArgs {
  std::string path;
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
  std::string family = "bernoulli";
  double sigma = 1.0;
};

void add_data_options(CLI::App* sub, DataArgs& a) {
  sub->add_option("--data", a.path, "CSV file with a header row")->required();
  sub->add_option("--outcome", a.outcome, "outcome column name")->required();
  sub->add_option("--treatment", a.treatment, "treatment column name (0/1)")
      ->required();
  sub->add_option("--covariates", a.covariates,
                  "comma-separated covariate column names")
      ->delimiter(',');
  sub->add_option("--family", a.family, "bernoulli or gaussian")
      ->check(CLI::IsMember({"bernoulli", "gaussian"}));
  sub->add_option("--sigma", a.sigma, "outcome scale (gaussian family)");
}

ModelSpec family_spec(const DataArgs& a) {
  ModelSpec spec;
  spec.outcome = a.family == "gaussian" ? OutcomeFamily::gaussian_identity
                                        : OutcomeFamily::bernoulli_logit;
  return spec;
}

Dataset load(const DataArgs& a, const ModelSpec& spec) {
  ColumnRoles roles;
  roles.outcome = a.outcome;
  roles.treatment = a.treatment;
  roles.covariates = a.covariates;
  return ingest(a.path, roles, spec.outcome);
}

// Primary output goes to --out when given (report to stdout), otherwise to
// stdout (report to stderr).
void emit(const std::string& primary, const std::string& side,
          const std::string& out_path) {
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) {
      throw std::invalid_argument("cannot open output file '" + out_path +
                                  "'");
    }
    f << primary;
    if (!side.empty()) std::cout << side;
  } else {
    std::cout << primary;
    if (!side.empty()) std::cerr << side;
  }
}

void check_increasing(const std::vector<double>& v, const std::string& what) {
  if (v.empty()) {
    throw std::invalid_argument(what + ": empty grid");
  }
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) {
      throw std::invalid_argument(what +
                                  ": grid values must be strictly increasing");
    }
  }
}

std::vector<SensitivityPoint> make_grid(const std::vector<double>& deltas,
                                        const std::vector<double>& gammas) {
  check_increasing(deltas, "--deltas");
  check_increasing(gammas, "--gammas");
  std::vector<SensitivityPoint> grid;
  for (double d : deltas) {
    for (double g : gammas) {
      grid.push_back(SensitivityPoint{d, g});
    }
  }
  return grid;
}

DgpKind parse_design(const std::string& name) {
  if (name == "table1" || name == "binary_u") return DgpKind::binary_u;
  if (name == "table2" || name == "beta_u") return DgpKind::beta_u;
  if (name == "table3" || name == "dependent_beta_u") {
    return DgpKind::dependent_beta_u;
  }
  if (name == "dependent_normal_u") return DgpKind::dependent_normal_u;
  if (name == "d2" || name == "gaussian_y") return DgpKind::gaussian_y;
  throw std::invalid_argument(
      "simulate: unknown design '" + name +
      "' (use table1/binary_u, table2/beta_u, table3/dependent_beta_u, "
      "dependent_normal_u, d2/gaussian_y)");
}

std::string design_name(DgpKind kind) {
  switch (kind) {
    case DgpKind::binary_u: return "binary_u";
    case DgpKind::beta_u: return "beta_u";
    case DgpKind::dependent_beta_u: return "dependent_beta_u";
    case DgpKind::dependent_normal_u: return "dependent_normal_u";
    case DgpKind::gaussian_y: return "gaussian_y";
  }
  throw std::invalid_argument("simulate: bad design kind");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "semisens: sensitivity analysis for unmeasured confounding via "
      "semiparametric efficient scores"};
  app.require_subcommand(1);
  int exit_code = 0;

  // ---- fit ----------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand(
      "fit", "one efficient-score fit at a fixed (delta, gamma)");
  DataArgs fit_data;
  add_data_options(fit_cmd, fit_data);
  double fit_delta = 0.0, fit_gamma = 0.0, fit_alpha = 0.1, fit_level = 0.95;
  std::string fit_prior, fit_out;
  int fit_hermite = 20;
  bool fit_influence = false;
  fit_cmd->add_option("--delta", fit_delta, "confounder-outcome coefficient");
  fit_cmd->add_option("--gamma", fit_gamma,
                      "confounder-treatment coefficient");
  fit_cmd->add_option("--prior", fit_prior,
                      "working prior: bernoulli:<p> | grid:<lo>:<hi>:<h> | "
                      "weights:<u1=w1,...>")
      ->required();
  fit_cmd->add_option("--alpha", fit_alpha, "Tikhonov level (grid priors)");
  fit_cmd->add_option("--level", fit_level, "confidence level");
  fit_cmd->add_option("--hermite-order", fit_hermite,
                      "per-window Gauss-Hermite order (gaussian family)");
  fit_cmd->add_flag("--influence", fit_influence,
                    "include per-observation influence values in the JSON");
  fit_cmd->add_option("--out", fit_out, "write JSON here instead of stdout");
  fit_cmd->callback([&]() {
    const ModelSpec spec = family_spec(fit_data);
    const Dataset data = load(fit_data, spec);
    FitOptions opts;
    opts.prior = parse_prior(fit_prior);
    opts.alpha = fit_alpha;
    opts.hermite_order = fit_hermite;
    opts.sigma = fit_data.sigma;
    const SensitivityPoint sp{fit_delta, fit_gamma};
    const FitResult fr = fit(data, sp, opts, spec, fit_level);
    SweepRow row;
    row.sp = sp;
    row.converged = fr.converged;
    if (!fr.converged) row.message = "did not converge";
    row.fit = fr;
    emit(fit_json(fr, sp, spec, fit_influence).dump(2) + "\n",
         report({row}, spec, fit_data.sigma), fit_out);
    if (!fr.converged) exit_code = 2;
  });

  // ---- sweep --------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "fits over the cartesian (delta, gamma) grid, CSV output");
  DataArgs sweep_data;
  add_data_options(sweep_cmd, sweep_data);
  std::vector<double> sweep_deltas, sweep_gammas;
  double sweep_alpha = 0.1, sweep_level = 0.95;
  std::string sweep_prior, sweep_out;
  int sweep_hermite = 20;
  sweep_cmd->add_option("--deltas", sweep_deltas,
                        "comma-separated, strictly increasing")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_option("--gammas", sweep_gammas,
                        "comma-separated, strictly increasing")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_option("--prior", sweep_prior, "working prior")->required();
  sweep_cmd->add_option("--alpha", sweep_alpha, "Tikhonov level");
  sweep_cmd->add_option("--level", sweep_level, "confidence level");
  sweep_cmd->add_option("--hermite-order", sweep_hermite,
                        "per-window Gauss-Hermite order");
  sweep_cmd->add_option("--out", sweep_out, "write CSV here");
  sweep_cmd->callback([&]() {
    const ModelSpec spec = family_spec(sweep_data);
    const Dataset data = load(sweep_data, spec);
    FitOptions opts;
    opts.prior = parse_prior(sweep_prior);
    opts.alpha = sweep_alpha;
    opts.hermite_order = sweep_hermite;
    opts.sigma = sweep_data.sigma;
    const auto grid = make_grid(sweep_deltas, sweep_gammas);
    const auto rows = sweep(data, grid, opts, spec, sweep_level);
    emit(sweep_csv(rows, spec, sweep_data.sigma),
         report(rows, spec, sweep_data.sigma), sweep_out);
  });

  // ---- band ---------------------------------------------------------------
  auto* band_cmd = app.add_subcommand(
      "band", "uniform confidence band over a (delta, gamma) grid");
  DataArgs band_data;
  add_data_options(band_cmd, band_data);
  std::vector<double> band_deltas, band_gammas;
  double band_alpha = 0.1, band_level = 0.95;
  std::string band_prior, band_out;
  int band_hermite = 20, band_draws = 1000;
  std::uint64_t band_seed = 0;
  bool band_raw = false;
  band_cmd->add_option("--deltas", band_deltas,
                       "comma-separated, strictly increasing")
      ->delimiter(',')
      ->required();
  band_cmd->add_option("--gammas", band_gammas,
                       "comma-separated, strictly increasing")
      ->delimiter(',')
      ->required();
  band_cmd->add_option("--prior", band_prior, "working prior")->required();
  band_cmd->add_option("--alpha", band_alpha, "Tikhonov level");
  band_cmd->add_option("--level", band_level, "uniform confidence level");
  band_cmd->add_option("--draws", band_draws, "multiplier bootstrap draws");
  band_cmd->add_option("--seed", band_seed, "bootstrap seed")->required();
  band_cmd->add_option("--hermite-order", band_hermite,
                       "per-window Gauss-Hermite order");
  band_cmd->add_flag("--raw-scores", band_raw,
                     "use raw efficient scores instead of influence values");
  band_cmd->add_option("--out", band_out, "write CSV here");
  band_cmd->callback([&]() {
    const ModelSpec spec = family_spec(band_data);
    const Dataset data = load(band_data, spec);
    FitOptions opts;
    opts.prior = parse_prior(band_prior);
    opts.alpha = band_alpha;
    opts.hermite_order = band_hermite;
    opts.sigma = band_data.sigma;
    const auto grid = make_grid(band_deltas, band_gammas);
    const auto rows = sweep(data, grid, opts, spec, band_level);
    std::vector<FitResult> fits;
    for (const SweepRow& r : rows) {
      if (!r.converged || !r.fit.has_value()) {
        throw std::runtime_error(
            "band: fit did not converge at delta=" + fmt_double(r.sp.delta) +
            ", gamma=" + fmt_double(r.sp.gamma) +
            (r.message.empty() ? "" : ": " + r.message));
      }
      fits.push_back(*r.fit);
    }
    const BandResult band =
        uniform_band(fits, grid, band_level, band_draws, band_seed, band_raw);
    emit(band_csv(band, spec, band_data.sigma),
         report(rows, spec, band_data.sigma), band_out);
  });

  // ---- em -----------------------------------------------------------------
  auto* em_cmd = app.add_subcommand(
      "em", "parametric EM comparator (binary outcome, Bernoulli confounder)");
  DataArgs em_data;
  add_data_options(em_cmd, em_data);
  double em_delta = 0.0, em_gamma = 0.0, em_pu = 0.5, em_level = 0.95;
  std::string em_out;
  em_cmd->add_option("--delta", em_delta, "confounder-outcome coefficient");
  em_cmd->add_option("--gamma", em_gamma, "confounder-treatment coefficient");
  em_cmd->add_option("--p-u", em_pu, "fixed P(U = 1)");
  em_cmd->add_option("--level", em_level, "confidence level");
  em_cmd->add_option("--out", em_out, "write JSON here");
  em_cmd->callback([&]() {
    if (em_data.family != "bernoulli") {
      throw std::invalid_argument("em: binary outcome only");
    }
    const ModelSpec spec = family_spec(em_data);
    const Dataset data = load(em_data, spec);
    EmOptions opts;
    opts.p_u = em_pu;
    const SensitivityPoint sp{em_delta, em_gamma};
    const EmResult er = em_fit(data, sp, opts, em_level);

    nlohmann::json j;
    j["method"] = "em";
    j["family"] = "bernoulli";
    j["delta"] = sp.delta;
    j["gamma"] = sp.gamma;
    j["p_u"] = em_pu;
    j["level"] = er.level;
    j["beta_hat"] = er.beta_hat;
    j["se"] = er.beta_se;
    j["ci_lo"] = er.ci_lo;
    j["ci_hi"] = er.ci_hi;
    j["converged"] = er.converged;
    j["iterations"] = er.iterations;
    j["loglik"] = er.loglik;
    nlohmann::json theta;
    theta["lambda"] = std::vector<double>(
        er.theta_hat.lambda.data(),
        er.theta_hat.lambda.data() + er.theta_hat.lambda.size());
    theta["beta"] = er.theta_hat.beta;
    theta["kappa"] = std::vector<double>(
        er.theta_hat.kappa.data(),
        er.theta_hat.kappa.data() + er.theta_hat.kappa.size());
    j["theta"] = theta;

    FitResult as_fit;
    as_fit.theta_hat = er.theta_hat;
    as_fit.vcov = er.vcov;
    as_fit.beta_hat = er.beta_hat;
    as_fit.beta_se = er.beta_se;
    as_fit.ci_lo = er.ci_lo;
    as_fit.ci_hi = er.ci_hi;
    as_fit.level = er.level;
    as_fit.iterations = er.iterations;
    as_fit.converged = er.converged;
    SweepRow row;
    row.sp = sp;
    row.converged = er.converged;
    if (!er.converged) row.message = "did not converge";
    row.fit = as_fit;
    emit(j.dump(2) + "\n", report({row}, spec, 1.0), em_out);
    if (!er.converged) exit_code = 2;
  });

  // ---- simulate -----------------------------------------------------------
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Monte Carlo study on a shipped design, metrics CSV");
  // The mesh option is spelled --h, so this subcommand keeps only the long
  // help flag.
  sim_cmd->set_help_flag("--help", "print this help message and exit");
  std::string sim_design, sim_method = "semi", sim_out;
  int sim_n = 500, sim_reps = 200;
  double sim_h = 0.1, sim_alpha = 0.1, sim_pu = 0.5, sim_level = 0.95;
  std::uint64_t sim_seed = 0;
  auto* sim_delta_opt = sim_cmd->add_option(
      "--delta", "override the design's confounder-outcome coefficient");
  auto* sim_gamma_opt = sim_cmd->add_option(
      "--gamma", "override the design's confounder-treatment coefficient");
  sim_cmd->add_option("--design", sim_design,
                      "table1/binary_u, table2/beta_u, "
                      "table3/dependent_beta_u, dependent_normal_u, "
                      "d2/gaussian_y")
      ->required();
  sim_cmd->add_option("--method", sim_method, "semi or em")
      ->check(CLI::IsMember({"semi", "em"}));
  sim_cmd->add_option("--n", sim_n, "sample size per replication");
  sim_cmd->add_option("--reps", sim_reps, "replications");
  sim_cmd->add_option("--h", sim_h, "working-prior grid mesh");
  sim_cmd->add_option("--alpha", sim_alpha, "Tikhonov level");
  sim_cmd->add_option("--p-u", sim_pu, "EM fixed P(U = 1)");
  sim_cmd->add_option("--level", sim_level, "confidence level");
  sim_cmd->add_option("--seed", sim_seed, "master seed")->required();
  sim_cmd->add_option("--out", sim_out, "write CSV here");
  sim_cmd->callback([&]() {
    const DgpKind kind = parse_design(sim_design);
    DgpSpec dgp;
    dgp.kind = kind;
    dgp.n = sim_n;
    dgp.seed = sim_seed;
    StudyMethod method;
    if (sim_method == "em") {
      if (design_model(kind).outcome != OutcomeFamily::bernoulli_logit) {
        throw std::invalid_argument("simulate: em requires a binary outcome");
      }
      method.kind = StudyMethod::Kind::em;
      method.p_u = sim_pu;
    } else {
      method.kind = StudyMethod::Kind::semi;
      method.prior = design_prior(kind, sim_h);
      method.alpha = sim_alpha;
    }
    SensitivityPoint sp = design_point(kind);
    if (sim_delta_opt->count() > 0) sp.delta = sim_delta_opt->as<double>();
    if (sim_gamma_opt->count() > 0) sp.gamma = sim_gamma_opt->as<double>();
    const StudyMetrics m =
        run_study(dgp, method, sp, sim_reps, sim_level, sim_seed);
    const double h_used = method.prior.atoms ? 0.0 : method.prior.mesh;
    emit(metrics_csv_header() + metrics_csv_row(design_name(kind), sim_method,
                                                sim_n, h_used, sim_alpha, sp,
                                                m),
         "", sim_out);
  });

  // ---- pool ---------------------------------------------------------------
  auto* pool_cmd = app.add_subcommand(
      "pool", "Rubin's-rules pooling of fitted JSON results");
  std::vector<std::string> pool_inputs;
  double pool_level = 0.95;
  std::string pool_out;
  pool_cmd->add_option("--inputs", pool_inputs,
                       "comma-separated JSON fit files")
      ->delimiter(',')
      ->required();
  pool_cmd->add_option("--level", pool_level, "confidence level");
  pool_cmd->add_option("--out", pool_out, "write CSV here");
  pool_cmd->callback([&]() {
    std::vector<double> betas, ses;
    for (const std::string& path : pool_inputs) {
      const auto [b, s] = read_fit_json(path);
      betas.push_back(b);
      ses.push_back(s);
    }
    const PooledResult pr = rubin_pool(betas, ses, pool_level);
    std::string csv = "beta_hat,se,ci_lo,ci_hi,level,within,between,m\n";
    csv += fmt_double(pr.beta) + "," + fmt_double(pr.se) + "," +
           fmt_double(pr.ci_lo) + "," + fmt_double(pr.ci_hi) + "," +
           fmt_double(pr.level) + "," + fmt_double(pr.within) + "," +
           fmt_double(pr.between) + "," + std::to_string(pr.m) + "\n";
    emit(csv, "", pool_out);
  });

  // ---- identify -----------------------------------------------------------
  auto* id_cmd = app.add_subcommand(
      "identify", "invert observed 2x2 cell probabilities at (delta, gamma)");
  std::vector<double> id_cells;
  double id_delta = 0.0, id_gamma = 0.0;
  std::string id_prior, id_out;
  id_cmd->add_option("--cells", id_cells,
                     "P(y,z) as l00,l01,l10,l11 (yz order 00,01,10,11)")
      ->delimiter(',')
      ->required()
      ->expected(1, 4);
  id_cmd->add_option("--delta", id_delta, "confounder-outcome coefficient");
  id_cmd->add_option("--gamma", id_gamma, "confounder-treatment coefficient");
  id_cmd->add_option("--prior", id_prior,
                     "law of U given the (y,z)=(0,0) cell")
      ->required();
  id_cmd->add_option("--out", id_out, "write JSON here");
  id_cmd->callback([&]() {
    if (id_cells.size() != 4) {
      throw std::invalid_argument(
          "identify: --cells needs exactly 4 values l00,l01,l10,l11");
    }
    ObservedCells cells;
    cells.l00 = id_cells[0];
    cells.l01 = id_cells[1];
    cells.l10 = id_cells[2];
    cells.l11 = id_cells[3];
    const SensitivityPoint sp{id_delta, id_gamma};
    const IdentifiedParams p = identify(cells, parse_prior(id_prior), sp);
    nlohmann::json j;
    j["alpha0"] = p.alpha0;
    j["beta0"] = p.beta0;
    j["beta_z"] = p.beta_z;
    emit(j.dump(2) + "\n", "", id_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
