#include "semisens/io.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "semisens/mathutil.hpp"

namespace semisens {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  return cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan";
}

double parse_number(const std::string& cell, int line_no,
                    const std::string& column) {
  const char* begin = cell.data();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end != begin + cell.size() || cell.empty()) {
    throw std::invalid_argument("ingest: non-numeric value '" + cell +
                                "' on line " + std::to_string(line_no) +
                                " in column '" + column + "'");
  }
  if (!std::isfinite(v)) {
    throw std::invalid_argument("ingest: non-finite value on line " +
                                std::to_string(line_no) + " in column '" +
                                column + "'");
  }
  return v;
}

double parse_plain(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  const char* begin = t.data();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (t.empty() || end != begin + t.size()) {
    throw std::invalid_argument("parse_prior: bad " + what + " '" + text +
                                "'");
  }
  return v;
}

std::string family_name(const ModelSpec& spec) {
  return spec.outcome == OutcomeFamily::bernoulli_logit ? "bernoulli"
                                                        : "gaussian";
}

double delta_interpretation(const SensitivityPoint& sp, const ModelSpec& spec,
                            double sigma) {
  if (spec.outcome == OutcomeFamily::bernoulli_logit) {
    return std::exp(sp.delta);
  }
  return sp.delta / sigma;
}

void append_point_fields(std::ostringstream& os, const SweepRow& row,
                         const ModelSpec& spec, double sigma) {
  os << fmt_double(row.sp.delta) << ',' << fmt_double(row.sp.gamma) << ',';
  if (row.fit.has_value() && row.converged) {
    const FitResult& f = *row.fit;
    os << fmt_double(f.beta_hat) << ',' << fmt_double(f.beta_se) << ','
       << fmt_double(f.ci_lo) << ',' << fmt_double(f.ci_hi) << ",1,";
  } else {
    os << ",,,,0,";
  }
  os << fmt_double(std::exp(row.sp.gamma)) << ','
     << fmt_double(delta_interpretation(row.sp, spec, sigma));
}

}  // namespace

Dataset ingest(const std::string& path, const ColumnRoles& roles,
               OutcomeFamily family) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("ingest: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::invalid_argument("ingest: empty file '" + path + "'");
  }
  std::vector<std::string> header = split(line, ',');
  for (auto& h : header) h = trim(h);

  auto find_col = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<int>(j);
    }
    throw std::invalid_argument("ingest: column '" + name +
                                "' not found in header");
  };

  std::vector<std::string> role_names = {roles.outcome, roles.treatment};
  role_names.insert(role_names.end(), roles.covariates.begin(),
                    roles.covariates.end());
  for (std::size_t i = 0; i < role_names.size(); ++i) {
    for (std::size_t j = i + 1; j < role_names.size(); ++j) {
      if (role_names[i] == role_names[j]) {
        throw std::invalid_argument("ingest: column '" + role_names[i] +
                                    "' assigned to two roles");
      }
    }
  }

  const int y_col = find_col(roles.outcome);
  const int z_col = find_col(roles.treatment);
  std::vector<int> x_cols;
  for (const auto& c : roles.covariates) x_cols.push_back(find_col(c));

  struct Row {
    double y, z;
    std::vector<double> x;
  };
  std::vector<Row> rows;
  int incomplete = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split(line, ',');
    for (auto& c : cells) c = trim(c);
    bool missing = cells.size() != header.size();
    if (!missing) {
      missing = is_missing(cells[y_col]) || is_missing(cells[z_col]);
      for (int c : x_cols) missing = missing || is_missing(cells[c]);
    }
    if (missing) {
      ++incomplete;
      continue;
    }
    Row r;
    r.y = parse_number(cells[y_col], line_no, roles.outcome);
    r.z = parse_number(cells[z_col], line_no, roles.treatment);
    if (r.z != 0.0 && r.z != 1.0) {
      throw std::invalid_argument("ingest: treatment value '" +
                                  cells[z_col] + "' on line " +
                                  std::to_string(line_no) + " is not 0/1");
    }
    if (family == OutcomeFamily::bernoulli_logit && r.y != 0.0 && r.y != 1.0) {
      throw std::invalid_argument("ingest: outcome value '" + cells[y_col] +
                                  "' on line " + std::to_string(line_no) +
                                  " is not 0/1");
    }
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      r.x.push_back(
          parse_number(cells[x_cols[k]], line_no, roles.covariates[k]));
    }
    rows.push_back(std::move(r));
  }
  if (incomplete > 0) {
    throw std::invalid_argument(
        "ingest: " + std::to_string(incomplete) + " incomplete row" +
        (incomplete == 1 ? "" : "s") + " (missing cells) in '" + path + "'");
  }
  if (rows.empty()) {
    throw std::invalid_argument("ingest: no data rows in '" + path + "'");
  }

  const int n = static_cast<int>(rows.size());
  const int p = 1 + static_cast<int>(x_cols.size());
  Dataset data;
  data.y.resize(n);
  data.z.resize(n);
  data.X.resize(n, p);
  for (int i = 0; i < n; ++i) {
    data.y(i) = rows[i].y;
    data.z(i) = rows[i].z;
    data.X(i, 0) = 1.0;
    for (int k = 1; k < p; ++k) data.X(i, k) = rows[i].x[k - 1];
  }
  data.validate(family);
  return data;
}

WorkingPrior parse_prior(const std::string& text) {
  const std::vector<std::string> parts = split(trim(text), ':');
  if (parts.empty()) {
    throw std::invalid_argument("parse_prior: empty prior spec");
  }
  const std::string kind = trim(parts[0]);
  if (kind == "bernoulli") {
    if (parts.size() != 2) {
      throw std::invalid_argument(
          "parse_prior: expected bernoulli:<p>, got '" + text + "'");
    }
    return make_bernoulli_prior(parse_plain(parts[1], "probability"));
  }
  if (kind == "grid") {
    if (parts.size() != 4) {
      throw std::invalid_argument(
          "parse_prior: expected grid:<lo>:<hi>:<h>, got '" + text + "'");
    }
    return make_grid_prior(parse_plain(parts[1], "lower bound"),
                           parse_plain(parts[2], "upper bound"),
                           parse_plain(parts[3], "mesh"));
  }
  if (kind == "weights") {
    if (parts.size() != 2) {
      throw std::invalid_argument(
          "parse_prior: expected weights:<u1=w1,...>, got '" + text + "'");
    }
    std::vector<double> support, weights;
    for (const std::string& item : split(parts[1], ',')) {
      const std::vector<std::string> kv = split(item, '=');
      if (kv.size() != 2) {
        throw std::invalid_argument("parse_prior: bad weights entry '" +
                                    item + "'");
      }
      support.push_back(parse_plain(kv[0], "support point"));
      weights.push_back(parse_plain(kv[1], "weight"));
    }
    return make_weights_prior(support, weights);
  }
  throw std::invalid_argument("parse_prior: unknown prior kind '" + kind +
                              "' (use bernoulli:, grid:, or weights:)");
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) {
    throw std::runtime_error("fmt_double: formatting failed");
  }
  return std::string(buf, res.ptr);
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const ModelSpec& spec,
                      double sigma) {
  std::ostringstream os;
  os << "delta,gamma,beta_hat,se,ci_lo,ci_hi,converged,"
        "interpretation_gamma_factor,interpretation_delta_factor\n";
  for (const SweepRow& row : rows) {
    append_point_fields(os, row, spec, sigma);
    os << '\n';
  }
  return os.str();
}

std::string band_csv(const BandResult& band, const ModelSpec& spec,
                     double sigma) {
  std::ostringstream os;
  os << "delta,gamma,beta_hat,se,ci_lo,ci_hi,converged,"
        "interpretation_gamma_factor,interpretation_delta_factor,"
        "c_hat,band_lo,band_hi\n";
  const double zq = normal_quantile(0.5 * (1.0 + band.level));
  for (std::size_t k = 0; k < band.grid.size(); ++k) {
    const double se = std::sqrt(band.variance(static_cast<int>(k)));
    const double b = band.beta(static_cast<int>(k));
    const SensitivityPoint& sp = band.grid[k];
    os << fmt_double(sp.delta) << ',' << fmt_double(sp.gamma) << ','
       << fmt_double(b) << ',' << fmt_double(se) << ','
       << fmt_double(b - zq * se) << ',' << fmt_double(b + zq * se) << ",1,"
       << fmt_double(std::exp(sp.gamma)) << ','
       << fmt_double(delta_interpretation(sp, spec, sigma)) << ','
       << fmt_double(band.c_hat) << ','
       << fmt_double(band.band_lo(static_cast<int>(k))) << ','
       << fmt_double(band.band_hi(static_cast<int>(k))) << '\n';
  }
  return os.str();
}

std::string metrics_csv_header() {
  return "design,method,n,h,alpha,delta,gamma,reps,failures,mean,se,abs_bias,"
         "pct_bias,coverage,rmse\n";
}

std::string metrics_csv_row(const std::string& design,
                            const std::string& method, int n, double h,
                            double alpha, const SensitivityPoint& sp,
                            const StudyMetrics& m) {
  std::ostringstream os;
  os << design << ',' << method << ',' << n << ',' << fmt_double(h) << ','
     << fmt_double(alpha) << ',' << fmt_double(sp.delta) << ','
     << fmt_double(sp.gamma) << ',' << m.reps << ',' << m.failures << ','
     << fmt_double(m.mean) << ',' << fmt_double(m.se) << ','
     << fmt_double(m.abs_bias) << ',' << fmt_double(m.pct_bias) << ','
     << fmt_double(m.coverage) << ',' << fmt_double(m.rmse) << '\n';
  return os.str();
}

nlohmann::json fit_json(const FitResult& fit, const SensitivityPoint& sp,
                        const ModelSpec& spec, bool include_influence) {
  nlohmann::json j;
  j["family"] = family_name(spec);
  j["delta"] = sp.delta;
  j["gamma"] = sp.gamma;
  j["level"] = fit.level;
  j["beta_hat"] = fit.beta_hat;
  j["se"] = fit.beta_se;
  j["ci_lo"] = fit.ci_lo;
  j["ci_hi"] = fit.ci_hi;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["final_norm"] = fit.final_norm;

  nlohmann::json theta;
  theta["lambda"] = std::vector<double>(
      fit.theta_hat.lambda.data(),
      fit.theta_hat.lambda.data() + fit.theta_hat.lambda.size());
  theta["beta"] = fit.theta_hat.beta;
  theta["kappa"] = std::vector<double>(
      fit.theta_hat.kappa.data(),
      fit.theta_hat.kappa.data() + fit.theta_hat.kappa.size());
  theta["sigma"] = fit.theta_hat.sigma;
  j["theta"] = theta;

  nlohmann::json vcov = nlohmann::json::array();
  for (int r = 0; r < fit.vcov.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < fit.vcov.cols(); ++c) row.push_back(fit.vcov(r, c));
    vcov.push_back(row);
  }
  j["vcov"] = vcov;

  if (include_influence) {
    nlohmann::json inf = nlohmann::json::array();
    for (int r = 0; r < fit.influence.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < fit.influence.cols(); ++c) {
        row.push_back(fit.influence(r, c));
      }
      inf.push_back(row);
    }
    j["influence"] = inf;
  }
  return j;
}

std::pair<double, double> read_fit_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("pool: cannot open '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument("pool: '" + path + "' is not valid JSON: " +
                                e.what());
  }
  if (!j.contains("beta_hat") || !j.contains("se")) {
    throw std::invalid_argument("pool: '" + path +
                                "' lacks beta_hat/se fields");
  }
  return {j.at("beta_hat").get<double>(), j.at("se").get<double>()};
}

std::string report(const std::vector<SweepRow>& rows, const ModelSpec& spec,
                   double sigma) {
  std::ostringstream os;
  char buf[160];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "delta=%g, gamma=%g: ", row.sp.delta,
                  row.sp.gamma);
    os << buf;
    if (row.fit.has_value() && row.converged) {
      const FitResult& f = *row.fit;
      std::snprintf(buf, sizeof(buf),
                    "beta_hat=%.4f, se=%.4f, %d%% CI [%.4f, %.4f]\n",
                    f.beta_hat, f.beta_se,
                    static_cast<int>(std::lround(100.0 * f.level)), f.ci_lo,
                    f.ci_hi);
      os << buf;
    } else {
      os << "fit failed"
         << (row.message.empty() ? "" : " (" + row.message + ")") << "\n";
    }
    if (row.sp.gamma != 0.0) {
      std::snprintf(buf, sizeof(buf),
                    "  Two subjects alike in measured covariates may differ "
                    "in their odds of receiving the treatment by at most a "
                    "factor of %.2f.\n",
                    std::exp(std::abs(row.sp.gamma)));
      os << buf;
    }
    if (row.sp.delta != 0.0) {
      if (spec.outcome == OutcomeFamily::bernoulli_logit) {
        std::snprintf(buf, sizeof(buf),
                      "  Two subjects alike in measured covariates and "
                      "treatment may differ in their odds of a positive "
                      "outcome by at most a factor of %.2f.\n",
                      std::exp(std::abs(row.sp.delta)));
      } else {
        std::snprintf(buf, sizeof(buf),
                      "  Two subjects alike in measured covariates and "
                      "treatment may differ in their mean outcome by at most "
                      "%.2f standard deviations.\n",
                      std::abs(row.sp.delta) / sigma);
      }
      os << buf;
    }
  }
  return os.str();
}

}  // namespace semisens
