#pragma once

// Small numerical utilities shared across the library: numerically stable
// logistic helpers, log-sum-exp, the standard normal quantile/CDF, counter
// based seed derivation, and a self-contained random generator with fully
// reproducible draws (no reliance on std::*_distribution internals).

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace semisens {

// expit(x) = 1 / (1 + exp(-x)), branch on sign so large |x| never overflows.
double expit(double x);

// log(expit(x)) without catastrophic cancellation.
double log_expit(double x);

// log(sum(exp(v))) with the usual max shift; returns -inf for all -inf input.
double log_sum_exp(const Eigen::VectorXd& v);

// Standard normal density, log density, CDF and quantile.  The quantile uses
// Wichura's AS 241 rational approximations (double precision branch).
double normal_pdf(double x);
double normal_log_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);  // throws std::invalid_argument unless 0<p<1

// One splitmix64 step; also the basis of derive_seed.
std::uint64_t splitmix64(std::uint64_t& state);

// Deterministic per-unit seed: mixes a master seed with a unit index so that
// replication r / bootstrap draw b always sees the same stream regardless of
// scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Mersenne-twister backed generator with hand-rolled transforms so that every
// draw is bit-reproducible across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1]; used where log(u) must stay finite.
  double uniform_pos();
  // Standard normal via Box-Muller (one fresh pair per call, first value).
  double normal();
  // Bernoulli(p) as 0/1.
  double bernoulli(double p);
  // Beta(2,2): the median of three independent uniforms has density 6u(1-u).
  double beta22();

 private:
  std::mt19937_64 eng_;
};

// Number of worker threads: SEMISENS_THREADS if set (>=1), else the hardware
// concurrency, else 1.
int worker_count();

// Runs f(i) for i in [0, n) on up to worker_count() threads with a static
// block partition.  Caller-supplied f must write only to per-index slots; the
// partition is deterministic so results never depend on thread count.
void parallel_for(int n, const std::function<void(int)>& f);

}  // namespace semisens
