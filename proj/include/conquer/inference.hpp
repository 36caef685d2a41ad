#pragma once

#include "conquer/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace conquer {

struct BootstrapOptions
{
  //! Worker threads; the draws do not depend on this.
  int threads = 1;
  //! Test hook: every multiplier weight set to 1.
  bool unit_weights = false;
};

struct BootstrapResult
{
  Matrix draws; // usable replicates x p, original scale, replicate order
  Vector base;  // the point estimate the replicates were started from
  FitResult base_fit;
  int B = 0;
  std::uint64_t seed = 0;
  int failed = 0;

  int usable() const { return int(draws.rows()); }
  //! More than 5% of replicates failed.
  bool unreliable() const { return failed * 20 > B; }
};

enum class CiMethod
{
  Percentile,
  Pivotal,
  Normal
};

std::string to_string(CiMethod method);

struct ConfidenceIntervals
{
  CiMethod method = CiMethod::Percentile;
  double level = 0.95;
  Vector estimate;
  Vector lower;
  Vector upper;

  Vector width() const { return upper - lower; }
};

//! Rademacher multiplier bootstrap: each replicate minimizes the weighted
//! smoothed loss with w_i = 1 + e_i, starting from the full-sample fit.
//! Replicate b draws its weights from a stream seeded by (seed, b).
BootstrapResult bootstrap_fit(const Dataset& data, const FitConfig& cfg, int B,
                              std::uint64_t seed,
                              const BootstrapOptions& options = {});

//! Multiplier weights used by replicate b (values in {0, 2}).
std::vector<double> rademacher_weights(std::uint64_t seed, int b,
                                       Eigen::Index n);

//! ceil(q * m)-th order statistic of sorted values (1-based, clamped).
double order_statistic_quantile(std::span<const double> sorted, double q);

//! Bootstrap intervals refuse to work from fewer than min_draws usable
//! replicates.
inline constexpr int kMinBootstrapDraws = 20;

ConfidenceIntervals percentile_ci(const BootstrapResult& res, double alpha,
                                  int min_draws = kMinBootstrapDraws);
ConfidenceIntervals pivotal_ci(const BootstrapResult& res, double alpha,
                               int min_draws = kMinBootstrapDraws);
//! base +/- z_{1-alpha/2} * sample sd of the draws.
ConfidenceIntervals mb_norm_ci(const BootstrapResult& res, double alpha,
                               int min_draws = kMinBootstrapDraws);

enum class VarianceScaling
{
  //! V = (1/n) sum {Kbar(-e/h) - tau}^2 x x^T, consistent for tau(1-tau) Sigma.
  Standard,
  //! The 1/(nh) normalization, kept for comparison.
  Compat
};

struct SandwichEstimate
{
  Matrix D;          // Hessian at the estimate
  Matrix V;          // score covariance
  Matrix covariance; // n^{-1} D^{-1} V D^{-1}
  Vector std_errors;
};

SandwichEstimate sandwich_covariance(
  const Dataset& data, const Vector& beta, double tau, KernelKind kernel,
  double h, VarianceScaling scaling = VarianceScaling::Standard);

//! Plug-in normal intervals from the sandwich standard errors; alpha in (0, 1].
ConfidenceIntervals normal_ci(const Dataset& data, const Vector& beta,
                              double tau, KernelKind kernel, double h,
                              double alpha,
                              VarianceScaling scaling = VarianceScaling::Standard);

//! {method, level, coords: [{index, name, estimate, lower, upper}]}
nlohmann::json to_json(const ConfidenceIntervals& ci,
                       const std::vector<std::string>& names = {});

} // namespace conquer
