#pragma once

#include "conquer/kernels.hpp"
#include "conquer/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace conquer {

struct FitConfig
{
  double tau = 0.5;
  KernelKind kernel = KernelKind::Gaussian;
  //! Empty means "auto": resolved through default_bandwidth(n, p).
  std::optional<double> bandwidth;
  double tol = 1e-4;
  int max_iter = 5000;
  bool standardize = true;

  void validate() const;
  double resolve_bandwidth(Eigen::Index n, Eigen::Index p) const;
};

struct FitResult
{
  Vector beta; // original covariate scale
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  double h_used = 0.0;
  double loss = 0.0;
  //! BB steps replaced by the unit fallback step.
  int bb_fallbacks = 0;
  //! Set for estimators of non-convex objectives (Horowitz).
  bool nonconvex = false;
};

double smoothed_loss(const Dataset& data, const Vector& beta, double tau,
                     KernelKind kernel, double h);
Vector smoothed_gradient(const Dataset& data, const Vector& beta, double tau,
                         KernelKind kernel, double h);
Matrix smoothed_hessian(const Dataset& data, const Vector& beta, double tau,
                        KernelKind kernel, double h);

//! Weighted objective (1/n) sum_i w_i l_h(r_i). An empty weight span means
//! unit weights.
double weighted_smoothed_loss(const Dataset& data, const Vector& beta,
                              double tau, KernelKind kernel, double h,
                              std::span<const double> weights);

//! ((p + ln n) / n)^(2/5)
double default_bandwidth(Eigen::Index n, Eigen::Index p);

//! Median absolute deviation from the median, without consistency scaling.
double mad(std::span<const double> values);
double median(std::span<const double> values);

//! Huber loss H_gamma(u) and its averaged gradient over a dataset.
double huber_loss(double gamma, double u);
Vector huber_gradient(const Dataset& data, const Vector& beta, double gamma);

//! Huber M-estimate by GD-BB with gamma = 1.35 MAD(residuals) re-estimated
//! at every iteration, started from zero. Expects standardized covariates.
Vector huber_warm_start(const Dataset& data, double tol, int max_iter = 5000);

//! gamma used by the warm start for a residual vector, including the floor
//! applied when the MAD collapses to zero.
double huber_scale(std::span<const double> residuals, const Vector& y);

//! A conquer problem with bandwidth resolved and (optionally) standardized
//! covariates, reusable across many weighted solves.
class PreparedProblem
{
public:
  PreparedProblem(const Dataset& data, const FitConfig& cfg);

  //! GD-BB from init (original scale). weights empty means unit weights.
  FitResult solve(const Vector& init, std::span<const double> weights = {}) const;

  //! Huber warm start mapped to the original scale.
  Vector warm_start() const;

  const Dataset& original() const { return original_; }
  const Dataset& working() const
  {
    return standardized_ ? *standardized_ : original_;
  }
  const std::optional<StandardizeTransform>& transform() const
  {
    return transform_;
  }
  double bandwidth() const { return h_; }
  const FitConfig& config() const { return cfg_; }

  Vector to_working(const Vector& beta) const;
  Vector to_original(const Vector& beta_working) const;
  //! Original-scale gradient from a working-scale gradient.
  Vector gradient_to_original(const Vector& grad_working) const;

private:
  const Dataset& original_; // must outlive the problem
  std::optional<Dataset> standardized_;
  std::optional<StandardizeTransform> transform_;
  FitConfig cfg_;
  double h_;
};

//! Smoothed quantile regression via gradient descent with Barzilai-Borwein
//! steps. Without init, starts from the Huber warm start. Reaching max_iter
//! is reported through FitResult::converged, not thrown.
FitResult fit_conquer(const Dataset& data, const FitConfig& cfg,
                      const std::optional<Vector>& init = std::nullopt);

//! Horowitz smoothing: the indicator in the check loss replaced by the
//! integrated Gaussian kernel. Non-convex.
double horowitz_loss(const Dataset& data, const Vector& beta, double tau,
                     double h);
Vector horowitz_gradient(const Dataset& data, const Vector& beta, double tau,
                         double h);

//! Gradient descent with backtracking (0.3, 0.8) from a seeded random start.
FitResult fit_horowitz(const Dataset& data, const FitConfig& cfg,
                       std::uint64_t seed);

} // namespace conquer
