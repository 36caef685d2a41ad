#pragma once

#include "conquer/solver.hpp"

#include <optional>
#include <string>

namespace conquer {

struct OneStepConfig
{
  double tau = 0.5;
  std::optional<double> pilot_bandwidth;      // h; empty = default_bandwidth
  std::optional<double> refinement_bandwidth; // b; empty = by order
  //! Order of the Gaussian-based refinement kernel: 4 or 6. Order 2 (plain
  //! Gaussian) is accepted as the Newton-step reduction.
  int order = 4;
  KernelKind pilot_kernel = KernelKind::Gaussian;
  double tol = 1e-4;
  int max_iter = 5000;
  bool standardize = true;

  void validate() const;
  FitConfig pilot_config() const;
};

enum class SolvePath
{
  Cholesky,
  Jittered,
  ConjugateGradient
};

std::string to_string(SolvePath path);

struct OneStepResult
{
  FitResult fit;     // beta is the one-step estimate
  FitResult pilot;   // second-order-kernel fit it refines
  double b_used = 0.0;
  SolvePath path = SolvePath::Cholesky;
  double jitter = 0.0;
  double system_residual = 0.0; // ||H step - g||_2
  double rhs_norm = 0.0;        // ||g||_2
};

//! ((p + ln n) / n)^(2/9) for order 4; the order-6 default uses exponent 2/13.
double default_refinement_bandwidth(Eigen::Index n, Eigen::Index p,
                                    int order = 4);

//! (1/n) sum G_b(r_i) x_i x_i^T with G the order-2r Gaussian-based kernel.
Matrix higher_order_hessian(const Dataset& data, const Vector& beta,
                            int half_order, double b);

//! (1/n) sum {Gbar(r_i / b) + tau - 1} x_i, the negated gradient of the
//! order-2r smoothed loss.
Vector higher_order_rhs(const Dataset& data, const Vector& beta, double tau,
                        int half_order, double b);

//! Newton correction of a given pilot: solves H step = g at the pilot.
OneStepResult one_step_from_pilot(const Dataset& data, const FitResult& pilot,
                                  const OneStepConfig& cfg);

//! Pilot conquer fit followed by a single higher-order-kernel Newton step.
OneStepResult one_step_fit(const Dataset& data, const OneStepConfig& cfg);

} // namespace conquer
