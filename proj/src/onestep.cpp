#include "conquer/onestep.hpp"

#include "conquer/error.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>

namespace conquer {

void OneStepConfig::validate() const
{
  validate_tau(tau);
  if (pilot_bandwidth)
    validate_bandwidth(*pilot_bandwidth);
  if (refinement_bandwidth)
    validate_bandwidth(*refinement_bandwidth);
  if (order != 2 && order != 4 && order != 6)
    throw DomainError("refinement kernel order must be 4 or 6, got " +
                      std::to_string(order));
  if (!(tol > 0.0) || max_iter < 1)
    throw DomainError("invalid solver controls");
}

FitConfig OneStepConfig::pilot_config() const
{
  FitConfig cfg;
  cfg.tau = tau;
  cfg.kernel = pilot_kernel;
  cfg.bandwidth = pilot_bandwidth;
  cfg.tol = tol;
  cfg.max_iter = max_iter;
  cfg.standardize = standardize;
  return cfg;
}

std::string to_string(SolvePath path)
{
  switch (path) {
    case SolvePath::Cholesky:
      return "cholesky";
    case SolvePath::Jittered:
      return "jittered-cholesky";
    case SolvePath::ConjugateGradient:
      return "conjugate-gradient";
  }
  return "unknown";
}

double default_refinement_bandwidth(Eigen::Index n, Eigen::Index p, int order)
{
  if (p < 1 || n <= p)
    throw DomainError("refinement bandwidth needs n > p >= 1");
  double exponent = 0.0;
  switch (order) {
    case 2:
      exponent = 2.0 / 5.0;
      break;
    case 4:
      exponent = 2.0 / 9.0;
      break;
    case 6:
      exponent = 2.0 / 13.0;
      break;
    default:
      throw DomainError("refinement kernel order must be 4 or 6");
  }
  return std::pow((double(p) + std::log(double(n))) / double(n), exponent);
}

Matrix higher_order_hessian(const Dataset& data, const Vector& beta,
                            int half_order, double b)
{
  validate_bandwidth(b);
  const Vector r = residuals(data, beta);
  Vector g(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i)
    g(i) = detail::hk_density(half_order, r(i) / b);
  Matrix H = data.X().transpose() * g.asDiagonal() * data.X();
  H /= double(data.n()) * b;
  return 0.5 * (H + H.transpose());
}

Vector higher_order_rhs(const Dataset& data, const Vector& beta, double tau,
                        int half_order, double b)
{
  validate_tau(tau);
  validate_bandwidth(b);
  const Vector r = residuals(data, beta);
  Vector s(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i)
    s(i) = detail::hk_cdf(half_order, r(i) / b) + tau - 1.0;
  return data.X().transpose() * s / double(data.n());
}

namespace {

struct Solution
{
  Vector step;
  SolvePath path;
  double jitter = 0.0;
  double residual = 0.0;
};

std::optional<Solution> accept(const Matrix& H, const Vector& g, Vector step,
                               SolvePath path, double jitter)
{
  if (!step.allFinite())
    return std::nullopt;
  const double res = (H * step - g).norm();
  if (res > 1e-8 * (1.0 + g.norm()))
    return std::nullopt;
  return Solution{ std::move(step), path, jitter, res };
}

Solution solve_newton_system(const Matrix& H, const Vector& g)
{
  bool factorized = false;
  {
    const Eigen::LLT<Matrix> llt(H);
    if (llt.info() == Eigen::Success) {
      factorized = true;
      if (auto s = accept(H, g, llt.solve(g), SolvePath::Cholesky, 0.0))
        return *s;
    }
  }
  const double scale = H.trace() / double(H.rows());
  if (scale > 0.0) {
    for (double factor : { 1e-10, 1e-8, 1e-6 }) {
      const double lambda = factor * scale;
      const Matrix Hj = H + lambda * Matrix::Identity(H.rows(), H.cols());
      const Eigen::LLT<Matrix> llt(Hj);
      if (llt.info() != Eigen::Success)
        continue;
      factorized = true;
      if (auto s = accept(H, g, llt.solve(g), SolvePath::Jittered, lambda))
        return *s;
    }
  }
  // CG only as a last resort for a positive definite but badly conditioned H
  if (factorized) {
    Eigen::ConjugateGradient<Matrix, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-14);
    cg.setMaxIterations(int(10 * H.rows()));
    cg.compute(H);
    if (auto s = accept(H, g, cg.solve(g), SolvePath::ConjugateGradient, 0.0))
      return *s;
  }
  throw NonPositiveDefiniteError(
    "higher-order Hessian is not positive definite at the pilot estimate; "
    "try a larger refinement bandwidth b");
}

} // namespace

OneStepResult one_step_from_pilot(const Dataset& data, const FitResult& pilot,
                                  const OneStepConfig& cfg)
{
  cfg.validate();
  check_coefficient_dimension(data, pilot.beta);
  const int r = cfg.order / 2;
  const double b = cfg.refinement_bandwidth
                     ? *cfg.refinement_bandwidth
                     : default_refinement_bandwidth(data.n(), data.p(), cfg.order);

  const Matrix H = higher_order_hessian(data, pilot.beta, r, b);
  const Vector g = higher_order_rhs(data, pilot.beta, cfg.tau, r, b);
  const Solution sol = solve_newton_system(H, g);

  OneStepResult out;
  out.pilot = pilot;
  out.b_used = b;
  out.path = sol.path;
  out.jitter = sol.jitter;
  out.system_residual = sol.residual;
  out.rhs_norm = g.norm();

  out.fit = pilot;
  out.fit.beta = pilot.beta + sol.step;
  out.fit.iterations = pilot.iterations + 1;
  out.fit.grad_norm = higher_order_rhs(data, out.fit.beta, cfg.tau, r, b).norm();
  out.fit.converged = pilot.converged;
  // reported on the pilot's (convex) objective
  out.fit.loss =
    smoothed_loss(data, out.fit.beta, cfg.tau, cfg.pilot_kernel, pilot.h_used);
  out.fit.h_used = pilot.h_used;
  return out;
}

OneStepResult one_step_fit(const Dataset& data, const OneStepConfig& cfg)
{
  cfg.validate();
  const FitResult pilot = fit_conquer(data, cfg.pilot_config());
  if (!pilot.converged)
    throw NumericalError("pilot conquer fit did not converge in " +
                         std::to_string(pilot.iterations) + " iterations");
  return one_step_from_pilot(data, pilot, cfg);
}

} // namespace conquer
