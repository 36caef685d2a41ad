#include "conquer/kernels.hpp"

#include "conquer/error.hpp"

#include <boost/math/special_functions/erf.hpp>

namespace conquer {

KernelKind parse_kernel(std::string_view name)
{
  if (name == "uniform")
    return KernelKind::Uniform;
  if (name == "gaussian")
    return KernelKind::Gaussian;
  if (name == "logistic")
    return KernelKind::Logistic;
  if (name == "epanechnikov")
    return KernelKind::Epanechnikov;
  if (name == "triangular")
    return KernelKind::Triangular;
  throw DomainError("unknown kernel '" + std::string(name) + "'");
}

std::string to_string(KernelKind kind)
{
  switch (kind) {
    case KernelKind::Uniform:
      return "uniform";
    case KernelKind::Gaussian:
      return "gaussian";
    case KernelKind::Logistic:
      return "logistic";
    case KernelKind::Epanechnikov:
      return "epanechnikov";
    case KernelKind::Triangular:
      return "triangular";
  }
  return "unknown";
}

HigherOrderKernel parse_higher_order_kernel(std::string_view name)
{
  if (name == "gaussian" || name == "gaussian2")
    return { 1 };
  if (name == "gaussian4")
    return { 2 };
  if (name == "gaussian6")
    return { 3 };
  throw DomainError("unknown higher-order kernel '" + std::string(name) + "'");
}

std::string to_string(HigherOrderKernel kernel)
{
  if (kernel.half_order == 1)
    return "gaussian";
  return "gaussian" + std::to_string(kernel.order());
}

bool has_compact_support(KernelKind kind)
{
  return kind == KernelKind::Uniform || kind == KernelKind::Epanechnikov ||
         kind == KernelKind::Triangular;
}

double normal_pdf(double u)
{
  return detail::phi(u);
}

double normal_cdf(double u)
{
  return detail::Phi(u);
}

double normal_quantile(double q)
{
  if (!(q > 0.0 && q < 1.0))
    throw DomainError("normal quantile level must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

void validate_tau(double tau)
{
  if (!(tau > 0.0 && tau < 1.0))
    throw DomainError("quantile level tau must lie in (0, 1), got " +
                      std::to_string(tau));
}

void validate_bandwidth(double h)
{
  if (!(h > 0.0) || !std::isfinite(h))
    throw DomainError("bandwidth must be positive, got " + std::to_string(h));
}

double check_loss(double tau, double u)
{
  validate_tau(tau);
  return u * (tau - (u < 0.0 ? 1.0 : 0.0));
}

double kernel_density(KernelKind kind, double u)
{
  return detail::density(kind, u);
}

double kernel_cdf(KernelKind kind, double u)
{
  return detail::cdf(kind, u);
}

double smoothed_check_loss(KernelKind kind, double tau, double h, double u)
{
  validate_tau(tau);
  validate_bandwidth(h);
  return detail::smoothed_loss(kind, tau, h, u);
}

namespace {

void validate_half_order(int r)
{
  if (r < 1 || r > 3)
    throw DomainError("higher-order kernel half-order must be 1, 2 or 3, got " +
                      std::to_string(r));
}

} // namespace

double hk_density(int r, double u)
{
  validate_half_order(r);
  return detail::hk_density(r, u);
}

double hk_cdf(int r, double u)
{
  validate_half_order(r);
  return detail::hk_cdf(r, u);
}

} // namespace conquer
