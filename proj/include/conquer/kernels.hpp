#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

namespace conquer {

//! Second-order smoothing kernels with closed-form convolution losses.
enum class KernelKind
{
  Uniform,
  Gaussian,
  Logistic,
  Epanechnikov,
  Triangular
};

inline constexpr KernelKind kAllKernels[] = { KernelKind::Uniform,
                                              KernelKind::Gaussian,
                                              KernelKind::Logistic,
                                              KernelKind::Epanechnikov,
                                              KernelKind::Triangular };

//! Gaussian-based kernel of order 2r: G(u) = p_r(u) phi(u).
struct HigherOrderKernel
{
  int half_order = 2;
  int order() const { return 2 * half_order; }
};

// names are lowercase: "uniform", "gaussian", ..., "gaussian4", "gaussian6"
KernelKind parse_kernel(std::string_view name);
std::string to_string(KernelKind kind);
HigherOrderKernel parse_higher_order_kernel(std::string_view name);
std::string to_string(HigherOrderKernel kernel);

bool has_compact_support(KernelKind kind);

double normal_pdf(double u);
double normal_cdf(double u);
double normal_quantile(double q);

//! rho_tau(u) = u (tau - 1{u < 0}).
double check_loss(double tau, double u);

double kernel_density(KernelKind kind, double u);

//! Antiderivative of the density; exactly 0 / 1 outside compact supports.
double kernel_cdf(KernelKind kind, double u);

//! Convolution of the check loss with K_h, evaluated in closed form.
double smoothed_check_loss(KernelKind kind, double tau, double h, double u);

//! G_{2r}(u), r in {1, 2, 3}.
double hk_density(int r, double u);

//! Integral of G_{2r} up to u. Not clamped: order >= 4 kernels take negative
//! values, so this can leave [0, 1].
double hk_cdf(int r, double u);

void validate_tau(double tau);
void validate_bandwidth(double h);

namespace detail {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

inline double phi(double u)
{
  return kInvSqrt2Pi * std::exp(-0.5 * u * u);
}

inline double Phi(double u)
{
  return 0.5 * std::erfc(-u * std::numbers::sqrt2 / 2.0);
}

inline double density(KernelKind kind, double u)
{
  switch (kind) {
    case KernelKind::Uniform:
      return std::abs(u) <= 1.0 ? 0.5 : 0.0;
    case KernelKind::Gaussian:
      return phi(u);
    case KernelKind::Logistic: {
      const double e = std::exp(-std::abs(u));
      return e / ((1.0 + e) * (1.0 + e));
    }
    case KernelKind::Epanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelKind::Triangular:
      return std::abs(u) <= 1.0 ? 1.0 - std::abs(u) : 0.0;
  }
  return 0.0;
}

inline double cdf(KernelKind kind, double u)
{
  switch (kind) {
    case KernelKind::Uniform:
      if (u <= -1.0)
        return 0.0;
      if (u >= 1.0)
        return 1.0;
      return 0.5 * (u + 1.0);
    case KernelKind::Gaussian:
      return Phi(u);
    case KernelKind::Logistic:
      if (u >= 0.0)
        return 1.0 / (1.0 + std::exp(-u));
      else {
        const double e = std::exp(u);
        return e / (1.0 + e);
      }
    case KernelKind::Epanechnikov:
      if (u <= -1.0)
        return 0.0;
      if (u >= 1.0)
        return 1.0;
      return 0.5 + 0.75 * u - 0.25 * u * u * u;
    case KernelKind::Triangular:
      if (u <= -1.0)
        return 0.0;
      if (u >= 1.0)
        return 1.0;
      if (u <= 0.0)
        return 0.5 * (1.0 + u) * (1.0 + u);
      return 1.0 - 0.5 * (1.0 - u) * (1.0 - u);
  }
  return 0.0;
}

// l^K(v): the unit-bandwidth symmetric part, so that
// l_h(u) = (h/2) l^K(u/h) + (tau - 1/2) u.
inline double unit_smoothed_abs(KernelKind kind, double v)
{
  const double a = std::abs(v);
  switch (kind) {
    case KernelKind::Uniform:
      return a <= 1.0 ? 0.5 * v * v + 0.5 : a;
    case KernelKind::Gaussian:
      return std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * v * v) +
             v * (1.0 - 2.0 * Phi(-v));
    case KernelKind::Logistic:
      // v + 2 log(1 + e^{-v}) rewritten in terms of |v|
      return a + 2.0 * std::log1p(std::exp(-a));
    case KernelKind::Epanechnikov:
      if (a <= 1.0) {
        const double v2 = v * v;
        return 0.75 * v2 - 0.125 * v2 * v2 + 0.375;
      }
      return a;
    case KernelKind::Triangular:
      return a <= 1.0 ? v * v - a * a * a / 3.0 + 1.0 / 3.0 : a;
  }
  return a;
}

inline double smoothed_loss(KernelKind kind, double tau, double h, double u)
{
  return 0.5 * h * unit_smoothed_abs(kind, u / h) + (tau - 0.5) * u;
}

// derivative of l_h with respect to u
inline double smoothed_score(KernelKind kind, double tau, double h, double u)
{
  return tau - cdf(kind, -u / h);
}

inline double hk_poly(int r, double u)
{
  switch (r) {
    case 1:
      return 1.0;
    case 2:
      return 0.5 * (3.0 - u * u);
    default: {
      const double u2 = u * u;
      return (u2 * u2 - 10.0 * u2 + 15.0) / 8.0;
    }
  }
}

inline double hk_cdf_poly(int r, double u)
{
  switch (r) {
    case 1:
      return 0.0;
    case 2:
      return 0.5 * u;
    default:
      return (7.0 * u - u * u * u) / 8.0;
  }
}

inline double hk_density(int r, double u)
{
  return hk_poly(r, u) * phi(u);
}

inline double hk_cdf(int r, double u)
{
  return Phi(u) + hk_cdf_poly(r, u) * phi(u);
}

} // namespace detail

} // namespace conquer
