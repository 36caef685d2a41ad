#include "conquer/oracles.hpp"

#include "conquer/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

namespace conquer::oracles {

namespace {

long long binomial_capped(long long n, long long k, long long cap)
{
  k = std::min(k, n - k);
  long double c = 1;
  for (long long i = 1; i <= k; ++i) {
    c = c * (long double)(n - k + i) / (long double)i;
    if (c > (long double)cap)
      return cap + 1;
  }
  return (long long)std::llround(c);
}

bool lexicographically_less(const Vector& a, const Vector& b)
{
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size());
}

} // namespace

double check_objective(const Dataset& data, const Vector& beta, double tau)
{
  const Vector r = residuals(data, beta);
  std::vector<double> terms(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i)
    terms[std::size_t(i)] = check_loss(tau, r(i));
  return pairwise_sum(terms) / double(r.size());
}

Vector exact_qr_small(const Dataset& data, double tau,
                      const OracleBudget& budget)
{
  validate_tau(tau);
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  if (binomial_capped(n, p, budget.max_subsets) > budget.max_subsets)
    throw BudgetExceededError("C(" + std::to_string(n) + ", " +
                              std::to_string(p) +
                              ") interpolating subsets exceed the oracle budget");

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(p));
  for (Eigen::Index k = 0; k < p; ++k)
    idx[std::size_t(k)] = k;

  bool found = false;
  Vector best;
  double best_loss = INFINITY;
  Matrix A(p, p);
  Vector rhs(p);
  for (;;) {
    for (Eigen::Index k = 0; k < p; ++k) {
      A.row(k) = data.X().row(idx[std::size_t(k)]);
      rhs(k) = data.y()(idx[std::size_t(k)]);
    }
    const Eigen::FullPivLU<Matrix> lu(A);
    if (lu.isInvertible()) {
      const Vector beta = lu.solve(rhs);
      const double loss = check_objective(data, beta, tau);
      const double tie = 1e-12 * (1.0 + std::abs(best_loss));
      if (!found || loss < best_loss - tie ||
          (std::abs(loss - best_loss) <= tie &&
           lexicographically_less(beta, best))) {
        if (!found || loss < best_loss)
          best_loss = loss;
        best = beta;
        found = true;
      }
    }
    // next combination in lexicographic order
    Eigen::Index k = p - 1;
    while (k >= 0 && idx[std::size_t(k)] == n - p + k)
      --k;
    if (k < 0)
      break;
    ++idx[std::size_t(k)];
    for (Eigen::Index m = k + 1; m < p; ++m)
      idx[std::size_t(m)] = idx[std::size_t(m - 1)] + 1;
  }
  if (!found)
    throw NumericalError("every interpolating subset is singular");
  return best;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol)
{
  if (a == b)
    return 0.0;
  // the relative target is often below rounding on small pieces, so depth is
  // capped and the absolute tolerance decides
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
    f, a, b, 10, 1e-14, &error);
  if (!std::isfinite(value) || error > tol)
    throw NumericalError("quadrature did not reach tolerance " +
                         std::to_string(tol) + " (error estimate " +
                         std::to_string(error) + ")");
  return value;
}

double convolution_loss_quadrature(KernelKind kind, double tau, double h,
                                   double u, const OracleBudget& budget)
{
  validate_tau(tau);
  validate_bandwidth(h);
  // substitute v = u + h t: int rho_tau(u + h t) K(t) dt
  // Gaussian mass beyond 9 is ~2e-19; past ~38 the density underflows and
  // a relative tolerance can never be met
  const double reach = has_compact_support(kind)        ? 1.0
                       : kind == KernelKind::Gaussian ? 9.0
                                                      : 40.0;
  std::vector<double> cuts{ -reach, reach, -u / h };
  if (kind == KernelKind::Triangular || kind == KernelKind::Epanechnikov ||
      kind == KernelKind::Uniform)
    cuts.push_back(0.0);
  std::sort(cuts.begin(), cuts.end());
  auto integrand = [&](double t) {
    const double v = u + h * t;
    const double rho = v * (tau - (v < 0.0 ? 1.0 : 0.0));
    return rho * kernel_density(kind, t);
  };
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = std::max(cuts[k], -reach);
    const double b = std::min(cuts[k + 1], reach);
    if (b > a)
      total += integrate(integrand, a, b, budget.quadrature_tol);
  }
  return total;
}

Vector finite_diff_gradient(const ScalarField& f, const Vector& beta,
                            double eps)
{
  if (!(eps > 0.0))
    throw DomainError("finite-difference step must be positive");
  Vector g(beta.size());
  Vector x = beta;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    x(j) = beta(j) + eps;
    const double up = f(x);
    x(j) = beta(j) - eps;
    const double down = f(x);
    x(j) = beta(j);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericalError("non-finite evaluation in finite differences");
    g(j) = (up - down) / (2.0 * eps);
  }
  return g;
}

Matrix finite_diff_jacobian(const VectorField& f, const Vector& beta,
                            double eps)
{
  if (!(eps > 0.0))
    throw DomainError("finite-difference step must be positive");
  Matrix J;
  Vector x = beta;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    x(j) = beta(j) + eps;
    const Vector up = f(x);
    x(j) = beta(j) - eps;
    const Vector down = f(x);
    x(j) = beta(j);
    if (!up.allFinite() || !down.allFinite())
      throw NumericalError("non-finite evaluation in finite differences");
    if (J.size() == 0)
      J.resize(up.size(), beta.size());
    J.col(j) = (up - down) / (2.0 * eps);
  }
  return J;
}

} // namespace conquer::oracles
