#include "conquer/solver.hpp"

#include "conquer/error.hpp"
#include "conquer/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace conquer {

void FitConfig::validate() const
{
  validate_tau(tau);
  if (bandwidth)
    validate_bandwidth(*bandwidth);
  if (!(tol > 0.0))
    throw DomainError("gradient tolerance must be positive");
  if (max_iter < 1)
    throw DomainError("max_iter must be at least 1");
}

double FitConfig::resolve_bandwidth(Eigen::Index n, Eigen::Index p) const
{
  if (bandwidth)
    return *bandwidth;
  return default_bandwidth(n, p);
}

double default_bandwidth(Eigen::Index n, Eigen::Index p)
{
  if (p < 1 || n <= p)
    throw DomainError("default bandwidth needs n > p >= 1");
  return std::pow((double(p) + std::log(double(n))) / double(n), 0.4);
}

namespace {

// d_i = w_i (Kbar(-r_i / h) - tau); the gradient is X^T d / n.
void score_weights(std::span<const double> r, double tau, KernelKind kernel,
                   double h, std::span<const double> weights,
                   Eigen::Ref<Vector> d)
{
  const double inv_h = 1.0 / h;
  for (std::size_t i = 0; i < r.size(); ++i)
    d(Eigen::Index(i)) = detail::cdf(kernel, -r[i] * inv_h) - tau;
  if (!weights.empty())
    d.array() *= Eigen::Map<const Vector>(weights.data(), d.size()).array();
}

std::span<const double> as_span(const Vector& v)
{
  return { v.data(), std::size_t(v.size()) };
}

double weighted_mean_loss(const Vector& r, double tau, KernelKind kernel,
                          double h, std::span<const double> weights)
{
  std::vector<double> terms(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[std::size_t(i)];
    terms[std::size_t(i)] = w * detail::smoothed_loss(kernel, tau, h, r(i));
  }
  return pairwise_sum(terms) / double(r.size());
}

void check_weights(const Dataset& data, std::span<const double> weights)
{
  if (!weights.empty() && Eigen::Index(weights.size()) != data.n())
    throw DimensionError("weight vector length does not match sample size");
}

} // namespace

double weighted_smoothed_loss(const Dataset& data, const Vector& beta,
                              double tau, KernelKind kernel, double h,
                              std::span<const double> weights)
{
  validate_tau(tau);
  validate_bandwidth(h);
  check_weights(data, weights);
  return weighted_mean_loss(residuals(data, beta), tau, kernel, h, weights);
}

double smoothed_loss(const Dataset& data, const Vector& beta, double tau,
                     KernelKind kernel, double h)
{
  return weighted_smoothed_loss(data, beta, tau, kernel, h, {});
}

Vector smoothed_gradient(const Dataset& data, const Vector& beta, double tau,
                         KernelKind kernel, double h)
{
  validate_tau(tau);
  validate_bandwidth(h);
  const Vector r = residuals(data, beta);
  Vector d(data.n());
  score_weights(as_span(r), tau, kernel, h, {}, d);
  return data.X().transpose() * d / double(data.n());
}

Matrix smoothed_hessian(const Dataset& data, const Vector& beta, double tau,
                        KernelKind kernel, double h)
{
  validate_tau(tau);
  validate_bandwidth(h);
  const Vector r = residuals(data, beta);
  Vector k(data.n());
  for (Eigen::Index i = 0; i < r.size(); ++i)
    k(i) = detail::density(kernel, r(i) / h);
  Matrix H = data.X().transpose() * k.asDiagonal() * data.X();
  H /= double(data.n()) * h;
  // exact symmetry regardless of summation order
  return 0.5 * (H + H.transpose());
}

double median(std::span<const double> values)
{
  if (values.empty())
    throw DataError("median of an empty vector");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1)
    return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

double mad(std::span<const double> values)
{
  if (values.empty())
    throw DataError("MAD of an empty vector");
  const double m = median(values);
  std::vector<double> dev(values.size());
  std::transform(values.begin(), values.end(), dev.begin(),
                 [m](double v) { return std::abs(v - m); });
  return median(dev);
}

double huber_loss(double gamma, double u)
{
  const double a = std::abs(u);
  return a <= gamma ? 0.5 * u * u : gamma * (a - 0.5 * gamma);
}

namespace {

constexpr double kHuberConstant = 1.35;

// -(1/n) X^T psi_gamma(r)
Vector huber_gradient_from_residuals(const Matrix& X, const Vector& r,
                                     double gamma)
{
  const Vector psi = r.cwiseMax(-gamma).cwiseMin(gamma);
  return -(X.transpose() * psi) / double(X.rows());
}

// BB step from coefficient and gradient differences, with the unit
// fallback whenever either BB ratio is not strictly positive.
double bb_step(const Vector& dbeta, const Vector& dgrad, int& fallbacks)
{
  const double dd = dbeta.squaredNorm();
  const double dg = dbeta.dot(dgrad);
  const double gg = dgrad.squaredNorm();
  const double eta1 = dd / dg;
  const double eta2 = dg / gg;
  if (dg > 0.0 && eta1 > 0.0 && eta2 > 0.0 && std::isfinite(eta1) &&
      std::isfinite(eta2))
    return std::min({ eta1, eta2, 100.0 });
  ++fallbacks;
  return 1.0;
}

} // namespace

Vector huber_gradient(const Dataset& data, const Vector& beta, double gamma)
{
  return huber_gradient_from_residuals(data.X(), residuals(data, beta), gamma);
}

double huber_scale(std::span<const double> residuals, const Vector& y)
{
  const Vector abs_y = y.cwiseAbs();
  const double floor = 1e-8 * (1.0 + median(as_span(abs_y)));
  return std::max(kHuberConstant * mad(residuals), floor);
}

Vector huber_warm_start(const Dataset& data, double tol, int max_iter)
{
  if (!(tol > 0.0))
    throw DomainError("gradient tolerance must be positive");
  const Matrix& X = data.X();
  const Vector& y = data.y();
  auto scale = [&](const Vector& r) { return huber_scale(as_span(r), y); };

  Vector beta_prev = Vector::Zero(data.p());
  Vector r_prev = y;
  Vector grad = huber_gradient_from_residuals(X, r_prev, scale(r_prev));
  if (grad.norm() <= tol)
    return beta_prev;
  Vector beta = beta_prev - grad;
  int fallbacks = 0;
  for (int t = 1; t <= max_iter; ++t) {
    const Vector r = y - X * beta;
    const double gamma = scale(r);
    grad = huber_gradient_from_residuals(X, r, gamma);
    if (!grad.allFinite())
      throw NumericalDivergenceError(t, "Huber warm start diverged at iteration " +
                                          std::to_string(t));
    if (grad.norm() <= tol)
      break;
    // both gradients use the current gamma
    const Vector grad_prev = huber_gradient_from_residuals(X, r_prev, gamma);
    const double eta = bb_step(beta - beta_prev, grad - grad_prev, fallbacks);
    beta_prev = beta;
    r_prev = r;
    beta -= eta * grad;
  }
  return beta;
}

PreparedProblem::PreparedProblem(const Dataset& data, const FitConfig& cfg)
  : original_(data)
  , cfg_(cfg)
{
  cfg_.validate();
  h_ = cfg_.resolve_bandwidth(data.n(), data.p());
  cfg_.bandwidth = h_;
  if (cfg_.standardize && data.p() > 1) {
    auto [z, t] = standardize(data);
    standardized_.emplace(std::move(z));
    transform_ = std::move(t);
  }
}

Vector PreparedProblem::to_working(const Vector& beta) const
{
  check_coefficient_dimension(original_, beta);
  return transform_ ? standardize_coefficients(beta, *transform_) : beta;
}

Vector PreparedProblem::to_original(const Vector& beta_working) const
{
  return transform_ ? destandardize_coefficients(beta_working, *transform_)
                    : beta_working;
}

Vector PreparedProblem::gradient_to_original(const Vector& g) const
{
  if (!transform_)
    return g;
  Vector out(g.size());
  out(0) = g(0);
  const auto q = transform_->means.size();
  out.tail(q) = g.tail(q).cwiseProduct(transform_->scales) +
                g(0) * transform_->means;
  return out;
}

Vector PreparedProblem::warm_start() const
{
  if (original_.p() == 1 || transform_)
    return to_original(huber_warm_start(working(), cfg_.tol, cfg_.max_iter));
  // warm start always runs on standardized covariates
  auto [z, t] = standardize(original_);
  return destandardize_coefficients(huber_warm_start(z, cfg_.tol, cfg_.max_iter),
                                    t);
}

FitResult PreparedProblem::solve(const Vector& init,
                                 std::span<const double> weights) const
{
  check_weights(original_, weights);
  const Dataset& data = working();
  const Matrix& X = data.X();
  const Vector& y = data.y();
  const double n = double(data.n());
  const double tau = cfg_.tau;
  const KernelKind kernel = cfg_.kernel;

  Vector d(data.n());
  auto gradient_at = [&](const Vector& b, Vector& r) {
    r.noalias() = y - X * b;
    score_weights(as_span(r), tau, kernel, h_, weights, d);
    Vector g = X.transpose() * d;
    g /= n;
    return g;
  };
  // converged when the gradient is small on both the working and the
  // original covariate scale
  auto norm_of = [&](const Vector& g) {
    return std::max(g.norm(), gradient_to_original(g).norm());
  };
  auto diverged = [](int t) {
    return NumericalDivergenceError(
      t, "non-finite gradient in GD-BB at iteration " + std::to_string(t));
  };

  FitResult out;
  out.h_used = h_;
  Vector r(data.n());
  Vector beta_prev = to_working(init);
  Vector grad_prev = gradient_at(beta_prev, r);
  if (!grad_prev.allFinite())
    throw diverged(0);
  Vector beta = beta_prev;
  Vector grad = grad_prev;
  double gnorm = norm_of(grad);
  int t = 0;
  if (gnorm > cfg_.tol) {
    beta = beta_prev - grad_prev;
    t = 1;
    for (;;) {
      grad = gradient_at(beta, r);
      if (!grad.allFinite() || !beta.allFinite())
        throw diverged(t);
      gnorm = norm_of(grad);
      if (gnorm <= cfg_.tol || t >= cfg_.max_iter)
        break;
      const double eta =
        bb_step(beta - beta_prev, grad - grad_prev, out.bb_fallbacks);
      beta_prev = beta;
      grad_prev = grad;
      beta -= eta * grad;
      ++t;
    }
  } else {
    r = y - X * beta;
  }

  out.iterations = t;
  out.grad_norm = gradient_to_original(grad).norm();
  out.converged = gnorm <= cfg_.tol;
  out.loss = weighted_mean_loss(r, tau, kernel, h_, weights);
  if (!std::isfinite(out.loss))
    throw diverged(t);
  out.beta = to_original(beta);
  return out;
}

FitResult fit_conquer(const Dataset& data, const FitConfig& cfg,
                      const std::optional<Vector>& init)
{
  const PreparedProblem problem(data, cfg);
  if (init)
    return problem.solve(*init);
  return problem.solve(problem.warm_start());
}

namespace {

// derivative in u of u (tau - Phi(-u/h))
double horowitz_score(double tau, double h, double u)
{
  const double v = u / h;
  return tau - detail::Phi(-v) + v * detail::phi(v);
}

double horowitz_mean_loss(const Vector& r, double tau, double h)
{
  std::vector<double> terms(static_cast<std::size_t>(r.size()));
  for (Eigen::Index i = 0; i < r.size(); ++i)
    terms[std::size_t(i)] = r(i) * (tau - detail::Phi(-r(i) / h));
  return pairwise_sum(terms) / double(r.size());
}

Vector horowitz_gradient_from_residuals(const Matrix& X, const Vector& r,
                                        double tau, double h)
{
  Vector s(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i)
    s(i) = horowitz_score(tau, h, r(i));
  return -(X.transpose() * s) / double(X.rows());
}

} // namespace

double horowitz_loss(const Dataset& data, const Vector& beta, double tau,
                     double h)
{
  validate_tau(tau);
  validate_bandwidth(h);
  return horowitz_mean_loss(residuals(data, beta), tau, h);
}

Vector horowitz_gradient(const Dataset& data, const Vector& beta, double tau,
                         double h)
{
  validate_tau(tau);
  validate_bandwidth(h);
  return horowitz_gradient_from_residuals(data.X(), residuals(data, beta), tau,
                                          h);
}

FitResult fit_horowitz(const Dataset& data, const FitConfig& cfg,
                       std::uint64_t seed)
{
  if (cfg.kernel != KernelKind::Gaussian)
    throw DomainError("Horowitz smoothing is implemented for the Gaussian "
                      "kernel only");
  const PreparedProblem problem(data, cfg);
  const Dataset& work = problem.working();
  const Matrix& X = work.X();
  const Vector& y = work.y();
  const double tau = cfg.tau;
  const double h = problem.bandwidth();
  constexpr double alpha = 0.3;
  constexpr double shrink = 0.8;
  constexpr int max_backtracks = 200;

  Rng rng(seed);
  std::normal_distribution<double> normal;
  Vector beta(work.p());
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    beta(j) = normal(rng);

  FitResult out;
  out.h_used = h;
  out.nonconvex = true;
  Vector r = y - X * beta;
  double f = horowitz_mean_loss(r, tau, h);
  Vector grad;
  int t = 0;
  for (;; ++t) {
    grad = horowitz_gradient_from_residuals(X, r, tau, h);
    if (!grad.allFinite() || !std::isfinite(f))
      throw NumericalDivergenceError(
        t, "non-finite Horowitz objective at iteration " + std::to_string(t));
    const double gnorm =
      std::max(grad.norm(), problem.gradient_to_original(grad).norm());
    if (gnorm <= cfg.tol) {
      out.converged = true;
      break;
    }
    if (t >= cfg.max_iter)
      break;
    const double g2 = grad.squaredNorm();
    double step = 1.0;
    Vector trial = beta - step * grad;
    Vector r_trial = y - X * trial;
    double f_trial = horowitz_mean_loss(r_trial, tau, h);
    for (int k = 0; k < max_backtracks && !(f_trial <= f - alpha * step * g2);
         ++k) {
      step *= shrink;
      trial = beta - step * grad;
      r_trial = y - X * trial;
      f_trial = horowitz_mean_loss(r_trial, tau, h);
    }
    beta = std::move(trial);
    r = std::move(r_trial);
    f = f_trial;
  }
  out.iterations = t;
  out.grad_norm = problem.gradient_to_original(grad).norm();
  out.loss = f;
  out.beta = problem.to_original(beta);
  return out;
}

} // namespace conquer
