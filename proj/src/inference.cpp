#include "conquer/inference.hpp"

#include "conquer/error.hpp"
#include "conquer/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace conquer {

namespace {

constexpr std::uint64_t kBootstrapStream = 0xb0075742ULL;

void validate_alpha(double alpha)
{
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("alpha must lie in (0, 1)");
}

void require_draws(const BootstrapResult& res, int min_draws)
{
  if (res.usable() < std::max(min_draws, 1))
    throw UnreliableInferenceError(
      "only " + std::to_string(res.usable()) +
      " usable bootstrap draws; at least " + std::to_string(min_draws) +
      " are required");
}

// sorted copy of each coordinate's draws
std::vector<std::vector<double>> sorted_columns(const Matrix& draws)
{
  std::vector<std::vector<double>> cols(std::size_t(draws.cols()));
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    auto& c = cols[std::size_t(j)];
    c.assign(draws.col(j).data(), draws.col(j).data() + draws.rows());
    std::sort(c.begin(), c.end());
  }
  return cols;
}

} // namespace

std::string to_string(CiMethod method)
{
  switch (method) {
    case CiMethod::Percentile:
      return "percentile";
    case CiMethod::Pivotal:
      return "pivotal";
    case CiMethod::Normal:
      return "normal";
  }
  return "unknown";
}

std::vector<double> rademacher_weights(std::uint64_t seed, int b,
                                       Eigen::Index n)
{
  Rng rng(derive_seed(seed, std::uint64_t(b), kBootstrapStream));
  std::vector<double> w(static_cast<std::size_t>(n));
  std::uint64_t bits = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i % 64 == 0)
      bits = rng();
    w[std::size_t(i)] = (bits & 1U) ? 2.0 : 0.0;
    bits >>= 1;
  }
  return w;
}

BootstrapResult bootstrap_fit(const Dataset& data, const FitConfig& cfg, int B,
                              std::uint64_t seed,
                              const BootstrapOptions& options)
{
  if (B < 2)
    throw DomainError("bootstrap needs B >= 2 replicates");
  const PreparedProblem problem(data, cfg);

  BootstrapResult res;
  res.B = B;
  res.seed = seed;
  res.base_fit = problem.solve(problem.warm_start());
  res.base = res.base_fit.beta;

  Matrix all(B, data.p());
  std::vector<char> ok(static_cast<std::size_t>(B), 0);
  std::atomic<int> next{ 0 };
  auto worker = [&] {
    for (int b = next++; b < B; b = next++) {
      try {
        FitResult fit;
        if (options.unit_weights)
          fit = problem.solve(res.base);
        else {
          const auto w = rademacher_weights(seed, b, data.n());
          fit = problem.solve(res.base, w);
        }
        if (fit.converged && fit.beta.allFinite()) {
          all.row(b) = fit.beta.transpose();
          ok[std::size_t(b)] = 1;
        }
      } catch (const NumericalError&) {
        // counted as failed below
      }
    }
  };
  const int threads = std::clamp(options.threads, 1, B);
  if (threads == 1)
    worker();
  else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < threads; ++k)
      pool.emplace_back(worker);
  }

  const int usable = int(std::count(ok.begin(), ok.end(), 1));
  res.failed = B - usable;
  res.draws.resize(usable, data.p());
  for (int b = 0, k = 0; b < B; ++b)
    if (ok[std::size_t(b)])
      res.draws.row(k++) = all.row(b);
  return res;
}

double order_statistic_quantile(std::span<const double> sorted, double q)
{
  if (sorted.empty())
    throw UnreliableInferenceError("quantile of an empty sample");
  const double m = double(sorted.size());
  // guard against q * m landing a rounding error above an integer
  auto k = std::ptrdiff_t(std::ceil(q * m - 1e-9));
  k = std::clamp<std::ptrdiff_t>(k, 1, std::ptrdiff_t(sorted.size()));
  return sorted[std::size_t(k - 1)];
}

ConfidenceIntervals percentile_ci(const BootstrapResult& res, double alpha,
                                  int min_draws)
{
  validate_alpha(alpha);
  require_draws(res, min_draws);
  const auto cols = sorted_columns(res.draws);
  ConfidenceIntervals ci;
  ci.method = CiMethod::Percentile;
  ci.level = 1.0 - alpha;
  ci.estimate = res.base;
  ci.lower.resize(res.draws.cols());
  ci.upper.resize(res.draws.cols());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    ci.lower(Eigen::Index(j)) = order_statistic_quantile(cols[j], alpha / 2);
    ci.upper(Eigen::Index(j)) = order_statistic_quantile(cols[j], 1 - alpha / 2);
  }
  return ci;
}

ConfidenceIntervals pivotal_ci(const BootstrapResult& res, double alpha,
                               int min_draws)
{
  ConfidenceIntervals pct = percentile_ci(res, alpha, min_draws);
  ConfidenceIntervals ci;
  ci.method = CiMethod::Pivotal;
  ci.level = pct.level;
  ci.estimate = res.base;
  ci.lower = 2.0 * res.base - pct.upper;
  ci.upper = 2.0 * res.base - pct.lower;
  return ci;
}

ConfidenceIntervals mb_norm_ci(const BootstrapResult& res, double alpha,
                               int min_draws)
{
  validate_alpha(alpha);
  require_draws(res, std::max(min_draws, 2));
  const double z = normal_quantile(1.0 - alpha / 2);
  const Eigen::RowVectorXd mean = res.draws.colwise().mean();
  const Matrix centered = res.draws.rowwise() - mean;
  const Vector sd =
    (centered.colwise().squaredNorm() / double(res.draws.rows() - 1))
      .cwiseSqrt()
      .transpose();
  ConfidenceIntervals ci;
  ci.method = CiMethod::Normal;
  ci.level = 1.0 - alpha;
  ci.estimate = res.base;
  ci.lower = res.base - z * sd;
  ci.upper = res.base + z * sd;
  return ci;
}

SandwichEstimate sandwich_covariance(const Dataset& data, const Vector& beta,
                                     double tau, KernelKind kernel, double h,
                                     VarianceScaling scaling)
{
  SandwichEstimate est;
  est.D = smoothed_hessian(data, beta, tau, kernel, h);

  const Vector r = residuals(data, beta);
  Vector s2(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double s = detail::cdf(kernel, -r(i) / h) - tau;
    s2(i) = s * s;
  }
  double norm = double(data.n());
  if (scaling == VarianceScaling::Compat)
    norm *= h;
  est.V = data.X().transpose() * s2.asDiagonal() * data.X() / norm;
  est.V = 0.5 * (est.V + est.V.transpose()).eval();

  const Eigen::SelfAdjointEigenSolver<Matrix> eig(est.D, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    throw SingularHessianError(
      "Hessian at the estimate is numerically singular (condition estimate " +
      std::to_string(lo > 0.0 ? hi / lo : INFINITY) +
      "); try a larger bandwidth");

  const Eigen::LDLT<Matrix> ldlt(est.D);
  const Matrix DinvV = ldlt.solve(est.V);
  Matrix cov = ldlt.solve(DinvV.transpose()) / double(data.n());
  est.covariance = 0.5 * (cov + cov.transpose());
  est.std_errors = est.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  return est;
}

ConfidenceIntervals normal_ci(const Dataset& data, const Vector& beta,
                              double tau, KernelKind kernel, double h,
                              double alpha, VarianceScaling scaling)
{
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw DomainError("alpha must lie in (0, 1]");
  const SandwichEstimate est =
    sandwich_covariance(data, beta, tau, kernel, h, scaling);
  const double z = alpha == 1.0 ? 0.0 : normal_quantile(1.0 - alpha / 2);
  ConfidenceIntervals ci;
  ci.method = CiMethod::Normal;
  ci.level = 1.0 - alpha;
  ci.estimate = beta;
  ci.lower = beta - z * est.std_errors;
  ci.upper = beta + z * est.std_errors;
  return ci;
}

nlohmann::json to_json(const ConfidenceIntervals& ci,
                       const std::vector<std::string>& names)
{
  nlohmann::json coords = nlohmann::json::array();
  for (Eigen::Index j = 0; j < ci.lower.size(); ++j) {
    const std::string name = std::size_t(j) < names.size()
                               ? names[std::size_t(j)]
                               : "beta" + std::to_string(j);
    coords.push_back({ { "index", j },
                       { "name", name },
                       { "estimate", ci.estimate(j) },
                       { "lower", ci.lower(j) },
                       { "upper", ci.upper(j) } });
  }
  return { { "method", to_string(ci.method) },
           { "level", ci.level },
           { "coords", coords } };
}

} // namespace conquer
