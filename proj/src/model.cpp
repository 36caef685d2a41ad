#include "conquer/model.hpp"

#include "conquer/error.hpp"

#include <cmath>

namespace conquer {

Dataset::Dataset(Vector y, Matrix X)
  : y_(std::move(y))
  , X_(std::move(X))
{
  if (X_.cols() < 1)
    throw DimensionError("design matrix needs at least the intercept column");
  if (y_.size() != X_.rows())
    throw DimensionError("response has " + std::to_string(y_.size()) +
                         " entries but design has " +
                         std::to_string(X_.rows()) + " rows");
  if (X_.rows() < X_.cols())
    throw DimensionError("need n >= p, got n = " + std::to_string(X_.rows()) +
                         ", p = " + std::to_string(X_.cols()));
  if (!y_.allFinite() || !X_.allFinite())
    throw DataError("dataset contains non-finite values");
  if ((X_.col(0).array() != 1.0).any())
    throw DataError("first design column must be the all-ones intercept");
}

Dataset Dataset::from_covariates(Vector y, const Matrix& covariates)
{
  Matrix X(covariates.rows(), covariates.cols() + 1);
  X.col(0).setOnes();
  X.rightCols(covariates.cols()) = covariates;
  return Dataset(std::move(y), std::move(X));
}

std::pair<Dataset, StandardizeTransform> standardize(const Dataset& data)
{
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.p() - 1;
  StandardizeTransform t{ Vector(q), Vector(q) };
  Matrix Z = data.X();
  for (Eigen::Index j = 0; j < q; ++j) {
    auto col = Z.col(j + 1);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / double(n);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || sd <= 1e-14 * (1.0 + std::abs(mean)))
      throw DegenerateDesignError(j + 1,
                                  "design column " + std::to_string(j + 1) +
                                    " has zero variance");
    t.means(j) = mean;
    t.scales(j) = sd;
    col = (col.array() - mean) / sd;
  }
  return { Dataset(data.y(), std::move(Z)), std::move(t) };
}

Vector destandardize_coefficients(const Vector& beta_std,
                                  const StandardizeTransform& t)
{
  if (beta_std.size() != t.means.size() + 1)
    throw DimensionError("coefficient vector does not match transform");
  Vector beta(beta_std.size());
  auto slopes = beta.tail(t.means.size());
  slopes = beta_std.tail(t.means.size()).cwiseQuotient(t.scales);
  beta(0) = beta_std(0) - slopes.dot(t.means);
  return beta;
}

Vector standardize_coefficients(const Vector& beta,
                                const StandardizeTransform& t)
{
  if (beta.size() != t.means.size() + 1)
    throw DimensionError("coefficient vector does not match transform");
  Vector beta_std(beta.size());
  beta_std.tail(t.means.size()) = beta.tail(t.means.size()).cwiseProduct(t.scales);
  beta_std(0) = beta(0) + beta.tail(t.means.size()).dot(t.means);
  return beta_std;
}

void check_coefficient_dimension(const Dataset& data, const Vector& beta)
{
  if (beta.size() != data.p())
    throw DimensionError("coefficient vector has length " +
                         std::to_string(beta.size()) + ", expected " +
                         std::to_string(data.p()));
}

Vector residuals(const Dataset& data, const Vector& beta)
{
  check_coefficient_dimension(data, beta);
  return data.y() - data.X() * beta;
}

double pairwise_sum(std::span<const double> values)
{
  constexpr std::size_t block = 64;
  if (values.size() <= block) {
    double s = 0.0;
    for (double v : values)
      s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} // namespace conquer
