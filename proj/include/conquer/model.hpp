#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace conquer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

//! Response vector plus design matrix whose column 0 is the intercept.
//!
//! Immutable after construction. The constructor enforces n >= p >= 1, a
//! leading column of ones and finite entries.
class Dataset
{
public:
  Dataset(Vector y, Matrix X);

  //! Prepends the intercept column to raw covariates.
  static Dataset from_covariates(Vector y, const Matrix& covariates);

  const Vector& y() const { return y_; }
  const Matrix& X() const { return X_; }
  Eigen::Index n() const { return X_.rows(); }
  Eigen::Index p() const { return X_.cols(); }

private:
  Vector y_;
  Matrix X_;
};

//! Per-column centering and scaling of the non-intercept columns.
struct StandardizeTransform
{
  Vector means;  // length p - 1
  Vector scales; // length p - 1, population standard deviations
};

std::pair<Dataset, StandardizeTransform> standardize(const Dataset& data);

//! Maps coefficients fitted on standardized covariates back to the original
//! covariate scale.
Vector destandardize_coefficients(const Vector& beta_std,
                                  const StandardizeTransform& t);

//! Inverse of destandardize_coefficients.
Vector standardize_coefficients(const Vector& beta,
                                const StandardizeTransform& t);

Vector residuals(const Dataset& data, const Vector& beta);

void check_coefficient_dimension(const Dataset& data, const Vector& beta);

//! Summation by recursive halving; error grows as O(log n) instead of O(n).
double pairwise_sum(std::span<const double> values);

} // namespace conquer
