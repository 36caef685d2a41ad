#include <doctest.h>

#include "conquer/csv.hpp"
#include "conquer/error.hpp"
#include "conquer/model.hpp"
#include "conquer/solver.hpp"

#include <random>
#include <sstream>

using namespace conquer;

namespace {

Dataset random_dataset(int n, int p, unsigned seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix C(n, p - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p - 1; ++j)
      C(i, j) = 3.0 * z(rng) + 2.0 * j - 1.0;
  Vector y(n);
  for (int i = 0; i < n; ++i)
    y(i) = z(rng) + C.row(i).sum();
  return Dataset::from_covariates(std::move(y), C);
}

} // namespace

TEST_CASE("dataset validation")
{
  Matrix X(3, 2);
  X << 1, 0.5, 1, 1.5, 1, 2.5;
  CHECK_NOTHROW(Dataset(Vector::Ones(3), X));
  CHECK_THROWS_AS(Dataset(Vector::Ones(2), X), DimensionError);
  Matrix bad = X;
  bad(1, 0) = 2.0;
  CHECK_THROWS_AS(Dataset(Vector::Ones(3), bad), DataError);
  bad = X;
  bad(2, 1) = NAN;
  CHECK_THROWS_AS(Dataset(Vector::Ones(3), bad), DataError);
  Vector y = Vector::Ones(3);
  y(0) = INFINITY;
  CHECK_THROWS_AS(Dataset(y, X), DataError);
  // n < p
  CHECK_THROWS_AS(Dataset(Vector::Ones(1), X.topRows(1)), DimensionError);
  CHECK_THROWS_AS(Dataset(Vector::Ones(3), Matrix(3, 0)), DimensionError);

  const Dataset d = Dataset::from_covariates(Vector::Ones(3), X.rightCols(1));
  CHECK(d.p() == 2);
  CHECK(d.X() == X);
}

TEST_CASE("standardize")
{
  Matrix C(3, 1);
  C << 1, 2, 3;
  const auto [s, t] = standardize(Dataset::from_covariates(Vector::Zero(3), C));
  CHECK(t.means(0) == doctest::Approx(2.0));
  CHECK(t.scales(0) == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s.X()(0, 1) == doctest::Approx(-std::sqrt(1.5)));
  CHECK(std::abs(s.X().col(1).mean()) < 1e-12);
  CHECK(s.X().col(1).squaredNorm() / 3.0 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s.X().col(0) == Vector::Ones(3));

  // already standardized: unchanged, identity transform
  const auto [s2, t2] = standardize(s);
  CHECK((s2.X() - s.X()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(t2.means(0)) < 1e-15);
  CHECK(t2.scales(0) == doctest::Approx(1.0).epsilon(1e-15));

  Matrix D(3, 2);
  D << 1, 5, 2, 5, 3, 5;
  try {
    standardize(Dataset::from_covariates(Vector::Zero(3), D));
    FAIL("expected a degenerate design error");
  } catch (const DegenerateDesignError& e) {
    CHECK(e.column() == 2);
  }

  const Dataset r = random_dataset(200, 6, 3);
  const auto [rs, rt] = standardize(r);
  for (int j = 1; j < 6; ++j) {
    CHECK(std::abs(rs.X().col(j).mean()) < 1e-12);
    const double var = (rs.X().col(j).array() - rs.X().col(j).mean()).square().mean();
    CHECK(std::abs(var - 1.0) < 1e-10);
  }
}

TEST_CASE("coefficient transforms")
{
  const Dataset d = random_dataset(100, 5, 11);
  const auto [s, t] = standardize(d);

  StandardizeTransform identity{ Vector::Zero(4), Vector::Ones(4) };
  Vector b(5);
  b << 0.3, -1, 2, 0.5, 4;
  CHECK(destandardize_coefficients(b, identity) == b);
  CHECK(destandardize_coefficients(Vector::Zero(5), t).isZero(0.0));

  // fitted values agree between scales
  const Vector fitted_std = s.X() * b;
  const Vector fitted_orig = d.X() * destandardize_coefficients(b, t);
  CHECK((fitted_std - fitted_orig).cwiseAbs().maxCoeff() < 1e-10);

  const Vector round = standardize_coefficients(destandardize_coefficients(b, t), t);
  CHECK((round - b).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(destandardize_coefficients(Vector::Zero(4), t), DimensionError);

  // the smoothed loss landscape is invariant under the transform
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  for (int k = 0; k < 20; ++k) {
    Vector bs(5);
    for (int j = 0; j < 5; ++j)
      bs(j) = z(rng);
    const double a = smoothed_loss(s, bs, 0.3, KernelKind::Logistic, 0.4);
    const double c =
      smoothed_loss(d, destandardize_coefficients(bs, t), 0.3, KernelKind::Logistic, 0.4);
    CHECK(std::abs(a - c) < 1e-10);
  }
}

TEST_CASE("residuals")
{
  const Dataset d = random_dataset(20, 3, 2);
  CHECK(residuals(d, Vector::Zero(3)) == d.y());

  Matrix X(2, 2);
  X << 1, 0, 1, 1;
  Vector y(2);
  y << 2, 5;
  const Dataset sq(y, X);
  Vector beta = X.fullPivLu().solve(y);
  CHECK(residuals(sq, beta).cwiseAbs().maxCoeff() < 1e-10);

  Matrix one = Matrix::Ones(2, 1);
  Vector y2(2);
  y2 << 3, 5;
  const Vector r = residuals(Dataset(y2, one), Vector::Constant(1, 4.0));
  CHECK(r(0) == -1.0);
  CHECK(r(1) == 1.0);

  CHECK_THROWS_AS(residuals(d, Vector::Zero(2)), DimensionError);
}

TEST_CASE("pairwise sum")
{
  std::vector<double> v(100001, 0.1);
  double naive = 0.0;
  for (double x : v)
    naive += x;
  const double exact = 10000.1;
  CHECK(std::abs(pairwise_sum(v) - exact) <= std::abs(naive - exact));
  CHECK(std::abs(pairwise_sum(v) - exact) < 1e-9);
  CHECK(pairwise_sum({}) == 0.0);
}

TEST_CASE("csv loader")
{
  std::istringstream in("a,y,b\n1,2,3\n4,5,6.5\n7,8,-9\n10,11,12\n");
  const LoadedData d = load_csv(in, "y");
  CHECK(d.names == std::vector<std::string>{ "(Intercept)", "a", "b" });
  CHECK(d.data.n() == 4);
  CHECK(d.data.p() == 3);
  CHECK(d.data.y()(1) == 5.0);
  CHECK(d.data.X()(1, 2) == 6.5);
  CHECK(d.data.X()(2, 0) == 1.0);

  std::istringstream bad("a,y\n1,2\n3,oops\n");
  try {
    load_csv(bad, "y");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == 2);
  }

  std::istringstream missing("a,b\n1,2\n3,4\n");
  CHECK_THROWS_AS(load_csv(missing, "y"), DataError);

  std::istringstream ragged("a,y\n1,2\n3\n");
  CHECK_THROWS_AS(load_csv(ragged, "y"), DataError);

  CHECK_THROWS_AS(load_csv_file("/nonexistent/file.csv", "y"), DataError);
}
