#include <doctest.h>

#include "conquer/error.hpp"
#include "conquer/onestep.hpp"
#include "conquer/oracles.hpp"
#include "conquer/simulate.hpp"

#include <random>

using namespace conquer;

namespace {

Dataset make_data(int n, int p, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::student_t_distribution<double> t(3.0);
  Matrix C(n, p - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p - 1; ++j)
      C(i, j) = z(rng);
  Vector y(n);
  for (int i = 0; i < n; ++i)
    y(i) = 1.0 + C.row(i).sum() + t(rng);
  return Dataset::from_covariates(std::move(y), C);
}

FitResult pilot_at(Vector beta)
{
  FitResult f;
  f.beta = std::move(beta);
  f.converged = true;
  f.h_used = 0.5;
  return f;
}

} // namespace

TEST_CASE("refinement bandwidth")
{
  CHECK(default_refinement_bandwidth(2000, 100) == doctest::Approx(0.5223).epsilon(2e-4));
  CHECK(default_refinement_bandwidth(2000, 100, 6) ==
        doctest::Approx(std::pow((100 + std::log(2000.0)) / 2000.0, 2.0 / 13.0)));
  CHECK(default_refinement_bandwidth(8000, 100) < default_refinement_bandwidth(2000, 100));
  for (int n : { 100, 1000, 10000, 100000 })
    CHECK(default_refinement_bandwidth(n, 10) > default_bandwidth(n, 10));
  CHECK_THROWS_AS(default_refinement_bandwidth(10, 10), DomainError);
  CHECK_THROWS_AS(default_refinement_bandwidth(100, 10, 8), DomainError);
}

TEST_CASE("right-hand side sign identity")
{
  const Dataset d = make_data(60, 3, 1);
  const Vector beta = Vector::Constant(3, 0.7);
  const Vector r = residuals(d, beta);
  for (int half : { 2, 3 })
    for (double tau : { 0.2, 0.5, 0.85 }) {
      Vector alt = Vector::Zero(3);
      for (Eigen::Index i = 0; i < r.size(); ++i)
        alt += (tau - hk_cdf(half, -r(i) / 0.4)) * d.X().row(i).transpose();
      alt /= double(d.n());
      CHECK((higher_order_rhs(d, beta, tau, half, 0.4) - alt).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("Hessian is the Jacobian of the negated right-hand side")
{
  const Dataset d = make_data(40, 3, 2);
  const Vector beta = Vector::Constant(3, 0.9);
  for (int half : { 1, 2, 3 }) {
    const Matrix H = higher_order_hessian(d, beta, half, 0.6);
    const Matrix J = oracles::finite_diff_jacobian(
      [&](const Vector& b) { return higher_order_rhs(d, b, 0.4, half, 0.6); }, beta, 1e-6);
    CHECK((H + J).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(H == H.transpose());
  }
}

TEST_CASE("zero right-hand side gives a zero step")
{
  Vector y(6);
  y << -2, -1, -0.5, 0.5, 1, 2;
  const Dataset d(y, Matrix::Ones(6, 1));
  OneStepConfig cfg;
  cfg.refinement_bandwidth = 1.5;
  const auto res = one_step_from_pilot(d, pilot_at(Vector::Zero(1)), cfg);
  CHECK(res.rhs_norm < 1e-15);
  CHECK(std::abs(res.fit.beta(0)) < 1e-15);
  CHECK(res.path == SolvePath::Cholesky);
}

TEST_CASE("order two reduces to a Newton step on the conquer loss")
{
  const Dataset d = make_data(300, 4, 3);
  FitConfig pc;
  pc.tol = 1e-10;
  const FitResult pilot = fit_conquer(d, pc);
  REQUIRE(pilot.converged);
  OneStepConfig cfg;
  cfg.order = 2;
  cfg.refinement_bandwidth = pilot.h_used;
  const auto res = one_step_from_pilot(d, pilot, cfg);
  CHECK((res.fit.beta - pilot.beta).norm() < 1e-8);

  const Matrix H = higher_order_hessian(d, pilot.beta, 1, pilot.h_used);
  CHECK((H - smoothed_hessian(d, pilot.beta, 0.5, KernelKind::Gaussian, pilot.h_used))
          .cwiseAbs()
          .maxCoeff() < 1e-14);
}

TEST_CASE("one_step_fit contract")
{
  const Dataset d = make_data(2000, 6, 4);
  for (int order : { 4, 6 }) {
    OneStepConfig cfg;
    cfg.tau = 0.7;
    cfg.order = order;
    const auto res = one_step_fit(d, cfg);
    CHECK(res.system_residual <= 1e-8 * (1.0 + res.rhs_norm));
    CHECK(res.b_used == default_refinement_bandwidth(2000, 6, order));
    CHECK(res.pilot.converged);
    CHECK(res.fit.beta.allFinite());
    CHECK((res.fit.beta - res.pilot.beta).norm() < 0.5);
    CHECK(res.fit.iterations == res.pilot.iterations + 1);
  }

  OneStepConfig bad;
  bad.order = 5;
  CHECK_THROWS_AS(one_step_fit(d, bad), DomainError);
  bad = {};
  bad.refinement_bandwidth = 0.0;
  CHECK_THROWS_AS(one_step_fit(d, bad), DomainError);

  OneStepConfig capped;
  capped.max_iter = 1;
  capped.tol = 1e-14;
  CHECK_THROWS_AS(one_step_fit(d, capped), NumericalError);
}

TEST_CASE("indefinite higher-order Hessian is reported")
{
  // every scaled residual at +-2.5 where the order-4 kernel is negative
  Vector y(8);
  y << -2.5, 2.5, -2.5, 2.5, -2.5, 2.5, -2.5, 2.5;
  const Dataset d(y, Matrix::Ones(8, 1));
  OneStepConfig cfg;
  cfg.refinement_bandwidth = 1.0;
  CHECK(higher_order_hessian(d, Vector::Zero(1), 2, 1.0)(0, 0) < 0.0);
  Vector beta = Vector::Constant(1, 0.1);
  CHECK_THROWS_AS(one_step_from_pilot(d, pilot_at(beta), cfg), NonPositiveDefiniteError);
}

namespace {

struct BiasRun
{
  int closer = 0; // reps where the one-step intercept error is not larger
  double pilot_bias = 0.0;
  double one_step_bias = 0.0;
};

// upper quantile of heavy-tailed noise: the density is asymmetric around the
// quantile, so second-order smoothing biases the intercept
BiasRun intercept_bias(const std::string& noise, int reps)
{
  sim::ExperimentSpec spec;
  spec.n = 2000;
  spec.p = 5;
  spec.tau = 0.9;
  spec.noise = sim::parse_noise(noise);
  spec.seed = 77;
  BiasRun out;
  for (int rep = 0; rep < reps; ++rep) {
    const auto r = sim::make_replicate(spec, rep);
    OneStepConfig cfg;
    cfg.tau = spec.tau;
    const auto res = one_step_fit(r.data, cfg);
    const double ep = res.pilot.beta(0) - r.truth(0);
    const double eo = res.fit.beta(0) - r.truth(0);
    out.closer += std::abs(eo) <= std::abs(ep);
    out.pilot_bias += ep / reps;
    out.one_step_bias += eo / reps;
  }
  return out;
}

} // namespace

TEST_CASE("one-step shrinks the mean intercept bias")
{
  for (const std::string noise : { "t2", "t1.5" }) {
    const BiasRun run = intercept_bias(noise, 200);
    CAPTURE(noise);
    MESSAGE(noise << ": mean intercept bias pilot " << run.pilot_bias << ", one-step "
                  << run.one_step_bias);
    CHECK(run.pilot_bias > 0.0);
    CHECK(std::abs(run.one_step_bias) < std::abs(run.pilot_bias));
  }
}

// Per-replicate comparison: sampling noise in the intercept (sd ~0.07) swamps
// the smoothing bias (~0.01) at n = 2000, so this hovers near one half. Kept
// visible but not gating.
TEST_CASE("one-step intercept closer than pilot in most replicates" * doctest::may_fail())
{
  const BiasRun run = intercept_bias("t2", 100);
  MESSAGE("one-step intercept closer in " << run.closer << " of 100 reps");
  CHECK(run.closer >= 60);
}
