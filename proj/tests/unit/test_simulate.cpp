#include <doctest.h>

#include "conquer/error.hpp"
#include "conquer/simulate.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <sstream>

using namespace conquer;
using namespace conquer::sim;

namespace {

double corr(const Vector& a, const Vector& b)
{
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

void strip_runtime(ExperimentReport& r)
{
  for (auto& rec : r.records)
    rec.runtime = 0.0;
  for (auto& s : r.summaries)
    s.mean_runtime = 0.0;
}

bool same_records(const ExperimentReport& a, const ExperimentReport& b)
{
  if (a.records.size() != b.records.size())
    return false;
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    const auto& x = a.records[k];
    const auto& y = b.records[k];
    if (x.rep != y.rep || x.method != y.method || x.ok != y.ok ||
        x.l2_error != y.l2_error || x.coverage != y.coverage || x.width != y.width)
      return false;
  }
  return true;
}

} // namespace

TEST_CASE("covariates")
{
  bool projected = true;
  const Matrix Z = generate_covariates(5000, 6, 42, &projected);
  CHECK_FALSE(projected);
  CHECK(Z.rows() == 5000);
  CHECK(Z.cols() == 5);
  CHECK(Z.cwiseAbs().maxCoeff() <= std::sqrt(3.0));
  for (Eigen::Index j = 0; j < 5; ++j) {
    const Vector c = Z.col(j);
    CHECK(std::abs(c.mean()) < 0.05);
    CHECK(std::abs((c.array() - c.mean()).square().mean() - 1.0) < 0.05);
  }
  for (Eigen::Index j = 0; j + 1 < 5; ++j)
    CHECK(std::abs(corr(Z.col(j), Z.col(j + 1)) - 0.70) < 0.03);
  for (Eigen::Index j = 0; j + 3 < 5; ++j)
    CHECK(std::abs(corr(Z.col(j), Z.col(j + 3)) - 0.343) < 0.04);

  CHECK(generate_covariates(50, 4, 1) == generate_covariates(50, 4, 1));
  CHECK(generate_covariates(50, 4, 1) != generate_covariates(50, 4, 2));
  CHECK_THROWS_AS(generate_covariates(50, 1, 1), DomainError);
}

TEST_CASE("noise quantiles")
{
  CHECK(noise_quantile(Noise::gaussian(2.0), 0.5) == 0.0);
  CHECK(noise_quantile(Noise::student_t(2.0), 0.5) == doctest::Approx(0.0));
  CHECK(noise_quantile(Noise::gaussian(2.0), 0.9) ==
        doctest::Approx(2.0 * 1.2815515655446004).epsilon(1e-13));
  // t_2 has the closed form quantile (2q - 1) sqrt(2 / (4 q (1 - q)))
  for (double q : { 0.05, 0.3, 0.9 }) {
    const double closed = (2 * q - 1) * std::sqrt(2.0 / (4 * q * (1 - q)));
    CHECK(noise_quantile(Noise::student_t(2.0), q) == doctest::Approx(closed).epsilon(1e-12));
  }
  const boost::math::students_t_distribution<double> t15(1.5);
  CHECK(boost::math::cdf(t15, noise_quantile(Noise::student_t(1.5), 0.05)) ==
        doctest::Approx(0.05).epsilon(1e-12));
  Noise silent = Noise::student_t(2.0);
  silent.scale = 0.0;
  CHECK(noise_quantile(silent, 0.9) == 0.0);
}

TEST_CASE("noise parsing")
{
  CHECK(parse_noise("gaussian").param == 2.0);
  CHECK(parse_noise("t2").family == Noise::Family::StudentT);
  CHECK(parse_noise("t1.5").param == 1.5);
  CHECK_THROWS_AS(parse_noise("cauchy"), DomainError);
  CHECK_THROWS_AS(parse_noise("t"), DomainError);
  CHECK_THROWS_AS(parse_noise("t-1"), DomainError);
  CHECK_THROWS_AS(parse_noise("t2x"), DomainError);
  for (Model m : { Model::Homogeneous, Model::LinearHet, Model::QuadraticHet })
    CHECK(parse_model(to_string(m)) == m);
  CHECK_THROWS_AS(parse_model("cubic_het"), DomainError);
}

TEST_CASE("scale factors")
{
  CHECK(scale_factor(Model::QuadraticHet, 1.0) == 0.5);
  CHECK(scale_factor(Model::Homogeneous, 0.3) == 1.0);
  CHECK(scale_factor(Model::LinearHet, 0.0) == 1.0);
  // positive on the covariate support
  for (double x : { -std::sqrt(3.0), 0.0, std::sqrt(3.0) })
    for (Model m : { Model::Homogeneous, Model::LinearHet, Model::QuadraticHet })
      CHECK(scale_factor(m, x) > 0.0);
}

TEST_CASE("true coefficients are the conditional quantile")
{
  const Matrix Z = generate_covariates(10000, 4, 9);
  for (Model m : { Model::Homogeneous, Model::LinearHet, Model::QuadraticHet })
    for (const char* noise : { "gaussian", "t2", "t1.5" })
      for (double tau : { 0.1, 0.5, 0.9 }) {
        const Vector y = generate_response(m, Z, tau, parse_noise(noise), 3);
        const Vector beta = true_coefficients(m, parse_noise(noise), tau, 4);
        const Vector fitted = beta(0) + (Z * beta.tail(3)).array();
        const double below = (y.array() <= fitted.array()).cast<double>().mean();
        CAPTURE(to_string(m));
        CAPTURE(std::string(noise));
        CAPTURE(tau);
        CHECK(std::abs(below - tau) < 0.02);
      }

  // symmetric noise at the median: no centering shift
  const Matrix Zs = generate_covariates(20, 3, 1);
  Noise quiet = Noise::gaussian(2.0);
  const Vector y = generate_response(Model::Homogeneous, Zs, 0.5, quiet, 5);
  quiet.scale = 0.0;
  const Vector exact = generate_response(Model::Homogeneous, Zs, 0.5, quiet, 5);
  CHECK((exact.array() - 1.0 - Zs.rowwise().sum().array()).abs().maxCoeff() < 1e-12);
  CHECK((y - exact).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("spec validation and JSON")
{
  ExperimentSpec s;
  s.methods = { "conquer" };
  CHECK_NOTHROW(s.validate());
  s.tau = 1.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = {};
  s.methods = { "mb-per" };
  CHECK_THROWS_AS(s.validate(), DomainError);
  s.kind = "coverage";
  CHECK_NOTHROW(s.validate());
  s.n = 10;
  s.p = 20;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = {};
  s.methods = {};
  CHECK_THROWS_AS(s.validate(), DomainError);

  const auto j = nlohmann::json::parse(R"({"kind":"coverage","model":"linear_het","noise":"t1.5",
    "n":200,"p":10,"tau":0.9,"reps":3,"B":50,"alpha":0.1,"seed":11,"h":0.4,
    "methods":["mb-per","normal"]})");
  const ExperimentSpec parsed = spec_from_json(j);
  CHECK(parsed.model == Model::LinearHet);
  CHECK(parsed.noise.param == 1.5);
  CHECK(parsed.B == 50);
  CHECK(*parsed.bandwidth == 0.4);
  const ExperimentSpec round = spec_from_json(to_json(parsed));
  CHECK(to_json(round) == to_json(parsed));

  auto bad = j;
  bad["h"] = "wide";
  CHECK_THROWS_AS(spec_from_json(bad), DomainError);
}

TEST_CASE("noiseless estimation recovers the coefficients")
{
  ExperimentSpec s;
  s.n = 200;
  s.p = 5;
  s.reps = 3;
  s.noise.scale = 0.0;
  s.methods = { "conquer", "horowitz", "onestep4", "onestep6" };
  const auto report = run_estimation_experiment(s);
  REQUIRE(report.records.size() == 12);
  for (const auto& r : report.records) {
    CAPTURE(r.method);
    CAPTURE(r.message);
    CHECK(r.ok);
    CHECK(r.l2_error <= 10 * 1e-4);
  }
}

TEST_CASE("estimation experiments are deterministic and thread independent")
{
  ExperimentSpec s;
  s.n = 200;
  s.p = 10;
  s.reps = 6;
  s.noise = Noise::student_t(2.0);
  s.methods = { "conquer", "onestep4" };
  auto a = run_estimation_experiment(s);
  s.threads = 3;
  auto b = run_estimation_experiment(s);
  CHECK(same_records(a, b));
  strip_runtime(a);
  strip_runtime(b);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(to_json(a, false).dump() == to_json(b, false).dump());

  const auto& summary = a.summary("conquer");
  CHECK(summary.successes == 6);
  CHECK(summary.failures == 0);
  CHECK(summary.mean_l2_error > 0.0);
  CHECK(summary.se_l2_error > 0.0);
  CHECK_THROWS_AS(a.summary("qr"), DomainError);

  std::ostringstream csv;
  write_csv(csv, a, false);
  std::istringstream lines(csv.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "rep,method,metric,value");
  int rows = 0;
  for (std::string line; std::getline(lines, line);)
    ++rows;
  CHECK(rows == 6 * 2 * 3);
}

TEST_CASE("conquer is competitive with the Horowitz fit")
{
  ExperimentSpec s;
  s.n = 400;
  s.p = 20;
  s.reps = 100;
  s.tau = 0.9;
  s.noise = Noise::student_t(2.0);
  s.methods = { "conquer", "horowitz" };
  s.seed = 5;
  const auto report = run_estimation_experiment(s);
  const auto& c = report.summary("conquer");
  const auto& h = report.summary("horowitz");
  MESSAGE("median l2 error: conquer " << c.median_l2_error << ", horowitz " << h.median_l2_error);
  CHECK(c.failures == 0);
  CHECK(c.median_l2_error <= 1.05 * h.median_l2_error);
}

TEST_CASE("coverage experiments")
{
  ExperimentSpec s;
  s.kind = "coverage";
  s.n = 200;
  s.p = 5;
  s.reps = 4;
  s.B = 40;
  s.methods = { "mb-per", "mb-piv", "mb-norm", "normal" };

  SUBCASE("near-zero level intervals")
  {
    s.alpha = 0.9999;
    const auto report = run_coverage_experiment(s);
    for (const auto& sum : report.summaries) {
      CAPTURE(sum.method);
      CHECK(sum.failures == 0);
      CHECK(sum.mean_coverage <= 0.1);
      CHECK(sum.mean_width < 0.05);
    }
  }

  SUBCASE("percentile and pivotal widths agree per rep")
  {
    auto report = run_coverage_experiment(s);
    for (int rep = 0; rep < s.reps; ++rep) {
      const auto& per = report.records[std::size_t(rep * 4)];
      const auto& piv = report.records[std::size_t(rep * 4 + 1)];
      REQUIRE(per.method == "mb-per");
      REQUIRE(piv.method == "mb-piv");
      CHECK(per.width == doctest::Approx(piv.width).epsilon(1e-12));
    }
    for (const auto& r : report.records) {
      CHECK(r.coverage >= 0.0);
      CHECK(r.coverage <= 1.0);
      CHECK(r.width >= 0.0);
    }
    s.threads = 2;
    auto again = run_coverage_experiment(s);
    CHECK(same_records(report, again));
  }

  SUBCASE("too few draws become failure records")
  {
    s.B = 10;
    s.methods = { "mb-per", "normal" };
    const auto report = run_coverage_experiment(s);
    CHECK(report.summary("mb-per").failures == s.reps);
    CHECK(report.summary("normal").failures == 0);
    CHECK_FALSE(report.records.front().message.empty());
  }
}
