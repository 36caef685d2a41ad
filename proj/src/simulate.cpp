#include "conquer/simulate.hpp"

#include "conquer/error.hpp"
#include "conquer/onestep.hpp"
#include "conquer/random.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

namespace conquer::sim {

namespace {

constexpr std::uint64_t kCovariateStream = 0xc0;
constexpr std::uint64_t kNoiseStream = 0x9e;
constexpr std::uint64_t kHorowitzStream = 0x40;
constexpr std::uint64_t kBootstrapStream = 0xb5;

constexpr double kCovariateCorrelation = 0.7;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename F>
void parallel_for(int count, int threads, F&& body)
{
  std::atomic<int> next{ 0 };
  auto worker = [&] {
    for (int k = next++; k < count; k = next++)
      body(k);
  };
  threads = std::clamp(threads, 1, std::max(count, 1));
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back(worker);
}

} // namespace

Model parse_model(const std::string& name)
{
  if (name == "homogeneous")
    return Model::Homogeneous;
  if (name == "linear_het")
    return Model::LinearHet;
  if (name == "quadratic_het")
    return Model::QuadraticHet;
  throw DomainError("unknown model '" + name + "'");
}

std::string to_string(Model model)
{
  switch (model) {
    case Model::Homogeneous:
      return "homogeneous";
    case Model::LinearHet:
      return "linear_het";
    case Model::QuadraticHet:
      return "quadratic_het";
  }
  return "unknown";
}

Noise parse_noise(const std::string& name)
{
  if (name == "gaussian")
    return Noise::gaussian(2.0);
  if (name.size() > 1 && name[0] == 't') {
    double df = 0.0;
    try {
      std::size_t used = 0;
      df = std::stod(name.substr(1), &used);
      if (used != name.size() - 1)
        df = 0.0;
    } catch (const std::exception&) {
      df = 0.0;
    }
    if (df > 0.0)
      return Noise::student_t(df);
  }
  throw DomainError("unsupported noise family '" + name + "'");
}

std::string to_string(const Noise& noise)
{
  if (noise.family == Noise::Family::Gaussian)
    return noise.param == 2.0 ? "gaussian"
                              : "gaussian(sd=" + std::to_string(noise.param) + ")";
  std::ostringstream out;
  out << 't' << noise.param;
  return out.str();
}

double noise_quantile(const Noise& noise, double tau)
{
  validate_tau(tau);
  if (noise.scale == 0.0)
    return 0.0;
  switch (noise.family) {
    case Noise::Family::Gaussian:
      return noise.scale * noise.param * normal_quantile(tau);
    case Noise::Family::StudentT: {
      const boost::math::students_t_distribution<double> dist(noise.param);
      return noise.scale * boost::math::quantile(dist, tau);
    }
  }
  throw DomainError("unsupported noise family");
}

double scale_factor(Model model, double x_last)
{
  switch (model) {
    case Model::Homogeneous:
      return 1.0;
    case Model::LinearHet:
      return 0.5 * x_last + 1.0;
    case Model::QuadraticHet:
      return 0.5 * (1.0 + (x_last - 1.0) * (x_last - 1.0));
  }
  return 1.0;
}

Matrix generate_covariates(Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                           bool* projected)
{
  if (p < 2 || n < 1)
    throw DomainError("covariate generation needs p >= 2 and n >= 1");
  const Eigen::Index q = p - 1;
  // Pearson correlation rho of the uniforms needs 2 sin(pi rho / 6) on the
  // Gaussian scale
  Matrix R(q, q);
  for (Eigen::Index j = 0; j < q; ++j)
    for (Eigen::Index k = 0; k < q; ++k)
      R(j, k) = 2.0 * std::sin(std::numbers::pi *
                               std::pow(kCovariateCorrelation, double(std::abs(j - k))) /
                               6.0);
  Eigen::LLT<Matrix> llt(R);
  bool fixed = false;
  if (llt.info() != Eigen::Success) {
    // nearest positive definite correlation by eigenvalue clipping
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(R);
    const Vector lambda = eig.eigenvalues().cwiseMax(1e-10);
    Matrix C = eig.eigenvectors() * lambda.asDiagonal() *
               eig.eigenvectors().transpose();
    const Vector d = C.diagonal().cwiseSqrt().cwiseInverse();
    C = d.asDiagonal() * C * d.asDiagonal();
    llt.compute(C);
    fixed = true;
  }
  if (projected)
    *projected = fixed;
  const Matrix L = llt.matrixL();

  Rng rng(derive_seed(seed, 0, kCovariateStream));
  std::normal_distribution<double> normal;
  Matrix G(n, q);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < q; ++j)
      G(i, j) = normal(rng);
  Matrix Z = G * L.transpose();
  const double half_width = std::sqrt(3.0);
  return Z.unaryExpr([half_width](double z) {
    return half_width * (2.0 * detail::Phi(z) - 1.0);
  });
}

Vector generate_response(Model model, const Matrix& covariates, double tau,
                         const Noise& noise, std::uint64_t seed)
{
  validate_tau(tau);
  if (covariates.cols() < 1)
    throw DimensionError("response generation needs at least one covariate");
  if (!(noise.param > 0.0))
    throw DomainError("noise parameter must be positive");
  const Eigen::Index n = covariates.rows();
  const double shift = noise_quantile(noise, tau);

  Rng rng(derive_seed(seed, 0, kNoiseStream));
  Vector eps(n);
  if (noise.family == Noise::Family::Gaussian) {
    std::normal_distribution<double> dist(0.0, noise.param);
    for (Eigen::Index i = 0; i < n; ++i)
      eps(i) = noise.scale * dist(rng);
  } else {
    std::student_t_distribution<double> dist(noise.param);
    for (Eigen::Index i = 0; i < n; ++i)
      eps(i) = noise.scale * dist(rng);
  }

  Vector y(n);
  const Eigen::Index last = covariates.cols() - 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double location = 1.0 + covariates.row(i).sum();
    y(i) = location + scale_factor(model, covariates(i, last)) * (eps(i) - shift);
  }
  return y;
}

Vector true_coefficients(Model model, const Noise& noise, double tau,
                         Eigen::Index p)
{
  (void)model;
  (void)noise;
  validate_tau(tau);
  // The noise is centered at its own tau-quantile and every scale factor is
  // positive on the covariate support, so the conditional tau-quantile of the
  // error term is zero for all three models.
  return Vector::Ones(p);
}

void ExperimentSpec::validate() const
{
  if (kind != "estimation" && kind != "coverage")
    throw DomainError("experiment kind must be 'estimation' or 'coverage'");
  validate_tau(tau);
  if (p < 2 || n <= p)
    throw DomainError("experiment needs n > p >= 2");
  if (reps < 1)
    throw DomainError("reps must be positive");
  if (kind == "coverage" && B < 2)
    throw DomainError("coverage experiments need B >= 2");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw DomainError("alpha must lie in (0, 1)");
  if (bandwidth)
    validate_bandwidth(*bandwidth);
  if (methods.empty())
    throw DomainError("experiment lists no methods");
  for (const auto& m : methods) {
    const bool est = m == "conquer" || m == "horowitz" || m == "onestep4" ||
                     m == "onestep6";
    const bool cov =
      m == "mb-per" || m == "mb-piv" || m == "mb-norm" || m == "normal";
    if ((kind == "estimation" && !est) || (kind == "coverage" && !cov))
      throw DomainError("method '" + m + "' is not available for " + kind +
                        " experiments");
  }
}

ExperimentSpec spec_from_json(const nlohmann::json& j)
{
  ExperimentSpec s;
  s.kind = j.value("kind", s.kind);
  s.model = parse_model(j.value("model", std::string("homogeneous")));
  s.noise = parse_noise(j.value("noise", std::string("gaussian")));
  s.noise.scale = j.value("noise_scale", 1.0);
  s.n = j.at("n").get<Eigen::Index>();
  s.p = j.at("p").get<Eigen::Index>();
  s.tau = j.value("tau", s.tau);
  s.reps = j.value("reps", s.reps);
  s.B = j.value("B", s.B);
  s.alpha = j.value("alpha", s.alpha);
  s.seed = j.value("seed", s.seed);
  s.kernel = parse_kernel(j.value("kernel", std::string("gaussian")));
  if (j.contains("h") && j.at("h").is_number())
    s.bandwidth = j.at("h").get<double>();
  else if (j.contains("h") && j.at("h") != "auto")
    throw DomainError("h must be a number or \"auto\"");
  if (j.contains("methods"))
    s.methods = j.at("methods").get<std::vector<std::string>>();
  else if (s.kind == "coverage")
    s.methods = { "mb-per", "mb-piv", "mb-norm" };
  else
    s.methods = { "conquer" };
  s.threads = j.value("threads", s.threads);
  s.validate();
  return s;
}

nlohmann::json to_json(const ExperimentSpec& s)
{
  nlohmann::json j{ { "kind", s.kind },
                    { "model", to_string(s.model) },
                    { "noise", to_string(s.noise) },
                    { "noise_scale", s.noise.scale },
                    { "n", s.n },
                    { "p", s.p },
                    { "tau", s.tau },
                    { "reps", s.reps },
                    { "B", s.B },
                    { "alpha", s.alpha },
                    { "seed", s.seed },
                    { "kernel", to_string(s.kernel) },
                    { "methods", s.methods } };
  if (s.bandwidth)
    j["h"] = *s.bandwidth;
  else
    j["h"] = default_bandwidth(s.n, s.p);
  return j;
}

const MethodSummary& ExperimentReport::summary(const std::string& method) const
{
  for (const auto& s : summaries)
    if (s.method == method)
      return s;
  throw DomainError("report has no method '" + method + "'");
}

Replicate make_replicate(const ExperimentSpec& spec, int rep)
{
  const Matrix Z =
    generate_covariates(spec.n, spec.p, derive_seed(spec.seed, std::uint64_t(rep), kCovariateStream));
  Vector y = generate_response(spec.model, Z, spec.tau, spec.noise,
                               derive_seed(spec.seed, std::uint64_t(rep), kNoiseStream));
  return { Dataset::from_covariates(std::move(y), Z),
           true_coefficients(spec.model, spec.noise, spec.tau, spec.p) };
}

namespace {

FitConfig fit_config(const ExperimentSpec& spec)
{
  FitConfig cfg;
  cfg.tau = spec.tau;
  cfg.kernel = spec.kernel;
  cfg.bandwidth = spec.bandwidth;
  return cfg;
}

std::vector<MethodSummary> summarize(const ExperimentSpec& spec,
                                     const std::vector<RepRecord>& records)
{
  std::vector<MethodSummary> out;
  for (const auto& method : spec.methods) {
    MethodSummary s;
    s.method = method;
    std::vector<double> errors;
    double cov = 0.0, width = 0.0, runtime = 0.0;
    for (const auto& r : records) {
      if (r.method != method)
        continue;
      if (!r.ok) {
        ++s.failures;
        continue;
      }
      ++s.successes;
      errors.push_back(r.l2_error);
      cov += r.coverage;
      width += r.width;
      runtime += r.runtime;
    }
    if (s.successes > 0) {
      const double m = double(s.successes);
      double mean = 0.0;
      for (double e : errors)
        mean += e;
      mean /= m;
      double var = 0.0;
      for (double e : errors)
        var += (e - mean) * (e - mean);
      s.mean_l2_error = mean;
      s.se_l2_error = errors.size() > 1 ? std::sqrt(var / (m - 1.0) / m) : 0.0;
      s.median_l2_error = median(errors);
      s.mean_coverage = cov / m;
      s.mean_width = width / m;
      s.mean_runtime = runtime / m;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RepRecord> flatten(std::vector<std::vector<RepRecord>>& per_rep)
{
  std::vector<RepRecord> out;
  for (auto& rep : per_rep)
    for (auto& r : rep)
      out.push_back(std::move(r));
  return out;
}

} // namespace

ExperimentReport run_estimation_experiment(const ExperimentSpec& spec)
{
  spec.validate();
  if (spec.kind != "estimation")
    throw DomainError("not an estimation experiment");
  const FitConfig cfg = fit_config(spec);
  std::vector<std::vector<RepRecord>> per_rep(std::size_t(spec.reps));

  parallel_for(spec.reps, spec.threads, [&](int rep) {
    const Replicate data = make_replicate(spec, rep);
    for (const auto& method : spec.methods) {
      RepRecord rec;
      rec.rep = rep;
      rec.method = method;
      const auto start = Clock::now();
      try {
        FitResult fit;
        if (method == "conquer")
          fit = fit_conquer(data.data, cfg);
        else if (method == "horowitz") {
          FitConfig hcfg = cfg;
          hcfg.kernel = KernelKind::Gaussian;
          fit = fit_horowitz(data.data, hcfg,
                             derive_seed(spec.seed, std::uint64_t(rep), kHorowitzStream));
        } else {
          OneStepConfig os;
          os.tau = spec.tau;
          os.pilot_kernel = spec.kernel;
          os.pilot_bandwidth = spec.bandwidth;
          os.order = method == "onestep6" ? 6 : 4;
          fit = one_step_fit(data.data, os).fit;
        }
        rec.runtime = seconds_since(start);
        rec.converged = fit.converged;
        rec.l2_error = (fit.beta - data.truth).norm();
      } catch (const std::exception& e) {
        rec.runtime = seconds_since(start);
        rec.ok = false;
        rec.converged = false;
        rec.message = e.what();
      }
      per_rep[std::size_t(rep)].push_back(std::move(rec));
    }
  });

  ExperimentReport report;
  report.spec = spec;
  report.records = flatten(per_rep);
  report.summaries = summarize(spec, report.records);
  return report;
}

ExperimentReport run_coverage_experiment(const ExperimentSpec& spec)
{
  spec.validate();
  if (spec.kind != "coverage")
    throw DomainError("not a coverage experiment");
  const FitConfig cfg = fit_config(spec);
  std::vector<std::vector<RepRecord>> per_rep(std::size_t(spec.reps));

  parallel_for(spec.reps, spec.threads, [&](int rep) {
    const Replicate data = make_replicate(spec, rep);
    const bool needs_bootstrap =
      std::any_of(spec.methods.begin(), spec.methods.end(),
                  [](const std::string& m) { return m != "normal"; });

    std::optional<BootstrapResult> boot;
    std::string boot_error;
    double boot_time = 0.0;
    if (needs_bootstrap) {
      const auto start = Clock::now();
      try {
        boot = bootstrap_fit(data.data, cfg, spec.B,
                             derive_seed(spec.seed, std::uint64_t(rep), kBootstrapStream));
      } catch (const std::exception& e) {
        boot_error = e.what();
      }
      boot_time = seconds_since(start);
    }

    for (const auto& method : spec.methods) {
      RepRecord rec;
      rec.rep = rep;
      rec.method = method;
      const auto start = Clock::now();
      try {
        ConfidenceIntervals ci;
        Vector estimate;
        if (method == "normal") {
          const FitResult fit = boot ? boot->base_fit : fit_conquer(data.data, cfg);
          rec.converged = fit.converged;
          estimate = fit.beta;
          ci = normal_ci(data.data, fit.beta, spec.tau, spec.kernel, fit.h_used,
                         spec.alpha);
        } else {
          if (!boot)
            throw NumericalError("bootstrap failed: " + boot_error);
          if (boot->unreliable())
            throw UnreliableInferenceError(
              std::to_string(boot->failed) + " of " + std::to_string(boot->B) +
              " bootstrap replicates failed");
          rec.converged = boot->base_fit.converged;
          estimate = boot->base;
          if (method == "mb-per")
            ci = percentile_ci(*boot, spec.alpha);
          else if (method == "mb-piv")
            ci = pivotal_ci(*boot, spec.alpha);
          else
            ci = mb_norm_ci(*boot, spec.alpha);
        }
        rec.runtime = seconds_since(start) + (method == "normal" ? 0.0 : boot_time);
        rec.l2_error = (estimate - data.truth).norm();
        const Eigen::Index q = spec.p - 1;
        int covered = 0;
        double width = 0.0;
        for (Eigen::Index j = 1; j <= q; ++j) {
          covered += ci.lower(j) <= data.truth(j) && data.truth(j) <= ci.upper(j);
          width += ci.upper(j) - ci.lower(j);
        }
        rec.coverage = double(covered) / double(q);
        rec.width = width / double(q);
      } catch (const std::exception& e) {
        rec.runtime = seconds_since(start);
        rec.ok = false;
        rec.converged = false;
        rec.message = e.what();
      }
      per_rep[std::size_t(rep)].push_back(std::move(rec));
    }
  });

  ExperimentReport report;
  report.spec = spec;
  report.records = flatten(per_rep);
  report.summaries = summarize(spec, report.records);
  return report;
}

ExperimentReport run_experiment(const ExperimentSpec& spec)
{
  return spec.kind == "coverage" ? run_coverage_experiment(spec)
                                 : run_estimation_experiment(spec);
}

nlohmann::json to_json(const ExperimentReport& report, bool include_timing)
{
  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& s : report.summaries) {
    nlohmann::json j{ { "method", s.method },
                      { "successes", s.successes },
                      { "failures", s.failures },
                      { "mean_l2_error", s.mean_l2_error },
                      { "se_l2_error", s.se_l2_error },
                      { "median_l2_error", s.median_l2_error } };
    if (report.spec.kind == "coverage") {
      j["mean_coverage"] = s.mean_coverage;
      j["mean_width"] = s.mean_width;
    }
    if (include_timing)
      j["mean_runtime"] = s.mean_runtime;
    summaries.push_back(std::move(j));
  }
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json j{ { "rep", r.rep },
                      { "method", r.method },
                      { "ok", r.ok },
                      { "converged", r.converged },
                      { "l2_error", r.l2_error } };
    if (report.spec.kind == "coverage") {
      j["coverage"] = r.coverage;
      j["width"] = r.width;
    }
    if (include_timing)
      j["runtime"] = r.runtime;
    if (!r.message.empty())
      j["message"] = r.message;
    records.push_back(std::move(j));
  }
  return { { "spec", to_json(report.spec) },
           { "summaries", summaries },
           { "records", records } };
}

void write_csv(std::ostream& out, const ExperimentReport& report,
               bool include_timing)
{
  out << "rep,method,metric,value\n";
  out.precision(17);
  for (const auto& r : report.records) {
    auto row = [&](const char* metric, double value) {
      out << r.rep << ',' << r.method << ',' << metric << ',' << value << '\n';
    };
    row("ok", r.ok ? 1.0 : 0.0);
    row("converged", r.converged ? 1.0 : 0.0);
    if (!r.ok)
      continue;
    row("l2_error", r.l2_error);
    if (report.spec.kind == "coverage") {
      row("coverage", r.coverage);
      row("width", r.width);
    }
    if (include_timing)
      row("runtime", r.runtime);
  }
}

} // namespace conquer::sim
