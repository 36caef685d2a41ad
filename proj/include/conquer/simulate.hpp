#pragma once

#include "conquer/inference.hpp"
#include "conquer/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace conquer::sim {

enum class Model
{
  Homogeneous,   // y = b0 + <x, b> + e
  LinearHet,     // scale 0.5 x_last + 1
  QuadraticHet   // scale 0.5 {1 + (x_last - 1)^2}
};

struct Noise
{
  enum class Family
  {
    Gaussian,
    StudentT
  };
  Family family = Family::Gaussian;
  //! Standard deviation for Gaussian noise, degrees of freedom for t.
  double param = 2.0;
  //! Multiplies every draw; 0 gives noiseless responses.
  double scale = 1.0;

  static Noise gaussian(double sd) { return { Family::Gaussian, sd, 1.0 }; }
  static Noise student_t(double df) { return { Family::StudentT, df, 1.0 }; }
};

Model parse_model(const std::string& name);
std::string to_string(Model model);
//! "gaussian" (N(0, 4)), "t2", "t1.5", or "tDF" for any DF > 0.
Noise parse_noise(const std::string& name);
std::string to_string(const Noise& noise);

//! tau-quantile of the (scaled) noise distribution.
double noise_quantile(const Noise& noise, double tau);

//! Scale multiplier applied to the centered noise for a covariate row.
double scale_factor(Model model, double x_last);

//! n x (p - 1) covariates, uniform on sqrt(3) [-1, 1] marginally, with
//! correlation 0.7^|j - k| realized through a Gaussian copula.
Matrix generate_covariates(Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                           bool* projected = nullptr);

//! Responses from one of the three location-scale models with the noise
//! centered at its tau-quantile; covariates exclude the intercept.
Vector generate_response(Model model, const Matrix& covariates, double tau,
                         const Noise& noise, std::uint64_t seed);

//! The conditional tau-quantile coefficients (intercept first) for
//! generate_response; length p = covariates + 1.
Vector true_coefficients(Model model, const Noise& noise, double tau,
                         Eigen::Index p);

struct ExperimentSpec
{
  std::string kind = "estimation"; // or "coverage"
  Model model = Model::Homogeneous;
  Noise noise = Noise::gaussian(2.0);
  Eigen::Index n = 400;
  Eigen::Index p = 20;
  double tau = 0.5;
  int reps = 100;
  int B = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  KernelKind kernel = KernelKind::Gaussian;
  std::optional<double> bandwidth;
  //! estimation: conquer, horowitz, onestep4, onestep6
  //! coverage: mb-per, mb-piv, mb-norm, normal
  std::vector<std::string> methods;
  int threads = 1;

  void validate() const;
};

ExperimentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentSpec& spec);

struct RepRecord
{
  int rep = 0;
  std::string method;
  bool ok = true;        // false when the method threw
  bool converged = true; // solver reached its gradient tolerance
  std::string message;
  double l2_error = 0.0;
  double coverage = 0.0; // fraction of slopes covered
  double width = 0.0;    // mean slope interval width
  double runtime = 0.0;  // seconds
};

struct MethodSummary
{
  std::string method;
  int successes = 0;
  int failures = 0;
  double mean_l2_error = 0.0;
  double se_l2_error = 0.0;
  double median_l2_error = 0.0;
  double mean_coverage = 0.0;
  double mean_width = 0.0;
  double mean_runtime = 0.0;
};

struct ExperimentReport
{
  ExperimentSpec spec;
  std::vector<MethodSummary> summaries;
  std::vector<RepRecord> records; // rep-major, methods in spec order

  const MethodSummary& summary(const std::string& method) const;
};

struct Replicate
{
  Dataset data;
  Vector truth;
};

//! Data for repetition `rep` of an experiment; depends only on (spec, rep).
Replicate make_replicate(const ExperimentSpec& spec, int rep);

ExperimentReport run_estimation_experiment(const ExperimentSpec& spec);
ExperimentReport run_coverage_experiment(const ExperimentSpec& spec);
ExperimentReport run_experiment(const ExperimentSpec& spec);

nlohmann::json to_json(const ExperimentReport& report, bool include_timing = true);
//! Tidy rows: rep,method,metric,value
void write_csv(std::ostream& out, const ExperimentReport& report,
               bool include_timing = true);

} // namespace conquer::sim
