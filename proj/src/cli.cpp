#include "conquer/cli.hpp"

#include "conquer/csv.hpp"
#include "conquer/error.hpp"
#include "conquer/inference.hpp"
#include "conquer/onestep.hpp"
#include "conquer/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace conquer::cli {

namespace {

using nlohmann::json;

struct Options
{
  std::string data;
  std::string y_col = "y";
  double tau = 0.5;
  std::string kernel = "gaussian";
  std::string h = "auto";
  double tol = 1e-4;
  int max_iter = 5000;
  bool no_standardize = false;
  std::string out;
  int threads = 1;

  // fit / onestep
  bool one_step = false;
  int order = 4;
  std::string b = "auto";

  // bootstrap
  int B = 1000;
  std::uint64_t seed = 1;
  std::string method = "per,piv,norm";
  double alpha = 0.05;

  // simulate
  std::string config;
  std::string csv;
  bool no_timing = false;

  // bench
  std::vector<long> bench_n{ 1000, 5000, 10000 };
};

std::optional<double> parse_auto(const std::string& text, const char* flag)
{
  if (text == "auto")
    return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || used == 0)
    throw DomainError(std::string(flag) + " must be a number or 'auto', got '" +
                      text + "'");
  validate_bandwidth(v);
  return v;
}

int default_threads()
{
  if (const char* env = std::getenv("CONQUER_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t > 0)
        return t;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

FitConfig fit_config(const Options& o)
{
  FitConfig cfg;
  cfg.tau = o.tau;
  cfg.kernel = parse_kernel(o.kernel);
  cfg.bandwidth = parse_auto(o.h, "--h");
  cfg.tol = o.tol;
  cfg.max_iter = o.max_iter;
  cfg.standardize = !o.no_standardize;
  cfg.validate();
  return cfg;
}

OneStepConfig one_step_config(const Options& o)
{
  const FitConfig base = fit_config(o);
  if (o.order != 4 && o.order != 6)
    throw DomainError("--order must be 4 or 6");
  OneStepConfig cfg;
  cfg.tau = base.tau;
  cfg.pilot_kernel = base.kernel;
  cfg.pilot_bandwidth = base.bandwidth;
  cfg.refinement_bandwidth = parse_auto(o.b, "--b");
  cfg.order = o.order;
  cfg.tol = base.tol;
  cfg.max_iter = base.max_iter;
  cfg.standardize = base.standardize;
  cfg.validate();
  return cfg;
}

LoadedData load(const Options& o)
{
  if (o.data.empty())
    throw DomainError("--data is required");
  return load_csv_file(o.data, o.y_col);
}

json fit_json(const FitResult& fit, const std::vector<std::string>& names)
{
  json coef = json::array();
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
    coef.push_back({ { "name", names.at(std::size_t(j)) },
                     { "estimate", fit.beta(j) } });
  return { { "coefficients", coef },
           { "iterations", fit.iterations },
           { "grad_norm", fit.grad_norm },
           { "converged", fit.converged },
           { "h", fit.h_used },
           { "loss", fit.loss },
           { "bb_fallbacks", fit.bb_fallbacks } };
}

json config_json(const Options& o, const FitConfig& cfg, const LoadedData& d)
{
  return { { "data", o.data },
           { "y_col", o.y_col },
           { "n", d.data.n() },
           { "p", d.data.p() },
           { "tau", cfg.tau },
           { "kernel", to_string(cfg.kernel) },
           { "h", cfg.resolve_bandwidth(d.data.n(), d.data.p()) },
           { "h_auto", !cfg.bandwidth.has_value() },
           { "tol", cfg.tol },
           { "max_iter", cfg.max_iter },
           { "standardize", cfg.standardize } };
}

json one_step_json(const OneStepResult& res, const std::vector<std::string>& names)
{
  json j = fit_json(res.fit, names);
  j["pilot"] = fit_json(res.pilot, names);
  j["b"] = res.b_used;
  j["solve_path"] = to_string(res.path);
  j["jitter"] = res.jitter;
  j["system_residual"] = res.system_residual;
  j["rhs_norm"] = res.rhs_norm;
  return j;
}

json cmd_fit(const Options& o)
{
  const LoadedData d = load(o);
  if (o.one_step) {
    const OneStepConfig cfg = one_step_config(o);
    json config = config_json(o, cfg.pilot_config(), d);
    const OneStepResult res = one_step_fit(d.data, cfg);
    config["one_step"] = true;
    config["order"] = cfg.order;
    config["b"] = res.b_used;
    return { { "command", "fit" }, { "config", config },
             { "result", one_step_json(res, d.names) } };
  }
  const FitConfig cfg = fit_config(o);
  const FitResult fit = fit_conquer(d.data, cfg);
  return { { "command", "fit" }, { "config", config_json(o, cfg, d) },
           { "result", fit_json(fit, d.names) } };
}

json cmd_onestep(const Options& o)
{
  const LoadedData d = load(o);
  const OneStepConfig cfg = one_step_config(o);
  const OneStepResult res = one_step_fit(d.data, cfg);
  json config = config_json(o, cfg.pilot_config(), d);
  config["order"] = cfg.order;
  config["b"] = res.b_used;
  config["b_auto"] = !cfg.refinement_bandwidth.has_value();
  return { { "command", "onestep" }, { "config", config },
           { "result", one_step_json(res, d.names) } };
}

std::vector<std::string> split_list(const std::string& text)
{
  std::vector<std::string> parts;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty())
      parts.push_back(item);
  return parts;
}

json cmd_bootstrap(const Options& o)
{
  const LoadedData d = load(o);
  const FitConfig cfg = fit_config(o);
  if (!(o.alpha > 0.0 && o.alpha < 1.0))
    throw DomainError("--alpha must lie in (0, 1)");
  const auto methods = split_list(o.method);
  if (methods.empty())
    throw DomainError("--method lists no interval methods");
  for (const auto& m : methods)
    if (m != "per" && m != "piv" && m != "norm" && m != "normal")
      throw DomainError("unknown interval method '" + m +
                        "' (expected per, piv, norm or normal)");

  BootstrapOptions opts;
  opts.threads = o.threads;
  const BootstrapResult boot = bootstrap_fit(d.data, cfg, o.B, o.seed, opts);

  json intervals = json::array();
  for (const auto& m : methods) {
    ConfidenceIntervals ci;
    if (m == "per")
      ci = percentile_ci(boot, o.alpha);
    else if (m == "piv")
      ci = pivotal_ci(boot, o.alpha);
    else if (m == "norm")
      ci = mb_norm_ci(boot, o.alpha);
    else
      ci = normal_ci(d.data, boot.base, cfg.tau, cfg.kernel, boot.base_fit.h_used,
                     o.alpha);
    json block = to_json(ci, d.names);
    block["method"] = m == "normal" ? std::string("normal") : "mb-" + m;
    intervals.push_back(std::move(block));
  }

  json config = config_json(o, cfg, d);
  config["B"] = o.B;
  config["seed"] = o.seed;
  config["alpha"] = o.alpha;
  config["methods"] = methods;
  return { { "command", "bootstrap" },
           { "config", config },
           { "result",
             { { "fit", fit_json(boot.base_fit, d.names) },
               { "usable_draws", boot.usable() },
               { "failed_draws", boot.failed },
               { "unreliable", boot.unreliable() },
               { "intervals", intervals } } } };
}

json cmd_simulate(const Options& o)
{
  if (o.config.empty())
    throw DomainError("--config is required");
  std::ifstream in(o.config);
  if (!in)
    throw DataError("cannot open config file '" + o.config + "'");
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in '" + o.config + "': " + e.what());
  }
  sim::ExperimentSpec spec;
  try {
    spec = sim::spec_from_json(raw);
  } catch (const json::exception& e) {
    throw DomainError(std::string("invalid experiment spec: ") + e.what());
  }
  spec.threads = o.threads;
  const sim::ExperimentReport report = sim::run_experiment(spec);
  if (!o.csv.empty()) {
    std::ofstream csv(o.csv);
    if (!csv)
      throw DataError("cannot write '" + o.csv + "'");
    sim::write_csv(csv, report, !o.no_timing);
  }
  json j = sim::to_json(report, !o.no_timing);
  return { { "command", "simulate" }, { "config", j.at("spec") },
           { "result", { { "summaries", j.at("summaries") },
                         { "records", j.at("records") } } } };
}

// p = floor(sqrt(n)), t_2 noise, homogeneous model, one fit per n
void cmd_bench(const Options& o, std::ostream& out)
{
  FitConfig cfg = fit_config(o);
  std::ostringstream csv;
  csv.precision(10);
  csv << "n,p,h,seconds,l2_error,iterations,converged\n";
  for (long n : o.bench_n) {
    const auto p = Eigen::Index(std::floor(std::sqrt(double(n))));
    if (n < 4 || p >= n)
      throw DomainError("bench sizes must be at least 4");
    sim::ExperimentSpec spec;
    spec.n = n;
    spec.p = p;
    spec.tau = cfg.tau;
    spec.noise = sim::Noise::student_t(2.0);
    spec.seed = o.seed;
    const sim::Replicate rep = sim::make_replicate(spec, 0);
    const auto start = std::chrono::steady_clock::now();
    const FitResult fit = fit_conquer(rep.data, cfg);
    const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    csv << n << ',' << p << ',' << fit.h_used << ',' << secs << ','
        << (fit.beta - rep.truth).norm() << ',' << fit.iterations << ','
        << (fit.converged ? 1 : 0) << '\n';
  }
  if (o.out.empty()) {
    out << "# tau=" << cfg.tau << " kernel=" << to_string(cfg.kernel)
        << " seed=" << o.seed << " noise=t2 p=floor(sqrt(n))\n"
        << csv.str();
    return;
  }
  std::ofstream file(o.out);
  if (!file)
    throw DataError("cannot write '" + o.out + "'");
  file << csv.str();
  out << json{ { "command", "bench" },
               { "config",
                 { { "tau", cfg.tau },
                   { "kernel", to_string(cfg.kernel) },
                   { "seed", o.seed },
                   { "n", o.bench_n },
                   { "noise", "t2" } } },
               { "out", o.out } }
           .dump(2)
      << '\n';
}

void add_fit_flags(CLI::App* cmd, Options& o)
{
  cmd->add_option("--data", o.data, "CSV file with a header row")->required();
  cmd->add_option("--y-col", o.y_col, "Response column name");
  cmd->add_option("--tau", o.tau, "Quantile level in (0, 1)");
  cmd->add_option("--kernel", o.kernel,
                  "gaussian, logistic, uniform, epanechnikov or triangular");
  cmd->add_option("--h", o.h, "Bandwidth or 'auto'");
  cmd->add_option("--tol", o.tol, "Gradient norm tolerance");
  cmd->add_option("--max-iter", o.max_iter, "Iteration cap");
  cmd->add_flag("--no-standardize", o.no_standardize,
                "Run the solver on raw covariates");
  cmd->add_option("--out", o.out, "Write JSON here instead of stdout");
}

void add_one_step_flags(CLI::App* cmd, Options& o)
{
  cmd->add_option("--order", o.order, "Refinement kernel order (4 or 6)");
  cmd->add_option("--b", o.b, "Refinement bandwidth or 'auto'");
}

void emit(const json& j, const Options& o, std::ostream& out)
{
  const std::string text = j.dump(2) + "\n";
  if (o.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(o.out);
  if (!file)
    throw DataError("cannot write '" + o.out + "'");
  file << text;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err)
{
  Options o;
  o.threads = default_threads();

  CLI::App app{ "Convolution-smoothed quantile regression" };
  app.name("conquer");
  app.require_subcommand(1);
  // -h would collide with the bandwidth flag --h
  app.set_help_flag("--help", "Print this help message and exit");

  auto* fit = app.add_subcommand("fit", "Fit a smoothed quantile regression");
  add_fit_flags(fit, o);
  fit->add_flag("--one-step", o.one_step,
                "Refine with a higher-order kernel Newton step");
  add_one_step_flags(fit, o);

  auto* onestep = app.add_subcommand("onestep", "Pilot fit plus one-step refinement");
  add_fit_flags(onestep, o);
  add_one_step_flags(onestep, o);

  auto* boot = app.add_subcommand("bootstrap", "Multiplier bootstrap intervals");
  add_fit_flags(boot, o);
  boot->add_option("--B", o.B, "Bootstrap replicates");
  boot->add_option("--seed", o.seed, "Random seed");
  boot->add_option("--method", o.method, "Comma list of per, piv, norm, normal");
  boot->add_option("--alpha", o.alpha, "Significance level");
  boot->add_option("--threads", o.threads, "Worker threads");

  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo experiment");
  simulate->add_option("--config", o.config, "Experiment spec (JSON)")->required();
  simulate->add_option("--csv", o.csv, "Also write tidy per-rep CSV");
  simulate->add_option("--out", o.out, "Write JSON here instead of stdout");
  simulate->add_option("--threads", o.threads, "Worker threads");
  simulate->add_flag("--no-timing", o.no_timing, "Omit runtimes from output");

  auto* bench = app.add_subcommand("bench", "Time single fits with p = floor(sqrt(n))");
  bench->add_option("--n", o.bench_n, "Sample sizes")->delimiter(',');
  bench->add_option("--tau", o.tau, "Quantile level");
  bench->add_option("--kernel", o.kernel, "Smoothing kernel");
  bench->add_option("--h", o.h, "Bandwidth or 'auto'");
  bench->add_option("--tol", o.tol, "Gradient norm tolerance");
  bench->add_option("--max-iter", o.max_iter, "Iteration cap");
  bench->add_option("--seed", o.seed, "Random seed");
  bench->add_option("--out", o.out, "Write CSV here instead of stdout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "conquer: " << e.what() << '\n';
    return 1;
  }

  try {
    if (o.threads < 1)
      throw DomainError("--threads must be positive");
    if (fit->parsed())
      emit(cmd_fit(o), o, out);
    else if (onestep->parsed())
      emit(cmd_onestep(o), o, out);
    else if (boot->parsed())
      emit(cmd_bootstrap(o), o, out);
    else if (simulate->parsed())
      emit(cmd_simulate(o), o, out);
    else if (bench->parsed())
      cmd_bench(o, out);
    return 0;
  } catch (const DomainError& e) {
    err << "conquer: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "conquer: data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "conquer: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "conquer: " << e.what() << '\n';
    return 3;
  }
}

int run(int argc, char** argv)
{
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i)
    args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

} // namespace conquer::cli
