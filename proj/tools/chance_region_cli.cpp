// Command-line front end: chance_region_cli <fit|solve|baseline|synth|compare|plotdata|scenarios> [flags]
//
// Exit codes: 0 success, 1 computation error, 2 bad or missing input.
// Errors are printed to stderr as one JSON object {"error": ..., "message": ...}.

#include "chance_region/experiment.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace cr = chance_region;
namespace ex = chance_region::experiment;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, tau;
  std::optional<int> budget;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  // per-command inputs
  std::string ellipsoid, query_log, file;
  std::optional<long> count;
};

ex::RunConfig resolve(const Flags& f) {
  ex::RunConfig cfg = f.config.empty() ? ex::RunConfig{} : ex::load_config(f.config);
  if (const char* env = std::getenv("CHANCE_REGION_THREADS")) {
    try {
      cfg.threads = static_cast<unsigned>(std::stoul(env));
    } catch (const std::exception&) {
      throw cr::Error(cr::ErrorCode::InvalidArgument, std::string("CHANCE_REGION_THREADS is not a number: ") + env);
    }
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.tau) cfg.tau = *f.tau;
  if (f.budget) cfg.budget = *f.budget;
  if (f.threads) cfg.threads = *f.threads;
  if (f.out) cfg.out = *f.out;
  ex::validate(cfg);
  return cfg;
}

bool is_synthetic(const ex::RunConfig& cfg) { return !cfg.lines; }

int report_error(cr::ErrorCode code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", std::string(cr::to_string(code))}, {"message", message}}.dump() << '\n';
  const bool input_problem = code == cr::ErrorCode::MissingInput || code == cr::ErrorCode::ParseError;
  return input_problem ? 2 : 1;
}

void print(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn ellipsoidal inner approximations of chance-constrained feasible sets"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--seed", f.seed, "RNG seed");
    sub->add_option("--alpha", f.alpha, "chance level in (0, 1]");
    sub->add_option("--tau", f.tau, "bisection tolerance");
    sub->add_option("--budget", f.budget, "oracle query budget N0");
    sub->add_option("--threads", f.threads, "worker cap (falls back to CHANCE_REGION_THREADS)");
    sub->add_option("--out", f.out, "output directory");
  };

  auto* fit = app.add_subcommand("fit", "sample the feeder's feasible region and fit an ellipsoid");
  auto* solve = app.add_subcommand("solve", "minimum-norm dispatch over a fitted ellipsoid");
  auto* baseline = app.add_subcommand("baseline", "exact scenario-approximation baseline");
  auto* synth = app.add_subcommand("synth", "active vs random sampling on a synthetic 2-D region");
  auto* compare = app.add_subcommand("compare", "comparison table (feeder or synthetic config)");
  auto* plot = app.add_subcommand("plotdata", "boundary traces and query points as CSV");
  auto* scen = app.add_subcommand("scenarios", "write Gaussian scenarios from the configured covariance");
  for (auto* sub : {fit, solve, baseline, synth, compare, plot, scen}) add_common(sub);
  solve->add_option("--ellipsoid", f.ellipsoid, "ellipsoid JSON (default OUT/ellipsoid.json)");
  plot->add_option("--ellipsoid", f.ellipsoid, "ellipsoid JSON")->required();
  plot->add_option("--query-log", f.query_log, "query log CSV")->required();
  scen->add_option("--file", f.file, "destination CSV")->required();
  scen->add_option("--count", f.count, "number of scenarios (default scenario_count)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const ex::RunConfig cfg = resolve(f);
    if (fit->parsed()) {
      const auto run = ex::run_fit(cfg);
      print(ex::fit_report_json(run.region));
    } else if (solve->parsed()) {
      const auto res = ex::run_solve(cfg, f.ellipsoid.empty() ? std::nullopt : std::optional<ex::fs::path>(f.ellipsoid));
      print(cr::to_json(res));
    } else if (baseline->parsed()) {
      print(cr::to_json(ex::run_baseline(cfg)));
    } else if (synth->parsed()) {
      ex::run_synth(cfg);
      print(ex::read_json(cfg.out / "synth.json"));
    } else if (compare->parsed()) {
      ex::run_compare(cfg, is_synthetic(cfg));
      std::cout << "wrote " << (cfg.out / "comparison.csv").string() << '\n';
    } else if (plot->parsed()) {
      const auto res = ex::emit_plot_data(cfg, f.query_log, f.ellipsoid, is_synthetic(cfg));
      if (res.warning) std::cerr << "warning: " << *res.warning << '\n';
      for (const auto& p : res.written) std::cout << "wrote " << p.string() << '\n';
    } else if (scen->parsed()) {
      if (!cfg.lines || !cfg.injections) {
        throw cr::Error(cr::ErrorCode::MissingInput, "scenarios needs a feeder config with 'lines'");
      }
      const auto d = static_cast<Eigen::Index>(cr::read_lines_csv(*cfg.lines).size());
      const auto S = f.count ? static_cast<Eigen::Index>(*f.count) : cfg.scenario_count;
      cr::write_scenarios_csv(f.file, cr::gen_scenarios(ex::covariance_of(cfg, d), S, cfg.scenario_seed));
      std::cout << "wrote " << f.file << '\n';
    }
  } catch (const cr::Error& e) {
    return report_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error(cr::ErrorCode::InvalidArgument, e.what());
  }
  return 0;
}
