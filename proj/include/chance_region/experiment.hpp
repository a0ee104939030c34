#pragma once

// Experiment orchestration behind the command-line tool: configuration,
// the learn -> fit -> dispatch pipeline, baselines, comparisons and plot data.
// Every artifact is a flat file; a manifest records inputs and query counts.

#include "chance_region/common.hpp"
#include "chance_region/dispatch.hpp"
#include "chance_region/ellipsoid.hpp"
#include "chance_region/ellipsoid_fit.hpp"
#include "chance_region/grid_model.hpp"
#include "chance_region/io.hpp"
#include "chance_region/oracle.hpp"
#include "chance_region/sampler.hpp"
#include "chance_region/scenario_baseline.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace chance_region::experiment {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kVersion =
#ifdef CHANCE_REGION_VERSION
    CHANCE_REGION_VERSION;
#else
    "0.1.0";
#endif

struct CovarianceSpec {
  double sigma_hi = 0.15;
  double sigma_lo = 0.05;
  double rho = 0.6;
  std::vector<Eigen::Index> correlated{0, 1, 7, 8, 10, 11};
};

enum class Shape { Ellipse, Square, Disk };

struct SynthSpec {
  Shape shape = Shape::Ellipse;
  Matrix A = (Matrix(2, 2) << 1.0, 0.5, 0.0, 0.6).finished();
  Vector b = (Vector(2) << 0.3, -0.2).finished();
  Vector lo = Vector::Constant(2, -1.0);
  Vector hi = Vector::Constant(2, 3.0);
  std::optional<Box> sample_box;  // defaults per shape
  int mc_samples = 100000;
};

struct RunConfig {
  fs::path base_dir = ".";
  // 13-bus inputs
  std::optional<fs::path> lines, injections, scenarios, heldout;
  Eigen::Index scenario_count = 1000;
  Eigen::Index heldout_size = 10000;
  std::uint64_t scenario_seed = 7;
  std::uint64_t heldout_seed = 8;
  CovarianceSpec covariance;
  double v_lo = -0.5, v_hi = 0.5, alpha = 0.9;
  std::optional<double> q_cap = 0.1;  // per-bus |q_i| limit, applied at dispatch
  bool oracle_box = false;            // also treat the cap as part of the learned region
  double start_range = 1.0;           // start search over t * 1, |t| <= start_range
  // sampling
  double tau = 1e-2;
  int budget = 400;
  double lambda0 = 16.0;
  std::uint64_t seed = 0;
  int start_grid = 81;
  FitConfig fit;
  // baseline
  Eigen::Index baseline_scenarios = 20;
  double enumeration_cap = 1e6;
  SynthSpec synth;
  unsigned threads = 1;
  fs::path out = "out";
};

// --- configuration ------------------------------------------------------------

inline std::string to_string(Shape s) {
  switch (s) {
    case Shape::Ellipse: return "ellipse";
    case Shape::Square: return "square";
    case Shape::Disk: return "disk";
  }
  return "ellipse";
}

inline Shape shape_from_string(const std::string& s) {
  if (s == "ellipse") return Shape::Ellipse;
  if (s == "square") return Shape::Square;
  if (s == "disk") return Shape::Disk;
  throw Error(ErrorCode::InvalidArgument, "unknown synthetic shape '" + s + "'");
}

inline Box default_sample_box(const SynthSpec& s) {
  switch (s.shape) {
    case Shape::Ellipse: return Box::uniform(2, -4.0, 4.0);
    case Shape::Square: return Box::uniform(s.lo.size(), -3.0, 5.0);
    case Shape::Disk: return Box::uniform(2, -2.0, 2.0);
  }
  return Box::uniform(2, -4.0, 4.0);
}

inline void validate(const RunConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
  if (!(cfg.tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  if (cfg.budget < 2) throw Error(ErrorCode::InvalidArgument, "budget must be at least 2");
  if (!(cfg.lambda0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda0 must be positive");
  if (cfg.q_cap && !(*cfg.q_cap > 0.0)) throw Error(ErrorCode::InvalidArgument, "q_cap must be positive");
  if (!(cfg.v_lo < cfg.v_hi)) throw Error(ErrorCode::InvalidArgument, "v_lo must be below v_hi");
  if (cfg.start_grid < 2) throw Error(ErrorCode::InvalidArgument, "start_grid must be at least 2");
  if (!(cfg.start_range > 0.0)) throw Error(ErrorCode::InvalidArgument, "start_range must be positive");
  if (cfg.threads < 1) throw Error(ErrorCode::InvalidArgument, "threads must be at least 1");
}

inline RunConfig config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    auto path_of = [&](const char* key) -> std::optional<fs::path> {
      if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
      fs::path p = j.at(key).get<std::string>();
      return p.is_absolute() ? p : base_dir / p;
    };
    auto get = [&](const json& obj, const char* key, auto& field) {
      if (obj.contains(key) && !obj.at(key).is_null()) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    c.lines = path_of("lines");
    c.injections = path_of("injections");
    c.scenarios = path_of("scenarios");
    c.heldout = path_of("heldout");
    get(j, "scenario_count", c.scenario_count);
    get(j, "heldout_size", c.heldout_size);
    get(j, "scenario_seed", c.scenario_seed);
    get(j, "heldout_seed", c.heldout_seed);
    if (j.contains("covariance")) {
      const auto& cv = j.at("covariance");
      get(cv, "sigma_hi", c.covariance.sigma_hi);
      get(cv, "sigma_lo", c.covariance.sigma_lo);
      get(cv, "rho", c.covariance.rho);
      get(cv, "correlated", c.covariance.correlated);
    }
    get(j, "v_lo", c.v_lo);
    get(j, "v_hi", c.v_hi);
    get(j, "alpha", c.alpha);
    if (j.contains("q_cap")) c.q_cap = j.at("q_cap").is_null() ? std::nullopt : std::optional(j.at("q_cap").get<double>());
    get(j, "tau", c.tau);
    get(j, "budget", c.budget);
    get(j, "lambda0", c.lambda0);
    get(j, "seed", c.seed);
    get(j, "start_grid", c.start_grid);
    get(j, "oracle_box", c.oracle_box);
    get(j, "start_range", c.start_range);
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      get(f, "max_iters", c.fit.max_iters);
      get(f, "step0", c.fit.step0);
      get(f, "eig_floor", c.fit.eig_floor);
      get(f, "nu_feasible", c.fit.nu_feasible);
      get(f, "nu_infeasible", c.fit.nu_infeasible);
      get(f, "volume_reg_mu", c.fit.volume_reg_mu);
    }
    if (j.contains("baseline")) {
      get(j.at("baseline"), "scenarios", c.baseline_scenarios);
      get(j.at("baseline"), "enumeration_cap", c.enumeration_cap);
    }
    if (j.contains("synth")) {
      const auto& s = j.at("synth");
      if (s.contains("shape")) c.synth.shape = shape_from_string(s.at("shape").get<std::string>());
      if (s.contains("A")) c.synth.A = matrix_from_json(s.at("A"));
      if (s.contains("b")) c.synth.b = vector_from_json(s.at("b"));
      if (s.contains("lo")) c.synth.lo = vector_from_json(s.at("lo"));
      if (s.contains("hi")) c.synth.hi = vector_from_json(s.at("hi"));
      if (s.contains("sample_box")) {
        const auto& bx = s.at("sample_box");
        c.synth.sample_box = Box{vector_from_json(bx.at("lo")), vector_from_json(bx.at("hi"))};
      }
      get(s, "mc_samples", c.synth.mc_samples);
    }
    get(j, "threads", c.threads);
    if (auto out = path_of("out")) c.out = *out;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + ex.what());
  }
  return c;
}

inline RunConfig load_config(const fs::path& path) {
  auto in = io::open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + ex.what());
  }
  return config_from_json(j, path.parent_path());
}

/// Effective configuration as recorded in manifests.
inline json to_json(const RunConfig& c) {
  auto opt_path = [](const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); };
  json j{{"lines", opt_path(c.lines)},
         {"injections", opt_path(c.injections)},
         {"scenarios", opt_path(c.scenarios)},
         {"heldout", opt_path(c.heldout)},
         {"scenario_count", c.scenario_count},
         {"heldout_size", c.heldout_size},
         {"scenario_seed", c.scenario_seed},
         {"heldout_seed", c.heldout_seed},
         {"covariance",
          {{"sigma_hi", c.covariance.sigma_hi},
           {"sigma_lo", c.covariance.sigma_lo},
           {"rho", c.covariance.rho},
           {"correlated", c.covariance.correlated}}},
         {"v_lo", c.v_lo},
         {"v_hi", c.v_hi},
         {"alpha", c.alpha},
         {"q_cap", c.q_cap ? json(*c.q_cap) : json(nullptr)},
         {"tau", c.tau},
         {"budget", c.budget},
         {"lambda0", c.lambda0},
         {"seed", c.seed},
         {"start_grid", c.start_grid},
         {"oracle_box", c.oracle_box},
         {"start_range", c.start_range},
         {"fit",
          {{"max_iters", c.fit.max_iters},
           {"step0", c.fit.step0},
           {"eig_floor", c.fit.eig_floor},
           {"nu_feasible", c.fit.nu_feasible},
           {"nu_infeasible", c.fit.nu_infeasible},
           {"volume_reg_mu", c.fit.volume_reg_mu}}},
         {"baseline", {{"scenarios", c.baseline_scenarios}, {"enumeration_cap", c.enumeration_cap}}},
         {"threads", c.threads},
         {"out", c.out.generic_string()}};
  const Box sb = c.synth.sample_box.value_or(default_sample_box(c.synth));
  j["synth"] = {{"shape", to_string(c.synth.shape)},
                {"A", to_json_matrix(c.synth.A)},
                {"b", to_json_vector(c.synth.b)},
                {"lo", to_json_vector(c.synth.lo)},
                {"hi", to_json_vector(c.synth.hi)},
                {"sample_box", {{"lo", to_json_vector(sb.lo)}, {"hi", to_json_vector(sb.hi)}}},
                {"mc_samples", c.synth.mc_samples}};
  return j;
}

// --- manifest -------------------------------------------------------------------

/// Run record: config, seed, content hashes of inputs, oracle call counts.
class Manifest {
 public:
  Manifest(std::string command, const RunConfig& cfg) : command_(std::move(command)), cfg_(cfg) {}

  void input(const fs::path& p) { inputs_[p.generic_string()] = io::content_hash(p); }
  void calls(const std::string& what, std::size_t n) { calls_[what] = n; }
  void output(const fs::path& p) { outputs_.push_back(p.filename().generic_string()); }

  json to_json() const {
    return json{{"command", command_},
                {"version", kVersion},
                {"seed", cfg_.seed},
                {"config", experiment::to_json(cfg_)},
                {"inputs", inputs_},
                {"oracle_calls", calls_},
                {"outputs", outputs_}};
  }

  fs::path write() const {
    const fs::path p = cfg_.out / ("manifest_" + command_ + ".json");
    write_json(p, to_json());
    return p;
  }

  static void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorCode::MissingInput, "cannot write " + p.string());
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  RunConfig cfg_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::size_t> calls_;
  std::vector<std::string> outputs_;
};

inline void write_json(const fs::path& p, const json& j) { Manifest::write_json(p, j); }

inline json read_json(const fs::path& p) {
  auto in = io::open_input(p);
  try {
    return json::parse(in);
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::ParseError, p.string() + ": " + ex.what());
  }
}

// --- 13-bus problem -------------------------------------------------------------

struct FeederProblem {
  NetworkModel net;
  ChanceSpec spec;
  ScenarioSet train;
  ScenarioSet heldout;
  std::optional<Box> q_box;
};

inline Matrix covariance_of(const RunConfig& cfg, Eigen::Index d) {
  return correlated_covariance(d, cfg.covariance.correlated, cfg.covariance.sigma_hi, cfg.covariance.sigma_lo,
                               cfg.covariance.rho);
}

inline FeederProblem load_feeder(const RunConfig& cfg, Manifest* manifest = nullptr) {
  if (!cfg.lines || !cfg.injections) throw Error(ErrorCode::MissingInput, "config needs 'lines' and 'injections'");
  FeederProblem prob;
  prob.net = load_network(*cfg.lines, *cfg.injections);
  const auto d = prob.net.dim();
  if (manifest) {
    manifest->input(*cfg.lines);
    manifest->input(*cfg.injections);
  }
  prob.spec = ChanceSpec::uniform(d, cfg.v_lo, cfg.v_hi, cfg.alpha);
  if (cfg.scenarios) {
    prob.train = read_scenarios_csv(*cfg.scenarios);
    if (manifest) manifest->input(*cfg.scenarios);
  } else {
    prob.train = gen_scenarios(covariance_of(cfg, d), cfg.scenario_count, cfg.scenario_seed);
  }
  if (cfg.heldout) {
    prob.heldout = read_scenarios_csv(*cfg.heldout);
    if (manifest) manifest->input(*cfg.heldout);
  } else {
    prob.heldout = gen_scenarios(covariance_of(cfg, d), cfg.heldout_size, cfg.heldout_seed);
  }
  require_size(prob.train.dim(), d, "training scenario columns");
  require_size(prob.heldout.dim(), d, "held-out scenario columns");
  if (cfg.q_cap) prob.q_box = Box::uniform(d, -*cfg.q_cap, *cfg.q_cap);
  return prob;
}

/// Feasible start in the middle of the longest feasible run of t * 1 for t on
/// a uniform grid over [-range, range]. Every grid point is a counted query.
inline Vector centered_start(const Oracle& oracle, double range, int grid) {
  const auto d = oracle.dim();
  const double lo = -range, hi = range;
  std::vector<Vector> candidates;
  std::vector<bool> ok;
  for (int k = 0; k < grid; ++k) {
    const double t = lo + (hi - lo) * k / (grid - 1);
    candidates.push_back(Vector::Constant(d, t));
    ok.push_back(oracle.query(candidates.back()) == Label::Feasible);
  }
  int best_start = -1, best_len = 0;
  for (int k = 0; k < grid;) {
    if (!ok[static_cast<std::size_t>(k)]) {
      ++k;
      continue;
    }
    int j = k;
    while (j < grid && ok[static_cast<std::size_t>(j)]) ++j;
    if (j - k > best_len) {
      best_len = j - k;
      best_start = k;
    }
    k = j;
  }
  if (best_start < 0) return find_feasible_start(oracle, candidates);  // reports NoFeasibleStart
  const double t0 = lo + (hi - lo) * best_start / (grid - 1);
  const double t1 = lo + (hi - lo) * (best_start + best_len - 1) / (grid - 1);
  const Vector mid = Vector::Constant(d, 0.5 * (t0 + t1));
  const std::vector<Vector> order{mid, candidates[static_cast<std::size_t>(best_start)]};
  return find_feasible_start(oracle, order);
}

inline EmpiricalChanceOracle feeder_oracle(const FeederProblem& prob, const RunConfig& cfg) {
  return EmpiricalChanceOracle(prob.net, prob.spec, prob.train, cfg.oracle_box ? prob.q_box : std::nullopt);
}

struct LearnedRegion {
  Vector q0;
  QueryLog log;
  Ellipsoid ellipsoid;
  FitReport report;
  std::size_t start_calls = 0;
};

inline ActiveSamplingOptions sampling_options(const RunConfig& cfg) {
  return ActiveSamplingOptions{cfg.budget, cfg.tau, cfg.lambda0, cfg.seed, 20};
}

/// Active sampling from `q0` followed by the ellipsoid fit around it.
inline LearnedRegion learn_region(const Oracle& oracle, const Vector& q0, const RunConfig& cfg) {
  LearnedRegion out;
  out.q0 = q0;
  out.log = active_sample(oracle, q0, sampling_options(cfg));
  auto [e, rep] = fit(out.log.points, q0, cfg.fit);
  out.ellipsoid = std::move(e);
  out.report = std::move(rep);
  return out;
}

/// Random-sampling counterpart with `count` uniform queries in `box`.
inline LearnedRegion learn_region_random(const Oracle& oracle, const Vector& q0, const Box& box, int count,
                                         const RunConfig& cfg) {
  LearnedRegion out;
  out.q0 = q0;
  out.log = random_sample(oracle, box, count, cfg.seed);
  auto [e, rep] = fit(out.log.points, q0, cfg.fit);
  out.ellipsoid = std::move(e);
  out.report = std::move(rep);
  return out;
}

inline json fit_report_json(const LearnedRegion& r) {
  json j = to_json(r.report);
  j["q0"] = to_json_vector(r.q0);
  j["directions"] = r.log.direction_count;
  j["queries"] = r.log.points.size();
  j["min_eig_normalized"] = min_eig_normalized(data_matrix(r.log.points, r.q0));
  return j;
}

// --- commands -------------------------------------------------------------------

inline void prepare_out(const RunConfig& cfg) { fs::create_directories(cfg.out); }

struct FitRun {
  LearnedRegion region;
  double wall_time_s = 0.0;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Learn the 13-bus region: writes ellipsoid.json, fit_report.json, query_log.csv.
inline FitRun run_fit(const RunConfig& cfg) {
  validate(cfg);
  prepare_out(cfg);
  Manifest man("fit", cfg);
  auto prob = load_feeder(cfg, &man);
  const auto t0 = std::chrono::steady_clock::now();
  const EmpiricalChanceOracle oracle = feeder_oracle(prob, cfg);
  const Vector q0 = centered_start(oracle, cfg.start_range, cfg.start_grid);
  const auto start_calls = oracle.calls();
  FitRun run;
  run.region = learn_region(oracle, q0, cfg);
  run.region.start_calls = start_calls;
  run.wall_time_s = seconds_since(t0);

  const auto d = prob.net.dim();
  write_json(cfg.out / "ellipsoid.json", to_json(run.region.ellipsoid));
  write_json(cfg.out / "fit_report.json", fit_report_json(run.region));
  write_query_log_csv(cfg.out / "query_log.csv", run.region.log, d);
  man.calls("start", start_calls);
  man.calls("active_sampling", run.region.log.oracle_calls);
  man.calls("total", oracle.calls());
  for (const char* f : {"ellipsoid.json", "fit_report.json", "query_log.csv"}) man.output(cfg.out / f);
  man.write();
  return run;
}

/// Dispatch over a stored ellipsoid; writes solve.json with held-out risk.
inline SolveResult run_solve(const RunConfig& cfg, const std::optional<fs::path>& ellipsoid_path = std::nullopt) {
  validate(cfg);
  prepare_out(cfg);
  Manifest man("solve", cfg);
  const fs::path ep = ellipsoid_path.value_or(cfg.out / "ellipsoid.json");
  const Ellipsoid e = ellipsoid_from_json(read_json(ep));
  man.input(ep);
  auto prob = load_feeder(cfg, &man);
  require_size(e.dim(), prob.net.dim(), "ellipsoid dimension");
  SolveResult res = solve_dispatch(e, with_box(prob.q_box));
  res.risk_heldout = evaluate_risk(prob.net, prob.spec, prob.heldout, res.q_star);
  write_json(cfg.out / "solve.json", to_json(res));
  man.output(cfg.out / "solve.json");
  man.write();
  return res;
}

/// Exact scenario baseline on the first `baseline_scenarios` training scenarios.
inline ScenarioResult run_baseline(const RunConfig& cfg) {
  validate(cfg);
  prepare_out(cfg);
  Manifest man("baseline", cfg);
  auto prob = load_feeder(cfg, &man);
  const auto S = std::min(cfg.baseline_scenarios, prob.train.count());
  ScenarioResult res = solve_scenario(prob.net, prob.spec, prob.train.head(S),
                                      ScenarioBaselineOptions{prob.q_box, cfg.enumeration_cap, cfg.threads});
  res.result.risk_heldout = evaluate_risk(prob.net, prob.spec, prob.heldout, res.result.q_star);
  write_json(cfg.out / "baseline.json", to_json(res));
  man.output(cfg.out / "baseline.json");
  man.write();
  return res;
}

// --- synthetic studies ------------------------------------------------------------

inline std::unique_ptr<Oracle> synth_oracle(const SynthSpec& s) {
  switch (s.shape) {
    case Shape::Ellipse: return std::make_unique<EllipseOracle>(s.A, s.b);
    case Shape::Disk: return std::make_unique<EllipseOracle>(Matrix::Identity(2, 2), Vector::Zero(2));
    case Shape::Square: return std::make_unique<BoxOracle>(s.lo, s.hi);
  }
  return nullptr;
}

struct SynthMethod {
  std::string method;
  LearnedRegion region;
  double overlap = 0.0;
  double false_positive = 0.0;
  double wall_time_s = 0.0;
};

struct SynthRun {
  SynthMethod active;
  SynthMethod random;
};

/// Active vs random sampling at equal query budget on a known 2-D region.
inline SynthRun run_synth_study(const RunConfig& cfg) {
  validate(cfg);
  const auto truth = synth_oracle(cfg.synth);
  const Box sample_box = cfg.synth.sample_box.value_or(default_sample_box(cfg.synth));
  const Vector q0 = find_feasible_start(*truth, std::vector<Vector>{Vector::Zero(truth->dim())});

  SynthRun run;
  auto t0 = std::chrono::steady_clock::now();
  run.active.method = "ellipsoid-active";
  run.active.region = learn_region(*truth, q0, cfg);
  run.active.wall_time_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  run.random.method = "ellipsoid-random";
  run.random.region = learn_region_random(*truth, q0, sample_box,
                                          static_cast<int>(run.active.region.log.oracle_calls), cfg);
  run.random.wall_time_s = seconds_since(t0);

  for (SynthMethod* m : {&run.active, &run.random}) {
    const EllipsoidOracle fitted(m->region.ellipsoid);
    m->overlap = region_overlap(*truth, fitted, sample_box, cfg.synth.mc_samples, cfg.seed + 1);
    m->false_positive = false_positive_rate(*truth, fitted, sample_box, cfg.synth.mc_samples, cfg.seed + 2);
  }
  return run;
}

inline SynthRun run_synth(const RunConfig& cfg) {
  prepare_out(cfg);
  Manifest man("synth", cfg);
  SynthRun run = run_synth_study(cfg);
  const auto d = run.active.region.q0.size();
  json summary = json::object();
  for (const SynthMethod* m : {&run.active, &run.random}) {
    const std::string tag = m->method == "ellipsoid-active" ? "active" : "random";
    write_json(cfg.out / ("ellipsoid_" + tag + ".json"), to_json(m->region.ellipsoid));
    write_query_log_csv(cfg.out / ("query_log_" + tag + ".csv"), m->region.log, d);
    summary[tag] = {{"overlap_jaccard", m->overlap},
                    {"false_positive_rate", m->false_positive},
                    {"queries", m->region.log.oracle_calls},
                    {"fit", fit_report_json(m->region)}};
    man.calls(tag, m->region.log.oracle_calls);
    man.output(cfg.out / ("ellipsoid_" + tag + ".json"));
    man.output(cfg.out / ("query_log_" + tag + ".csv"));
  }
  summary["shape"] = to_string(cfg.synth.shape);
  write_json(cfg.out / "synth.json", summary);
  man.output(cfg.out / "synth.json");
  man.write();
  return run;
}

// --- comparison table -------------------------------------------------------------

struct CompareRow {
  std::string method;
  double wall_time_s = 0.0;
  std::optional<double> empirical_risk, q_norm, objective, overlap_jaccard;
  std::string status = "ok";
};

inline void write_compare_csv(const fs::path& p, const std::vector<CompareRow>& rows) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::MissingInput, "cannot write " + p.string());
  auto cell = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); };
  out << "method,wall_time_s,empirical_risk,q_norm,objective,overlap_jaccard,status\n";
  for (const auto& r : rows) {
    out << r.method << ',' << io::format_double(r.wall_time_s) << ',' << cell(r.empirical_risk) << ','
        << cell(r.q_norm) << ',' << cell(r.objective) << ',' << cell(r.overlap_jaccard) << ',' << r.status << '\n';
  }
}

/// Synthetic mode compares active and random fits by overlap; feeder mode
/// compares both fits' dispatches against the scenario baseline.
inline std::vector<CompareRow> run_compare(const RunConfig& cfg, bool synthetic) {
  validate(cfg);
  prepare_out(cfg);
  Manifest man("compare", cfg);
  std::vector<CompareRow> rows;
  if (synthetic) {
    const SynthRun run = run_synth_study(cfg);
    for (const SynthMethod* m : {&run.active, &run.random}) {
      CompareRow r;
      r.method = m->method;
      r.wall_time_s = m->wall_time_s;
      r.overlap_jaccard = m->overlap;
      rows.push_back(r);
      man.calls(m->method, m->region.log.oracle_calls);
    }
  } else {
    auto prob = load_feeder(cfg, &man);
    const EmpiricalChanceOracle oracle = feeder_oracle(prob, cfg);
    auto t0 = std::chrono::steady_clock::now();
    const Vector q0 = centered_start(oracle, cfg.start_range, cfg.start_grid);
    const double start_time = seconds_since(t0);
    const auto start_calls = oracle.calls();

    auto ellipsoid_row = [&](const std::string& method, auto&& learn) {
      CompareRow r;
      r.method = method;
      const auto t = std::chrono::steady_clock::now();
      const std::size_t before = oracle.calls();
      try {
        const LearnedRegion region = learn();
        const SolveResult s = solve_dispatch(region.ellipsoid, with_box(prob.q_box));
        r.empirical_risk = evaluate_risk(prob.net, prob.spec, prob.heldout, s.q_star);
        r.q_norm = s.q_norm;
        r.objective = s.objective;
      } catch (const Error& ex) {
        r.status = std::string(chance_region::to_string(ex.code()));
      }
      r.wall_time_s = start_time + seconds_since(t);
      man.calls(method, oracle.calls() - before);
      return r;
    };
    rows.push_back(ellipsoid_row("ellipsoid-active", [&] { return learn_region(oracle, q0, cfg); }));
    const int active_calls = static_cast<int>(man.to_json()["oracle_calls"]["ellipsoid-active"].get<std::size_t>());
    // Uniform queries over the cube the active rays can reach.
    const Box sample_box{q0.array() - cfg.lambda0, q0.array() + cfg.lambda0};
    rows.push_back(ellipsoid_row("ellipsoid-random", [&] {
      return learn_region_random(oracle, q0, sample_box, active_calls, cfg);
    }));
    man.calls("start", start_calls);

    CompareRow b;
    b.method = "scenario-baseline";
    t0 = std::chrono::steady_clock::now();
    try {
      const auto S = std::min(cfg.baseline_scenarios, prob.train.count());
      const ScenarioResult res = solve_scenario(prob.net, prob.spec, prob.train.head(S),
                                                ScenarioBaselineOptions{prob.q_box, cfg.enumeration_cap, cfg.threads});
      b.empirical_risk = evaluate_risk(prob.net, prob.spec, prob.heldout, res.result.q_star);
      b.q_norm = res.result.q_norm;
      b.objective = res.result.objective;
    } catch (const Error& ex) {
      b.status = std::string(chance_region::to_string(ex.code()));
    }
    b.wall_time_s = seconds_since(t0);
    rows.push_back(b);
  }
  write_compare_csv(cfg.out / "comparison.csv", rows);
  man.output(cfg.out / "comparison.csv");
  man.write();
  return rows;
}

// --- plot data --------------------------------------------------------------------

inline constexpr int kBoundaryPoints = 720;

/// Closed boundary of a 2-D ellipsoid as `count` points.
inline Matrix ellipsoid_boundary(const Ellipsoid& e, int count = kBoundaryPoints) {
  if (e.dim() != 2) throw Error(ErrorCode::DimensionTooHigh, "boundary traces need d = 2");
  // {u : (u - c)^T M (u - c) <= rho} with c = -M^{-1} h / 2, rho = 1 + c^T M c.
  const Vector c = -0.5 * e.M.ldlt().solve(e.h);
  const double rho = 1.0 + c.dot(e.M * c);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(e.M);
  const Matrix inv_sqrt = eig.eigenvectors() * eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse().asDiagonal() *
                          eig.eigenvectors().transpose();
  Matrix pts(count, 2);
  for (int k = 0; k < count; ++k) {
    const double th = 2.0 * std::numbers::pi * k / count;
    const Vector dir = (Vector(2) << std::cos(th), std::sin(th)).finished();
    pts.row(k) = (e.q_ref + c + std::sqrt(std::max(rho, 0.0)) * inv_sqrt * dir).transpose();
  }
  return pts;
}

inline Matrix square_boundary(const Vector& lo, const Vector& hi, int count = kBoundaryPoints) {
  if (lo.size() != 2) throw Error(ErrorCode::DimensionTooHigh, "boundary traces need d = 2");
  const std::array<Vector, 5> corners{(Vector(2) << lo(0), lo(1)).finished(), (Vector(2) << hi(0), lo(1)).finished(),
                                      (Vector(2) << hi(0), hi(1)).finished(), (Vector(2) << lo(0), hi(1)).finished(),
                                      (Vector(2) << lo(0), lo(1)).finished()};
  Matrix pts(count, 2);
  const int per_edge = count / 4;
  for (int k = 0; k < count; ++k) {
    const int edge = std::min(k / per_edge, 3);
    const double s = static_cast<double>(k - edge * per_edge) / per_edge;
    pts.row(k) = ((1.0 - s) * corners[static_cast<std::size_t>(edge)] + s * corners[static_cast<std::size_t>(edge + 1)]).transpose();
  }
  return pts;
}

inline void write_polyline_csv(const fs::path& p, const Matrix& pts) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::MissingInput, "cannot write " + p.string());
  out << "x,y\n";
  for (Eigen::Index k = 0; k < pts.rows(); ++k) out << io::format_double(pts(k, 0)) << ',' << io::format_double(pts(k, 1)) << '\n';
}

struct PlotDataResult {
  std::vector<fs::path> written;
  std::optional<std::string> warning;
};

/// points.csv always; boundary_fitted.csv (and boundary_truth.csv for a synthetic
/// config) when the problem is 2-D.
inline PlotDataResult emit_plot_data(const RunConfig& cfg, const fs::path& query_log, const fs::path& ellipsoid_json,
                                     bool synthetic) {
  prepare_out(cfg);
  Manifest man("plotdata", cfg);
  PlotDataResult res;
  const QueryLog log = read_query_log_csv(query_log);
  const Ellipsoid e = ellipsoid_from_json(read_json(ellipsoid_json));
  man.input(query_log);
  man.input(ellipsoid_json);

  const fs::path points = cfg.out / "points.csv";
  write_query_log_csv(points, log, e.dim());
  res.written.push_back(points);
  if (e.dim() > 2) {
    res.warning = "DimensionTooHigh: d = " + std::to_string(e.dim()) + ", boundary traces skipped";
  } else if (e.dim() == 2) {
    write_polyline_csv(cfg.out / "boundary_fitted.csv", ellipsoid_boundary(e));
    res.written.push_back(cfg.out / "boundary_fitted.csv");
    if (synthetic) {
      Matrix truth;
      switch (cfg.synth.shape) {
        case Shape::Square: truth = square_boundary(cfg.synth.lo, cfg.synth.hi); break;
        case Shape::Ellipse: {
          const EllipseOracle o(cfg.synth.A, cfg.synth.b);
          truth = ellipsoid_boundary(o.as_ellipsoid(o.A().fullPivLu().solve(o.b())));
          break;
        }
        case Shape::Disk: truth = ellipsoid_boundary(Ellipsoid{Matrix::Identity(2, 2), Vector::Zero(2), -1.0, Vector::Zero(2)}); break;
      }
      write_polyline_csv(cfg.out / "boundary_truth.csv", truth);
      res.written.push_back(cfg.out / "boundary_truth.csv");
    }
  }
  for (const auto& p : res.written) man.output(p);
  man.write();
  return res;
}

}  // namespace chance_region::experiment
