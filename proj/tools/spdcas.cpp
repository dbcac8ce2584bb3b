#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spdcas/config.hpp"
#include "spdcas/encounters.hpp"
#include "spdcas/error.hpp"
#include "spdcas/metrics.hpp"
#include "spdcas/policy.hpp"
#include "spdcas/qtable.hpp"
#include "spdcas/simulator.hpp"
#include "spdcas/solver.hpp"

namespace fs = std::filesystem;
using namespace spdcas;

namespace {

enum Exit : int { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

// Bad flags or flag combinations.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing, unreadable or inconsistent input artifacts.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

RunConfig load_config(const Common& c) {
  RunConfig rc;
  if (!c.config_path.empty()) rc = load_run_config(c.config_path);
  if (c.seed) {
    rc.seed = *c.seed;
    rc.has_seed = true;
  }
  if (c.threads) rc.threads = *c.threads;
  if (rc.threads == 0) throw UsageError("threads must be at least 1");
  return rc;
}

std::uint64_t require_seed(const RunConfig& rc) {
  if (!rc.has_seed) throw UsageError("a seed is required (--seed or \"seed\" in the config file)");
  return rc.seed;
}

void check_output(const std::string& path, const char* flag) {
  if (path.empty()) return;
  const fs::path p(path);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  if (!fs::is_directory(dir)) throw UsageError(std::string(flag) + ": directory " + dir.string() + " does not exist");
  if (fs::is_directory(p)) throw UsageError(std::string(flag) + ": " + path + " is a directory");
}

void check_input(const std::string& path, const char* flag) {
  if (!fs::is_regular_file(path)) throw DataError(std::string(flag) + ": cannot read " + path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text) || !f.flush()) throw DataError("cannot write " + path);
}

template <class Fn>
auto reading(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw DataError(e.what());
  } catch (const CorruptTable& e) {
    throw DataError(path + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(path + ": " + e.what());
  }
}

QTable read_table(const std::string& path) {
  check_input(path, "table");
  return reading(path, [&] {
    QTable t = load_table(path);
    t.validate();
    return t;
  });
}

std::vector<Encounter> read_encounters(const std::string& path) {
  check_input(path, "encounters");
  return reading(path, [&] { return load_set(path); });
}

std::vector<SimResult> read_results(const std::string& path) {
  check_input(path, "results");
  return reading(path, [&] {
    std::ifstream f(path);
    return results_from_jsonl(f, path);
  });
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  std::string logic;
  std::optional<double> scale;
  std::string out;
};

int cmd_solve(const Common& common, const SolveArgs& a) {
  RunConfig rc = load_config(common);
  if (a.scale) rc.scale = *a.scale;
  if (!(rc.scale > 0.0 && rc.scale <= 1.0)) throw UsageError("scale must be in (0, 1], got " + fmt(rc.scale));
  LogicKind kind;
  try {
    kind = parse_logic_kind(a.logic);
  } catch (const InvalidArgument& e) {
    throw UsageError(std::string("--logic: ") + e.what());
  }
  const LogicSpec spec = logic_from_json(kind, rc.logic);
  check_output(a.out, "--out");
  const DiscretizationGrid grid = logic_grid(spec, rc.scale);
  std::cerr << "solving " << a.logic << " logic at scale " << rc.scale << ": " << grid.vertex_count() << " vertices, "
            << spec.action_count() << " actions, " << rc.threads << " thread(s)\n";
  const auto t0 = std::chrono::steady_clock::now();
  SolveOptions opt;
  opt.threads = rc.threads;
  opt.progress = &std::cerr;
  const QTable table = solve(spec, grid, opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_table(table, a.out);
  std::cerr << "solved in " << fmt(secs, 4) << " s; wrote " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string kind;
  std::size_t n = 0;
  std::string out;
  std::string geometry = "head-on";
  std::vector<double> ranges;
  double own_speed = 100.0;
  double intruder_speed = 100.0;
  double alt_offset = 0.0;
  double crossing_deg = 90.0;
};

int cmd_generate(const Common& common, const GenerateArgs& a) {
  const RunConfig rc = load_config(common);
  check_output(a.out, "--out");
  std::vector<Encounter> set;
  if (a.kind == "opsuit" || a.kind == "hovering") {
    if (a.n == 0) throw UsageError("--n must be at least 1");
    const std::uint64_t seed = require_seed(rc);
    set = a.kind == "opsuit" ? gen_opsuit_like(a.n, seed) : gen_hovering(a.n, seed);
  } else if (a.kind == "pairwise") {
    if (a.ranges.empty()) throw UsageError("--range is required for pairwise encounters");
    PairwiseGeometry g;
    try {
      g = parse_pairwise_geometry(a.geometry);
    } catch (const InvalidArgument& e) {
      throw UsageError(std::string("--geometry: ") + e.what());
    }
    std::vector<std::string> warnings;
    for (double r : a.ranges) {
      try {
        set.push_back(gen_pairwise(g, r, a.own_speed, a.intruder_speed, a.alt_offset, a.crossing_deg, &warnings));
      } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
      }
      set.back().id = numbered_id(set.back().id + "-", set.size() - 1);
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  } else {
    throw UsageError("--kind must be opsuit, hovering or pairwise, got '" + a.kind + "'");
  }
  write_text(a.out, encounters_to_jsonl(set));
  std::cerr << "wrote " << set.size() << " encounters to " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string encounters;
  std::vector<std::string> tables;
  std::vector<std::string> intruder_tables;
  std::string out;
  std::string summary;
  std::optional<std::size_t> repetitions;
  std::optional<double> p_no_response;
  std::optional<double> delay;
  std::optional<std::string> equipage;
  std::optional<std::size_t> belief_particles;
  bool no_noise = false;
  bool no_timeline = false;
};

int cmd_simulate(const Common& common, const SimulateArgs& a) {
  RunConfig rc = load_config(common);
  SimConfig cfg = rc.sim;
  if (a.repetitions) cfg.repetitions = *a.repetitions;
  if (a.p_no_response) cfg.pilot.p_no_response = *a.p_no_response;
  if (a.delay) cfg.pilot.delay = *a.delay;
  if (a.belief_particles) cfg.belief_particles = *a.belief_particles;
  if (a.no_noise) cfg.sensor = SensorNoise::none();
  if (a.no_timeline) cfg.record_timeline = false;
  try {
    if (a.equipage) cfg.equipage = parse_equipage(*a.equipage);
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const std::uint64_t seed = require_seed(rc);
  if (a.tables.size() > 3 || a.intruder_tables.size() > 3) throw UsageError("at most one table per dimension");
  check_output(a.out, "--out");
  check_output(a.summary, "--summary");

  const auto set = read_encounters(a.encounters);
  std::vector<QTable> own_tables, int_tables;
  for (const auto& p : a.tables) own_tables.push_back(read_table(p));
  for (const auto& p : a.intruder_tables) int_tables.push_back(read_table(p));
  auto pointers = [](const std::vector<QTable>& v) {
    std::vector<const QTable*> out;
    for (const auto& t : v) out.push_back(&t);
    return out;
  };
  CasSystem own, intruder;
  try {
    own = CasSystem(pointers(own_tables));
    intruder = CasSystem(pointers(int_tables));
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  const auto results = reading(a.encounters, [&] { return run_set(set, own, intruder, cfg, seed, rc.threads); });
  std::ostringstream jsonl;
  write_results_jsonl(jsonl, results);
  std::ostringstream csv;
  if (!a.summary.empty()) write_summary_csv(csv, results);
  write_text(a.out, jsonl.str());
  if (!a.summary.empty()) write_text(a.summary, csv.str());
  std::size_t nmacs = 0, alerts = 0;
  for (const auto& r : results) {
    nmacs += r.nmac ? 1 : 0;
    alerts += r.alerted ? 1 : 0;
  }
  std::cerr << "simulated " << results.size() << " runs: " << nmacs << " NMAC, " << alerts << " alerted; wrote "
            << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string results;
  std::string baseline;
  std::string encounters;
  std::string out;
  std::string histogram;
  double bin_width = 10.0;
  std::optional<double> p_no_response;
  int n_dims = 3;
};

int cmd_evaluate(const Common&, const EvaluateArgs& a) {
  if (!(a.bin_width > 0.0)) throw UsageError("--bin-width must be positive");
  if (a.n_dims != 2 && a.n_dims != 3) throw UsageError("--n-dims must be 2 or 3");
  if (a.p_no_response && !(*a.p_no_response >= 0.0 && *a.p_no_response <= 1.0))
    throw UsageError("--p-no-response must be in [0, 1]");
  if (!a.histogram.empty() && a.encounters.empty()) throw UsageError("--histogram needs --encounters");
  check_output(a.out, "--out");
  check_output(a.histogram, "--histogram");

  const auto results = read_results(a.results);
  std::optional<std::vector<SimResult>> baseline;
  if (!a.baseline.empty()) baseline = read_results(a.baseline);
  std::optional<std::vector<Encounter>> set;
  if (!a.encounters.empty()) set = read_encounters(a.encounters);

  EvaluateInputs in;
  in.results = &results;
  in.baseline = baseline ? &*baseline : nullptr;
  in.encounters = set ? &*set : nullptr;
  in.bin_width_deg = a.bin_width;
  in.p_no_response = a.p_no_response;
  in.n_dims = a.n_dims;
  MetricsReport rep;
  try {
    rep = evaluate(in);
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
  std::ostringstream hist;
  if (!a.histogram.empty()) write_histogram_csv(hist, *rep.histogram);
  write_text(a.out, to_json(rep).dump(2) + "\n");
  if (!a.histogram.empty()) write_text(a.histogram, hist.str());
  std::cerr << "P(NMAC) " << fmt(rep.p_nmac) << ", alert rate " << fmt(rep.alert_rate);
  if (rep.risk_ratio) std::cerr << ", risk ratio " << fmt(*rep.risk_ratio);
  if (!rep.risk_ratio_note.empty()) std::cerr << ", risk ratio undefined: " << rep.risk_ratio_note;
  std::cerr << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ProfileArgs {
  std::vector<std::string> tables;
  std::string out;
  double own_speed = 100.0;
  double intruder_speed = 100.0;
  double intruder_heading_deg = 180.0;
  double extent = 3.0;
  double cell = 0.1;
  double duration = 0.0;
  bool no_noise = false;
};

int cmd_profile(const Common& common, const ProfileArgs& a) {
  const RunConfig rc = load_config(common);
  if (a.tables.empty()) throw UsageError("--table is required");
  if (!(a.extent > 0.0)) throw UsageError("--extent must be positive");
  if (!(a.cell > 0.0)) throw UsageError("--cell must be positive");
  if (a.own_speed < 0.0 || a.intruder_speed < 0.0) throw UsageError("speeds must be nonnegative");
  if (a.duration < 0.0) throw UsageError("--duration must be nonnegative");
  ProfileParams p;
  p.own_speed = a.own_speed;
  p.intruder_speed = a.intruder_speed;
  p.intruder_heading = a.intruder_heading_deg * kDegToRad;
  p.extent_nmi = a.extent;
  p.cell_nmi = a.cell;
  p.duration = a.duration;
  p.sensor = a.no_noise ? SensorNoise::none() : rc.sim.sensor;
  p.threads = rc.threads;
  p.seed = p.sensor.zero() && !rc.has_seed ? 0 : require_seed(rc);
  check_output(a.out, "--out");

  std::vector<QTable> tables;
  for (const auto& t : a.tables) tables.push_back(read_table(t));
  std::vector<const QTable*> ptrs;
  for (const auto& t : tables) ptrs.push_back(&t);
  AlertingProfile prof;
  try {
    prof = alerting_profile(ptrs, p);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  std::ostringstream csv;
  write_profile_csv(csv, prof);
  write_text(a.out, csv.str());
  std::cerr << "wrote " << prof.masks.size() << " cells to " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct ResponseArgs {
  std::string input;
  double p = 0.1;
  double step = 0.005;
  std::string out;
  std::string report;
};

int cmd_response_model(const Common&, const ResponseArgs& a) {
  if (!(a.p >= 0.0 && a.p <= 1.0)) throw UsageError("--p must be in [0, 1]");
  if (!(a.step > 0.0 && a.step <= 1.0)) throw UsageError("--step must be in (0, 1]");
  check_output(a.out, "--out");
  check_output(a.report, "--report");
  check_input(a.input, "--input");
  const SubsetMap pnmac = reading(a.input, [&] {
    std::ifstream f(a.input);
    return read_subset_csv(f, a.input);
  });
  for (unsigned m = 0; m < 8; ++m)
    if (!pnmac.contains(m)) throw DataError(a.input + ": missing row for subset " + mask_label(m));

  const SubsetMap with = response_subset_probs(a.p, 3), without = response_subset_probs(a.p, 2);
  const double total_with = weighted_system_pnmac(pnmac, with);
  const double total_without = weighted_system_pnmac(restrict_subsets(pnmac, 3u), without);
  if (!(total_without > 0.0)) throw UndefinedRatio("system P(NMAC) without speed is zero");
  std::vector<ResponsePoint> curve;
  try {
    curve = response_curve(pnmac, sweep_points(a.step));
  } catch (const UndefinedRatio& e) {
    throw DataError(a.input + ": " + e.what());
  }

  std::ostringstream csv;
  csv << "p_no_response,with_speed,without_speed\n";
  for (const auto& pt : curve)
    csv << format_number(pt.p_no_response) << ',' << fmt(pt.with_speed, 9) << ',' << fmt(pt.without_speed, 9) << '\n';
  nlohmann::json rep;
  rep["p_no_response"] = a.p;
  auto probs = [](const SubsetMap& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m) j[mask_label(k)] = v;
    return j;
  };
  rep["with_speed"] = {{"subset_probs", probs(with)}, {"system_pnmac", total_with}};
  rep["without_speed"] = {{"subset_probs", probs(without)}, {"system_pnmac", total_without}};
  rep["ratio"] = total_with / total_without;
  if (!a.out.empty()) write_text(a.out, csv.str());
  if (!a.report.empty()) write_text(a.report, rep.dump(2) + "\n");
  std::cout << "with speed:    " << fmt(total_with, 5) << "\n"
            << "without speed: " << fmt(total_without, 5) << "\n"
            << "ratio:         " << fmt(total_with / total_without, 5) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speed-advisory collision avoidance: solve logics, generate encounters, simulate and evaluate."};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool seeded, bool threaded) {
    sub->add_option("--config", common.config_path, "JSON run configuration file");
    if (seeded) sub->add_option("--seed", common.seed, "Base random seed");
    if (threaded) sub->add_option("--threads", common.threads, "Worker threads");
  };

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "Compile a logic into a Q-table");
  solve_cmd->add_option("--logic", solve_args.logic, "speed, horizontal or vertical")->required();
  solve_cmd->add_option("--scale", solve_args.scale, "Grid scale in (0, 1]");
  solve_cmd->add_option("--out", solve_args.out, "Output table path")->required();
  add_common(solve_cmd, false, true);

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Generate an encounter set");
  gen_cmd->add_option("--kind", gen_args.kind, "opsuit, hovering or pairwise")->required();
  gen_cmd->add_option("--n", gen_args.n, "Encounter count (opsuit, hovering)");
  gen_cmd->add_option("--out", gen_args.out, "Output JSONL path")->required();
  gen_cmd->add_option("--geometry", gen_args.geometry, "head-on, overtake or crossing (pairwise)");
  gen_cmd->add_option("--range", gen_args.ranges, "Initial range(s) in ft (pairwise)");
  gen_cmd->add_option("--own-speed", gen_args.own_speed, "Ownship speed in ft/s (pairwise)");
  gen_cmd->add_option("--intruder-speed", gen_args.intruder_speed, "Intruder speed in ft/s (pairwise)");
  gen_cmd->add_option("--alt-offset", gen_args.alt_offset, "Intruder altitude offset in ft (pairwise)");
  gen_cmd->add_option("--crossing-deg", gen_args.crossing_deg, "Crossing angle in degrees (pairwise)");
  add_common(gen_cmd, true, false);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Run Monte Carlo simulations of an encounter set");
  sim_cmd->add_option("--encounters", sim_args.encounters, "Encounter JSONL")->required();
  sim_cmd->add_option("--table", sim_args.tables, "Ownship table (repeat per dimension; none = no CAS)");
  sim_cmd->add_option("--intruder-table", sim_args.intruder_tables, "Intruder table when equipped-equipped");
  sim_cmd->add_option("--out", sim_args.out, "Results JSONL path")->required();
  sim_cmd->add_option("--summary", sim_args.summary, "Summary CSV path");
  sim_cmd->add_option("--repetitions", sim_args.repetitions, "Repetitions per encounter");
  sim_cmd->add_option("--p-no-response", sim_args.p_no_response, "Probability the pilot ignores every dimension");
  sim_cmd->add_option("--delay", sim_args.delay, "Pilot response delay in s");
  sim_cmd->add_option("--equipage", sim_args.equipage, "equipped-unequipped or equipped-equipped");
  sim_cmd->add_option("--belief-particles", sim_args.belief_particles, "QMDP particles (0 = point estimate)");
  sim_cmd->add_flag("--no-noise", sim_args.no_noise, "Disable sensor noise");
  sim_cmd->add_flag("--no-timeline", sim_args.no_timeline, "Omit per-step advisories from the results");
  add_common(sim_cmd, true, true);

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Reduce simulation results to metrics");
  eval_cmd->add_option("--results", eval_args.results, "Results JSONL with the CAS")->required();
  eval_cmd->add_option("--baseline", eval_args.baseline, "Results JSONL without a CAS");
  eval_cmd->add_option("--encounters", eval_args.encounters, "Encounter JSONL (weights, headings)");
  eval_cmd->add_option("--out", eval_args.out, "Metrics JSON path")->required();
  eval_cmd->add_option("--histogram", eval_args.histogram, "NMAC heading histogram CSV path");
  eval_cmd->add_option("--bin-width", eval_args.bin_width, "Histogram bin width in degrees");
  eval_cmd->add_option("--p-no-response", eval_args.p_no_response, "Include response subset probabilities");
  eval_cmd->add_option("--n-dims", eval_args.n_dims, "Advisory dimensions for the response model (2 or 3)");
  add_common(eval_cmd, false, false);

  ProfileArgs prof_args;
  auto* prof_cmd = app.add_subcommand("profile", "Alerting profile around an unresponsive ownship");
  prof_cmd->add_option("--table", prof_args.tables, "Logic table (repeat per dimension)")->required();
  prof_cmd->add_option("--out", prof_args.out, "Profile CSV path")->required();
  prof_cmd->add_option("--own-speed", prof_args.own_speed, "Ownship speed in ft/s");
  prof_cmd->add_option("--intruder-speed", prof_args.intruder_speed, "Intruder speed in ft/s");
  prof_cmd->add_option("--intruder-heading", prof_args.intruder_heading_deg, "Intruder heading relative to ownship, deg");
  prof_cmd->add_option("--extent", prof_args.extent, "Half-width of the grid in NMi");
  prof_cmd->add_option("--cell", prof_args.cell, "Cell size in NMi");
  prof_cmd->add_option("--duration", prof_args.duration, "Encounter duration in s (0 = automatic)");
  prof_cmd->add_flag("--no-noise", prof_args.no_noise, "Disable sensor noise");
  add_common(prof_cmd, true, true);

  ResponseArgs resp_args;
  auto* resp_cmd = app.add_subcommand("response-model", "System P(NMAC) under probabilistic pilot response");
  resp_cmd->add_option("--input", resp_args.input, "CSV with columns subset,pnmac")->required();
  resp_cmd->add_option("--p", resp_args.p, "Probability the pilot responds in no dimension");
  resp_cmd->add_option("--step", resp_args.step, "Sweep step for the response curve");
  resp_cmd->add_option("--out", resp_args.out, "Response curve CSV path");
  resp_cmd->add_option("--report", resp_args.report, "Totals JSON path");
  add_common(resp_cmd, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*solve_cmd) return cmd_solve(common, solve_args);
    if (*gen_cmd) return cmd_generate(common, gen_args);
    if (*sim_cmd) return cmd_simulate(common, sim_args);
    if (*eval_cmd) return cmd_evaluate(common, eval_args);
    if (*prof_cmd) return cmd_profile(common, prof_args);
    if (*resp_cmd) return cmd_response_model(common, resp_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const SolverFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const UndefinedRatio& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
