#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "obslab/config.hpp"
#include "obslab/csv.hpp"
#include "obslab/highgain.hpp"
#include "obslab/reactor.hpp"
#include "obslab/signals.hpp"
#include "obslab/trace.hpp"

namespace obslab::scenario {

enum class Kind {
  reactor_observer,
  reactor_closed_loop,
  highgain_observer,
  bound_table,
  equivalence_check
};

std::string to_string(Kind k);

struct SignalConfig {
  signals::SignalSpec spec;
  std::vector<double> direction;  // empty: scalar
  bool present = false;
};

struct ScheduleConfig {
  std::string type = "uniform";  // or "jittered"
  double delta = 0.0;            // 0: fraction times the diameter bound
  double fraction = 0.1;
  std::optional<std::uint64_t> seed;
};

struct ScenarioConfig {
  Kind kind = Kind::reactor_observer;
  std::string name;  // output subdirectory
  double horizon = 10.0;
  std::uint64_t seed = 1;

  ScheduleConfig schedule;
  SignalConfig noise, disturbance, input;

  // grid
  double h = 0.0;
  int M = 400;
  double record_interval = 0.0;

  // reactor
  reactor::ReactorParams reactor;
  double sigma = 0.0;  // 0: zeta/8
  double Q_fb = 0.0;   // 0: Phi + 1
  double v0_amplitude = 1.0;
  std::string observer_init = "zero";  // or "matched"
  bool envelope = true;

  // highgain
  highgain::DesignInputs design;
  std::vector<double> x0{1.0, -0.5};
  std::vector<double> z0{0.0, 0.0};

  // bound_table
  double gamma = 1.0;
  double L = 1.0;
  std::vector<double> omegas;

  // equivalence_check
  std::vector<double> M_list{100, 200, 400};
};

// Throws config::ConfigError naming the offending key and line.
// A seed override replaces the top-level seed before signal seeds are derived.
ScenarioConfig parse_config(config::Document& doc,
                            std::optional<std::uint64_t> seed_override = {});
ScenarioConfig load_config(const std::string& path,
                           std::optional<std::uint64_t> seed_override = {});

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

// What the invariant checks need besides the trace itself.
struct CheckContext {
  Kind kind = Kind::reactor_observer;
  double delay = 1.0;
  double zeta = 1.0;
  double sigma = 0.0;
  double Q3 = 0.0;
  double noise_sup = 0.0;
  double disturbance_sup = 0.0;
  bool disturbance_constant = false;
  double gamma = 1.0, L = 1.0;  // bound table
};

std::vector<Check> trace_checks(const SimTrace& trace, const CheckContext& ctx);
std::vector<Check> table_checks(const csv::Table& table, const CheckContext& ctx);

struct Outcome {
  std::vector<Check> checks;
  std::vector<std::pair<std::string, std::string>> echo;
  std::vector<std::pair<std::string, std::string>> summary;
  CheckContext context;
  bool all_pass() const;
};

// Runs the scenario, writing trace.csv (or table.csv), aux.csv when present,
// summary.txt and params.echo into out_dir (created if missing).
Outcome run_scenario(const ScenarioConfig& cfg, const std::string& out_dir);

// Parses the "check <name> PASS|FAIL" lines of a summary file.
std::vector<Check> read_summary_checks(const std::string& path);
// Parses the "context.<field> = value" lines of a summary file.
CheckContext read_summary_context(const std::string& path);

}  // namespace obslab::scenario
