// obslab: run observer scenarios from config files.
//
//   obslab run <config...> [--out DIR] [--seed N] [--batch]
//
// Exit status: 0 all checks pass, 2 config error, 3 a check failed,
// 4 runtime or numeric failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "obslab/config.hpp"
#include "obslab/dde.hpp"
#include "obslab/scenario.hpp"

namespace fs = std::filesystem;
using namespace obslab;

namespace {

enum Status { ok = 0, config_error = 2, check_failed = 3, runtime_failure = 4 };

std::mutex io_mutex;

void report(const std::string& msg, bool err = false) {
  std::lock_guard<std::mutex> lock(io_mutex);
  (err ? std::cerr : std::cout) << msg << '\n';
}

int run_one(const std::string& path, const fs::path& root,
            std::optional<std::uint64_t> seed) {
  scenario::ScenarioConfig cfg;
  try {
    cfg = scenario::load_config(path, seed);
  } catch (const config::ConfigError& e) {
    report(path + ": " + e.what(), true);
    return config_error;
  }
  const fs::path dir = root / (cfg.name.empty() ? fs::path(path).stem().string() : cfg.name);
  try {
    const auto out = scenario::run_scenario(cfg, dir.string());
    std::string msg = path + " -> " + dir.string();
    for (const auto& c : out.checks)
      msg += "\n  " + std::string(c.pass ? "PASS " : "FAIL ") + c.name +
             (c.detail.empty() ? "" : ": " + c.detail);
    report(msg);
    if (!out.all_pass()) {
      for (const auto& c : out.checks)
        if (!c.pass) report(path + ": invariant failed: " + c.name, true);
      return check_failed;
    }
    return ok;
  } catch (const IntegrationError& e) {
    report(path + ": integration failed at t = " + std::to_string(e.time()) + ": " + e.what(), true);
  } catch (const std::domain_error& e) {
    report(path + ": " + e.what(), true);
  } catch (const std::exception& e) {
    report(path + ": " + e.what(), true);
  }
  return runtime_failure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampled-data observers for time-delay systems"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run one or more scenario configs");
  std::vector<std::string> configs;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool batch = false;
  run->add_option("config", configs, "scenario config file(s)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output root (default $OBSLAB_OUT or ./obslab_out)");
  run->add_option("--seed", seed, "override the config seed");
  run->add_flag("--batch", batch, "run the configs concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), config_error);
  }

  if (out.empty()) {
    const char* env = std::getenv("OBSLAB_OUT");
    out = env && *env ? env : "obslab_out";
  }
  const fs::path root(out);

  std::vector<int> status(configs.size(), ok);
  if (batch && configs.size() > 1) {
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < configs.size(); ++i)
      workers.emplace_back([&, i] { status[i] = run_one(configs[i], root, seed); });
    for (auto& w : workers) w.join();
  } else {
    for (std::size_t i = 0; i < configs.size(); ++i) status[i] = run_one(configs[i], root, seed);
  }

  // Worst outcome wins; config errors rank above the rest.
  int code = ok;
  for (int s : status)
    if (s == config_error || (code != config_error && s > code)) code = s;
  return code;
}
