#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cocreate/agent.hpp"
#include "cocreate/baselines.hpp"
#include "cocreate/behavior.hpp"
#include "cocreate/env.hpp"
#include "cocreate/neural.hpp"

namespace cocreate {

// Configuration problems: unparsable file, unknown or ill-typed field, block
// invariant violation, missing checkpoint.  Mapped to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Process exit codes used by run_command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;    // config / precondition problems
inline constexpr int kExitRuntime = 3;   // I/O and input-data failures
inline constexpr int kExitDiverged = 4;  // training aborted on non-finite loss

struct SweepSpec {
  std::string param;  // one of alpha1 | alpha2 | B | beta
  std::vector<double> values;

  void validate() const;
};

// One run description: every block carries the standard study defaults, so
// an empty JSON object is a complete config.  The resolved config, defaults
// included, is echoed into the manifest.
struct RunConfig {
  ServiceParams service;
  ScenarioSpec scenario;  // default: standard E2 shape for the horizon
  ExtrasCoupling coupling;
  PpoConfig ppo;
  nn::NetConfig net;  // obs/capacity/user dims always follow `service`
  std::vector<PlanKind> baselines = {PlanKind::Plan1, PlanKind::Plan2, PlanKind::Plan3};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int eval_episodes = 20;
  std::string out_dir = "runs";
  double split = 0.8;  // leading fraction of each participant's records used for fitting
  std::optional<std::string> lifelog;     // fit profiles from this CSV when set
  std::optional<std::string> checkpoint;  // evaluate/compare model input
  std::vector<ScenarioKind> compare_scenarios;  // default: the configured scenario
  bool train_inline = false;  // compare: train from scratch when no checkpoint is given
  std::optional<SweepSpec> sweep;

  void validate() const;  // throws ConfigError
};

// JSON <-> RunConfig.  Parse errors carry line:column positions; unknown or
// ill-typed fields are rejected by name.
RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

// Population profiles: fitted from the lifelog's leading `split` fraction
// per participant when one is configured, pooled defaults otherwise.  Info
// lines (split sizes, duplicate drops) are appended to `notes` when given.
std::vector<UserProfile> resolve_profiles(const RunConfig& cfg, std::vector<std::string>* notes);

// Environment on the configured scenario, or on another scenario's standard
// shape (used by compare across E1..E4).
Environment build_environment(const RunConfig& cfg);
Environment build_environment(const RunConfig& cfg, ScenarioKind kind);

// ---- small helpers shared with the tests ----

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// Writes via a temp file in the same directory plus rename, creating parent
// directories as needed.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Shortest decimal form that round-trips the exact double value.
std::string format_double(double v);

// Full CLI entry point; `args` excludes the program name.  Returns one of
// the kExit* codes and reports problems on stderr.
int run_command(const std::vector<std::string>& args);

}  // namespace cocreate
