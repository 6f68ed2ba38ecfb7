#include "cocreate/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <Eigen/Core>
#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"

namespace cocreate {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- small helpers ----

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("double formatting failed");
  return std::string(buf, p);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

namespace {

struct Log {
  bool quiet = false;
  void info(const std::string& m) const {
    if (!quiet) std::cerr << "[info] " << m << "\n";
  }
  void warn(const std::string& m) const { std::cerr << "[warn] " << m << "\n"; }
};

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw ConfigError(origin + ": " + msg);
}

std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Field access with exact-name diagnostics.  Every known key is recorded so
// unrecognized ones can be rejected, which catches config typos early.
struct Fields {
  const json& obj;
  const std::string& origin;
  std::string block;  // empty at top level
  std::vector<std::string> known;

  Fields(const json& o, const std::string& org, std::string blk)
      : obj(o), origin(org), block(std::move(blk)) {
    if (!obj.is_object()) fail(origin, where("") + "must be a JSON object");
  }

  std::string where(const std::string& key) const {
    std::string q = block;
    if (!key.empty()) q += (q.empty() ? "" : ".") + key;
    return q.empty() ? "config " : "field '" + q + "' ";
  }

  const json* find(const std::string& key) {
    known.push_back(key);
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
  }

  void reject_unknown() const {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (std::find(known.begin(), known.end(), it.key()) == known.end())
        fail(origin, "unknown " + where(it.key()));
  }

  void number(const std::string& key, double& dst) {
    if (const json* j = find(key)) {
      if (!j->is_number()) fail(origin, where(key) + "must be a number");
      dst = j->get<double>();
    }
  }

  void integer(const std::string& key, int& dst) {
    if (const json* j = find(key)) {
      if (!j->is_number_integer()) fail(origin, where(key) + "must be an integer");
      dst = j->get<int>();
    }
  }

  void boolean(const std::string& key, bool& dst) {
    if (const json* j = find(key)) {
      if (!j->is_boolean()) fail(origin, where(key) + "must be a boolean");
      dst = j->get<bool>();
    }
  }

  void text(const std::string& key, std::string& dst) {
    if (const json* j = find(key)) {
      if (!j->is_string()) fail(origin, where(key) + "must be a string");
      dst = j->get<std::string>();
    }
  }

  void text_opt(const std::string& key, std::optional<std::string>& dst) {
    if (const json* j = find(key)) {
      if (!j->is_string()) fail(origin, where(key) + "must be a string");
      dst = j->get<std::string>();
    }
  }

  bool numbers(const std::string& key, std::vector<double>& dst) {
    const json* j = find(key);
    if (!j) return false;
    if (!j->is_array()) fail(origin, where(key) + "must be an array of numbers");
    std::vector<double> v;
    for (const auto& e : *j) {
      if (!e.is_number()) fail(origin, where(key) + "must be an array of numbers");
      v.push_back(e.get<double>());
    }
    dst = std::move(v);
    return true;
  }

  bool integers(const std::string& key, std::vector<int>& dst) {
    const json* j = find(key);
    if (!j) return false;
    if (!j->is_array()) fail(origin, where(key) + "must be an array of integers");
    std::vector<int> v;
    for (const auto& e : *j) {
      if (!e.is_number_integer()) fail(origin, where(key) + "must be an array of integers");
      v.push_back(e.get<int>());
    }
    dst = std::move(v);
    return true;
  }

  bool strings(const std::string& key, std::vector<std::string>& dst) {
    const json* j = find(key);
    if (!j) return false;
    if (!j->is_array()) fail(origin, where(key) + "must be an array of strings");
    std::vector<std::string> v;
    for (const auto& e : *j) {
      if (!e.is_string()) fail(origin, where(key) + "must be an array of strings");
      v.push_back(e.get<std::string>());
    }
    dst = std::move(v);
    return true;
  }
};

std::string toolchain_id() {
  std::ostringstream os;
  os << "cxx " << __VERSION__ << "; eigen " << EIGEN_WORLD_VERSION << "."
     << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION;
  return os.str();
}

}  // namespace

// ---- config ----

void SweepSpec::validate() const {
  if (param != "alpha1" && param != "alpha2" && param != "B" && param != "beta")
    throw std::invalid_argument("sweep.param must be one of alpha1|alpha2|B|beta");
  if (values.empty()) throw std::invalid_argument("sweep.values must not be empty");
}

void RunConfig::validate() const {
  try {
    service.validate();
    scenario.validate();
    coupling.validate();
    ppo.validate();
    net.validate();
    if (sweep) sweep->validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("config: split must lie in (0, 1)");
  if (eval_episodes <= 0) throw ConfigError("config: eval_episodes must be positive");
  if (seeds.empty()) throw ConfigError("config: seeds must not be empty");
  if (baselines.empty()) throw ConfigError("config: baselines must not be empty");
  if (net.obs_dim != service.observation_dim() ||
      net.capacity_levels != static_cast<int>(service.capacity_levels.size()) ||
      net.n_users != service.n_users)
    throw ConfigError(
        "config: net dimensions must follow the service block "
        "(obs/capacity/user sizes are not directly configurable)");
}

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(json_text, e.byte);
    fail(origin, "parse error at line " + std::to_string(line) + ":" + std::to_string(col) +
                     " (" + e.what() + ")");
  }

  RunConfig cfg;
  Fields top(root, origin, "");

  if (const json* j = top.find("service")) {
    Fields f(*j, origin, "service");
    f.number("alpha1", cfg.service.alpha1);
    f.number("alpha2", cfg.service.alpha2);
    f.number("budget", cfg.service.budget);
    f.number("beta", cfg.service.beta);
    f.numbers("capacity_levels", cfg.service.capacity_levels);
    f.integer("n_users", cfg.service.n_users);
    f.integer("horizon", cfg.service.horizon);
    if (const json* s = f.find("scales")) {
      Fields g(*s, origin, "service.scales");
      g.number("engagement_max", cfg.service.scales.engagement_max);
      g.number("health_cap", cfg.service.scales.health_cap);
      g.numbers("extra_max", cfg.service.scales.extra_max);
      g.reject_unknown();
    }
    f.reject_unknown();
  }
  cfg.service.extra_channels = kNumExtraChannels;  // the emulator always provides all four

  // Scenario resolution: the standard shape for the kind, then explicit
  // overrides on top.
  ScenarioKind kind = ScenarioKind::E2;
  {
    const json* j = top.find("scenario");
    if (j) {
      Fields f(*j, origin, "scenario");
      std::string kind_name;
      f.text("kind", kind_name);
      if (!kind_name.empty()) {
        try {
          kind = scenario_from_string(kind_name);
        } catch (const std::invalid_argument& e) {
          fail(origin, std::string("field 'scenario.kind': ") + e.what());
        }
      }
      cfg.scenario = ScenarioSpec::standard(kind, cfg.service.horizon);
      f.integer("phase_length", cfg.scenario.phase_length);
      f.numbers("multipliers", cfg.scenario.multipliers);
      f.reject_unknown();
    } else {
      cfg.scenario = ScenarioSpec::standard(kind, cfg.service.horizon);
    }
  }

  if (const json* j = top.find("coupling")) {
    Fields f(*j, origin, "coupling");
    std::vector<double> r;
    if (f.numbers("target_r", r)) {
      if (r.size() != kNumExtraChannels)
        fail(origin, "field 'coupling.target_r' must hold exactly " +
                         std::to_string(kNumExtraChannels) + " values");
      std::copy(r.begin(), r.end(), cfg.coupling.target_r.begin());
    }
    f.reject_unknown();
  }

  if (const json* j = top.find("ppo")) {
    Fields f(*j, origin, "ppo");
    f.number("clip_epsilon", cfg.ppo.clip_epsilon);
    f.number("discount", cfg.ppo.discount);
    f.number("gae_lambda", cfg.ppo.gae_lambda);
    f.integer("epochs_per_batch", cfg.ppo.epochs_per_batch);
    f.integer("minibatch_episodes", cfg.ppo.minibatch_episodes);
    f.integer("rollout_episodes", cfg.ppo.rollout_episodes);
    f.integer("batches", cfg.ppo.batches);
    f.number("entropy_coef", cfg.ppo.entropy_coef);
    f.number("actor_lr", cfg.ppo.actor_lr);
    f.number("critic_lr", cfg.ppo.critic_lr);
    f.number("vf_coef", cfg.ppo.vf_coef);
    f.boolean("normalize_advantages", cfg.ppo.normalize_advantages);
    f.number("kl_stop_threshold", cfg.ppo.kl_stop_threshold);
    f.boolean("anneal_lr", cfg.ppo.anneal_lr);
    f.boolean("objective_weighted_returns", cfg.ppo.objective_weighted_returns);
    f.integer("threads", cfg.ppo.threads);
    f.reject_unknown();
  }

  if (const json* j = top.find("net")) {
    Fields f(*j, origin, "net");
    f.integer("lstm_hidden", cfg.net.lstm_hidden);
    f.integers("actor_hidden", cfg.net.actor_hidden);
    f.integers("critic_hidden", cfg.net.critic_hidden);
    f.number("ln_epsilon", cfg.net.ln_epsilon);
    f.reject_unknown();
  }

  {
    std::vector<std::string> names;
    if (top.strings("baselines", names)) {
      cfg.baselines.clear();
      for (const auto& n : names) {
        try {
          cfg.baselines.push_back(plan_from_string(n));
        } catch (const std::invalid_argument& e) {
          fail(origin, std::string("field 'baselines': ") + e.what());
        }
      }
    }
  }

  if (const json* j = top.find("seeds")) {
    if (!j->is_array()) fail(origin, "field 'seeds' must be an array of integers");
    cfg.seeds.clear();
    for (const auto& e : *j) {
      if (!e.is_number_integer() || (e.is_number_integer() && !e.is_number_unsigned() &&
                                     e.get<long long>() < 0))
        fail(origin, "field 'seeds' must be an array of non-negative integers");
      cfg.seeds.push_back(e.get<std::uint64_t>());
    }
  }

  top.integer("eval_episodes", cfg.eval_episodes);
  top.text("out_dir", cfg.out_dir);
  top.number("split", cfg.split);
  top.text_opt("lifelog", cfg.lifelog);
  top.text_opt("checkpoint", cfg.checkpoint);
  top.boolean("train_inline", cfg.train_inline);

  {
    std::vector<std::string> names;
    if (top.strings("compare_scenarios", names)) {
      for (const auto& n : names) {
        try {
          cfg.compare_scenarios.push_back(scenario_from_string(n));
        } catch (const std::invalid_argument& e) {
          fail(origin, std::string("field 'compare_scenarios': ") + e.what());
        }
      }
    }
  }
  if (cfg.compare_scenarios.empty()) cfg.compare_scenarios = {cfg.scenario.kind};

  if (const json* j = top.find("sweep")) {
    Fields f(*j, origin, "sweep");
    SweepSpec sw;
    f.text("param", sw.param);
    if (sw.param.empty()) fail(origin, "missing required field 'sweep.param'");
    if (sw.param == "budget") sw.param = "B";
    if (!f.numbers("values", sw.values))
      fail(origin, "missing required field 'sweep.values'");
    f.reject_unknown();
    cfg.sweep = std::move(sw);
  }

  top.reject_unknown();

  // The network's interface dimensions always mirror the service instance.
  cfg.net.obs_dim = cfg.service.observation_dim();
  cfg.net.capacity_levels = static_cast<int>(cfg.service.capacity_levels.size());
  cfg.net.n_users = cfg.service.n_users;

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text, path);
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["service"] = {{"alpha1", cfg.service.alpha1},
                  {"alpha2", cfg.service.alpha2},
                  {"budget", cfg.service.budget},
                  {"beta", cfg.service.beta},
                  {"capacity_levels", cfg.service.capacity_levels},
                  {"n_users", cfg.service.n_users},
                  {"horizon", cfg.service.horizon},
                  {"scales",
                   {{"engagement_max", cfg.service.scales.engagement_max},
                    {"health_cap", cfg.service.scales.health_cap},
                    {"extra_max", cfg.service.scales.extra_max}}}};
  j["scenario"] = {{"kind", to_string(cfg.scenario.kind)},
                   {"phase_length", cfg.scenario.phase_length},
                   {"multipliers", cfg.scenario.multipliers}};
  j["coupling"] = {{"target_r", cfg.coupling.target_r}};
  j["ppo"] = {{"clip_epsilon", cfg.ppo.clip_epsilon},
              {"discount", cfg.ppo.discount},
              {"gae_lambda", cfg.ppo.gae_lambda},
              {"epochs_per_batch", cfg.ppo.epochs_per_batch},
              {"minibatch_episodes", cfg.ppo.minibatch_episodes},
              {"rollout_episodes", cfg.ppo.rollout_episodes},
              {"batches", cfg.ppo.batches},
              {"entropy_coef", cfg.ppo.entropy_coef},
              {"actor_lr", cfg.ppo.actor_lr},
              {"critic_lr", cfg.ppo.critic_lr},
              {"vf_coef", cfg.ppo.vf_coef},
              {"normalize_advantages", cfg.ppo.normalize_advantages},
              {"kl_stop_threshold", cfg.ppo.kl_stop_threshold},
              {"anneal_lr", cfg.ppo.anneal_lr},
              {"objective_weighted_returns", cfg.ppo.objective_weighted_returns},
              {"threads", cfg.ppo.threads}};
  j["net"] = {{"lstm_hidden", cfg.net.lstm_hidden},
              {"actor_hidden", cfg.net.actor_hidden},
              {"critic_hidden", cfg.net.critic_hidden},
              {"ln_epsilon", cfg.net.ln_epsilon}};
  json plans = json::array();
  for (PlanKind p : cfg.baselines) plans.push_back(to_string(p));
  j["baselines"] = plans;
  j["seeds"] = cfg.seeds;
  j["eval_episodes"] = cfg.eval_episodes;
  j["out_dir"] = cfg.out_dir;
  j["split"] = cfg.split;
  j["lifelog"] = cfg.lifelog ? json(*cfg.lifelog) : json();
  j["checkpoint"] = cfg.checkpoint ? json(*cfg.checkpoint) : json();
  json scen = json::array();
  for (ScenarioKind k : cfg.compare_scenarios) scen.push_back(to_string(k));
  j["compare_scenarios"] = scen;
  j["train_inline"] = cfg.train_inline;
  if (cfg.sweep)
    j["sweep"] = {{"param", cfg.sweep->param}, {"values", cfg.sweep->values}};
  else
    j["sweep"] = json();
  return j.dump(2) + "\n";
}

// ---- environments and profiles ----

namespace {

std::vector<LifelogRecord> dedupe_last_wins(const std::vector<LifelogRecord>& in,
                                            std::vector<std::string>* notes) {
  std::map<std::pair<std::string, std::string>, std::size_t> last;
  for (std::size_t i = 0; i < in.size(); ++i)
    last[{in[i].participant_id, in[i].date}] = i;
  std::vector<LifelogRecord> out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (last.at({in[i].participant_id, in[i].date}) == i) {
      out.push_back(in[i]);
    } else if (notes) {
      notes->push_back("duplicate record (" + in[i].participant_id + ", " + in[i].date +
                       "): keeping the last occurrence");
    }
  }
  return out;
}

Environment make_env(const RunConfig& cfg, ScenarioKind kind,
                     const std::vector<UserProfile>& profiles) {
  const ScenarioSpec spec = kind == cfg.scenario.kind
                                ? cfg.scenario
                                : ScenarioSpec::standard(kind, cfg.service.horizon);
  auto source = std::make_shared<ScenarioEmulator>(profiles, spec, cfg.coupling);
  return Environment(cfg.service, std::move(source));
}

}  // namespace

std::vector<UserProfile> resolve_profiles(const RunConfig& cfg,
                                          std::vector<std::string>* notes) {
  if (!cfg.lifelog)
    return profiles_for_population({UserProfile::pooled_default()}, cfg.service.n_users);

  IngestResult res = ingest_lifelog(*cfg.lifelog);
  if (notes)
    for (const auto& d : res.diagnostics) notes->push_back(d);
  std::vector<LifelogRecord> kept = dedupe_last_wins(res.records, notes);

  // Leading `split` fraction of each participant's day-ordered records fits
  // the profiles; the rest is held out (reported, not used).
  std::map<std::string, std::vector<LifelogRecord>> groups;
  for (auto& r : kept) groups[r.participant_id].push_back(std::move(r));
  std::vector<LifelogRecord> train;
  for (auto& [id, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const LifelogRecord& a, const LifelogRecord& b) { return a.date < b.date; });
    const int count = static_cast<int>(rows.size());
    int k = std::max(2, static_cast<int>(std::floor(cfg.split * count)));
    k = std::min(k, count);
    train.insert(train.end(), rows.begin(), rows.begin() + k);
    if (notes)
      notes->push_back("participant " + id + ": " + std::to_string(k) + " records fitted, " +
                       std::to_string(count - k) + " held out");
  }

  std::map<std::string, UserProfile> fitted = fit_profiles(train);
  std::vector<UserProfile> list;
  list.reserve(fitted.size());
  for (auto& [id, p] : fitted) list.push_back(p);
  return profiles_for_population(list, cfg.service.n_users);
}

Environment build_environment(const RunConfig& cfg) {
  return build_environment(cfg, cfg.scenario.kind);
}

Environment build_environment(const RunConfig& cfg, ScenarioKind kind) {
  return make_env(cfg, kind, resolve_profiles(cfg, nullptr));
}

// ---- commands ----

namespace {

struct ArtifactSink {
  std::string dir;
  std::vector<std::string> rel_paths;

  std::string full(const std::string& rel) const { return dir + "/" + rel; }

  void write(const std::string& rel, const std::string& content) {
    write_file_atomic(full(rel), content);
    rel_paths.push_back(rel);
  }

  void note_written(const std::string& rel) { rel_paths.push_back(rel); }
};

void write_manifest(const ArtifactSink& sink, const std::string& command,
                    const json& config_echo, const std::vector<std::uint64_t>& seeds,
                    double wall_seconds, const std::vector<std::string>& notes) {
  json m;
  m["format"] = "cocreate-manifest";
  m["version"] = 1;
  m["command"] = command;
  m["config"] = config_echo;
  m["seeds"] = seeds;
  json arts = json::array();
  for (const auto& rel : sink.rel_paths) {
    const std::string bytes = read_file(sink.full(rel));
    arts.push_back({{"path", rel}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }
  m["artifacts"] = arts;
  m["wall_clock_seconds"] = wall_seconds;
  m["toolchain"] = toolchain_id();
  m["notes"] = notes;
  write_file_atomic(sink.full("manifest.json"), m.dump(2) + "\n");
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string curve_csv(const std::vector<TrainCurveRow>& rows) {
  std::ostringstream os;
  os << "batch,mean_objective,actor_loss,critic_loss,entropy,approx_kl\n";
  for (const auto& r : rows)
    os << r.batch << ',' << format_double(r.mean_objective) << ','
       << format_double(r.actor_loss) << ',' << format_double(r.critic_loss) << ','
       << format_double(r.entropy) << ',' << format_double(r.approx_kl) << '\n';
  return os.str();
}

json config_echo(const RunConfig& cfg) { return json::parse(run_config_to_json(cfg)); }

nn::HybridNet load_checkpoint_for(const RunConfig& cfg) {
  nn::HybridNet net = [&] {
    try {
      return nn::load_checkpoint(*cfg.checkpoint);
    } catch (const std::exception& e) {
      throw ConfigError("config: checkpoint '" + *cfg.checkpoint +
                        "' cannot be loaded: " + e.what());
    }
  }();
  const nn::NetConfig& c = net.config();
  if (c.obs_dim != cfg.net.obs_dim || c.capacity_levels != cfg.net.capacity_levels ||
      c.n_users != cfg.net.n_users)
    throw ConfigError(
        "config: checkpoint dimensions (obs " + std::to_string(c.obs_dim) + ", levels " +
        std::to_string(c.capacity_levels) + ", users " + std::to_string(c.n_users) +
        ") do not match the service block (obs " + std::to_string(cfg.net.obs_dim) +
        ", levels " + std::to_string(cfg.net.capacity_levels) + ", users " +
        std::to_string(cfg.net.n_users) + ")");
  return net;
}

int cmd_train(const RunConfig& cfg, const Log& log) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> notes;
  const std::vector<UserProfile> profiles = resolve_profiles(cfg, &notes);
  ArtifactSink sink{cfg.out_dir, {}};

  for (std::uint64_t seed : cfg.seeds) {
    Environment env = make_env(cfg, cfg.scenario.kind, profiles);
    PpoAgent agent(cfg.net, cfg.ppo, seed);
    const std::vector<TrainCurveRow> curve = agent.train(env);

    const std::string curve_rel = "train_curve_seed" + std::to_string(seed) + ".csv";
    sink.write(curve_rel, curve_csv(curve));
    const std::string ck_rel = "checkpoint_seed" + std::to_string(seed) + ".json";
    sink.write(ck_rel, nn::checkpoint_to_json(agent.net()));

    log.info("seed " + std::to_string(seed) + ": " + std::to_string(curve.size()) +
             " batches, final mean objective " +
             format_double(curve.empty() ? 0.0 : curve.back().mean_objective));
  }

  for (const auto& n : notes) log.info(n);
  write_manifest(sink, "train", config_echo(cfg), cfg.seeds, elapsed_seconds(start), notes);
  return kExitOk;
}

int cmd_evaluate(const RunConfig& cfg, const Log& log) {
  const auto start = std::chrono::steady_clock::now();
  if (!cfg.checkpoint)
    throw ConfigError("config: missing required field 'checkpoint' for evaluate");
  nn::HybridNet net = load_checkpoint_for(cfg);

  std::vector<std::string> notes;
  const std::vector<UserProfile> profiles = resolve_profiles(cfg, &notes);
  Environment env = make_env(cfg, cfg.scenario.kind, profiles);
  AgentPolicy policy(&net, /*greedy=*/true, /*seed=*/0);

  const int n = cfg.service.n_users;
  const int S = static_cast<int>(cfg.seeds.size());
  std::vector<double> totals(n, 0.0);
  double mean_objective = 0.0;
  for (std::uint64_t seed : cfg.seeds) {
    EvalResult r = evaluate_policy(policy, env, cfg.eval_episodes, seed);
    for (int i = 0; i < n; ++i) totals[i] += r.per_user_mean_total[i] / S;
    mean_objective += r.mean_objective / S;
  }

  std::ostringstream os;
  os << "user_id,mean_total\n";
  double aggregate = 0.0;
  for (int i = 0; i < n; ++i) {
    os << (i + 1) << ',' << format_double(totals[i]) << '\n';
    aggregate += totals[i];
  }
  os << "aggregate," << format_double(aggregate) << '\n';

  ArtifactSink sink{cfg.out_dir, {}};
  sink.write("evaluate_totals.csv", os.str());
  log.info("mean total reward " + format_double(aggregate) + ", mean objective " +
           format_double(mean_objective));
  write_manifest(sink, "evaluate", config_echo(cfg), cfg.seeds, elapsed_seconds(start), notes);
  return kExitOk;
}

int cmd_compare(const RunConfig& cfg, const Log& log) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> notes;
  const std::vector<UserProfile> profiles = resolve_profiles(cfg, &notes);
  ArtifactSink sink{cfg.out_dir, {}};

  nn::HybridNet net = [&] {
    if (cfg.checkpoint) return load_checkpoint_for(cfg);
    if (!cfg.train_inline)
      throw ConfigError(
          "config: missing required field 'checkpoint' for compare "
          "(or set 'train_inline': true)");
    log.info("no checkpoint given; training inline with seed " +
             std::to_string(cfg.seeds.front()));
    Environment env = make_env(cfg, cfg.scenario.kind, profiles);
    PpoAgent agent(cfg.net, cfg.ppo, cfg.seeds.front());
    agent.train(env);
    sink.write("checkpoint_inline.json", nn::checkpoint_to_json(agent.net()));
    return agent.net();
  }();

  json summary;
  summary["format"] = "cocreate-compare-summary";
  summary["version"] = 1;
  json blocks = json::array();

  for (ScenarioKind kind : cfg.compare_scenarios) {
    Environment env = make_env(cfg, kind, profiles);
    AgentPolicy adaptive(&net, /*greedy=*/true, /*seed=*/0);
    std::vector<std::unique_ptr<FixedPlanPolicy>> plans;
    std::vector<std::pair<std::string, Policy*>> entries{{"adaptive", &adaptive}};
    for (PlanKind p : cfg.baselines) {
      plans.push_back(std::make_unique<FixedPlanPolicy>(FixedPlanSpec{p, std::nullopt}, 0));
      entries.emplace_back(to_string(p), plans.back().get());
    }

    const PolicyComparison comp = compare_policies(entries, env, cfg.seeds, cfg.eval_episodes);

    std::ostringstream os;
    os << "user_id,adaptive";
    for (std::size_t k = 1; k < comp.names.size(); ++k)
      os << ',' << comp.names[k] << ',' << comp.names[k] << "_impr_pct";
    os << '\n';
    for (int i = 0; i < cfg.service.n_users; ++i) {
      os << (i + 1) << ',' << format_double(comp.per_user_totals[0][i]);
      for (std::size_t k = 1; k < comp.names.size(); ++k)
        os << ',' << format_double(comp.per_user_totals[k][i]) << ','
           << format_double(comp.per_user_improvement_pct[k - 1][i]);
      os << '\n';
    }
    os << "aggregate," << format_double(comp.mean_objective[0]);
    for (std::size_t k = 1; k < comp.names.size(); ++k)
      os << ',' << format_double(comp.mean_objective[k]) << ','
         << format_double(comp.aggregate_improvement_pct[k - 1]);
    os << '\n';
    sink.write("compare_" + to_string(kind) + ".csv", os.str());

    json block;
    block["scenario"] = to_string(kind);
    json per_policy = json::array();
    for (std::size_t k = 0; k < comp.names.size(); ++k) {
      per_policy.push_back({{"name", comp.names[k]},
                            {"mean_objective", comp.mean_objective[k]},
                            {"objective_std", comp.objective_std[k]},
                            {"mean_total_reward", comp.mean_total_reward[k]}});
    }
    block["policies"] = per_policy;
    json impr = json::object();
    for (std::size_t k = 1; k < comp.names.size(); ++k)
      impr[comp.names[k]] = comp.aggregate_improvement_pct[k - 1];
    block["aggregate_improvement_pct"] = impr;
    blocks.push_back(block);

    std::ostringstream msg;
    msg << to_string(kind) << ": adaptive " << format_double(comp.mean_objective[0]);
    for (std::size_t k = 1; k < comp.names.size(); ++k)
      msg << ", vs " << comp.names[k] << " "
          << format_double(comp.aggregate_improvement_pct[k - 1]) << "%";
    log.info(msg.str());
  }

  summary["scenarios"] = blocks;
  sink.write("compare_summary.json", summary.dump(2) + "\n");
  write_manifest(sink, "compare", config_echo(cfg), cfg.seeds, elapsed_seconds(start), notes);
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const Log& log) {
  const auto start = std::chrono::steady_clock::now();
  if (!cfg.sweep) throw ConfigError("config: missing required field 'sweep' for sweep");
  std::vector<std::string> notes;
  const std::vector<UserProfile> profiles = resolve_profiles(cfg, &notes);

  std::ostringstream os;
  os << "param,value,seed,mean_total_reward\n";
  for (double value : cfg.sweep->values) {
    RunConfig point = cfg;
    if (cfg.sweep->param == "alpha1") point.service.alpha1 = value;
    else if (cfg.sweep->param == "alpha2") point.service.alpha2 = value;
    else if (cfg.sweep->param == "B") point.service.budget = value;
    else point.service.beta = value;

    try {
      point.service.validate();
    } catch (const std::invalid_argument& e) {
      const std::string msg = "sweep: skipped " + cfg.sweep->param + "=" +
                              format_double(value) + " (" + e.what() + ")";
      log.warn(msg);
      notes.push_back(msg);
      continue;
    }

    for (std::uint64_t seed : cfg.seeds) {
      Environment env = make_env(point, point.scenario.kind, profiles);
      PpoAgent agent(point.net, point.ppo, seed);
      agent.train(env);
      EvalResult r = agent.evaluate(env, point.eval_episodes, seed);
      os << cfg.sweep->param << ',' << format_double(value) << ',' << seed << ','
         << format_double(r.mean_total_reward) << '\n';
      log.info("sweep " + cfg.sweep->param + "=" + format_double(value) + " seed " +
               std::to_string(seed) + ": mean total reward " +
               format_double(r.mean_total_reward));
    }
  }

  ArtifactSink sink{cfg.out_dir, {}};
  sink.write("sweep_results.csv", os.str());
  write_manifest(sink, "sweep", config_echo(cfg), cfg.seeds, elapsed_seconds(start), notes);
  return kExitOk;
}

int cmd_ingest(const std::string& csv_path, const std::string& out_dir, const Log& log) {
  const auto start = std::chrono::steady_clock::now();
  IngestResult res = ingest_lifelog(csv_path);

  std::vector<std::string> notes;
  for (const auto& d : res.diagnostics) {
    log.warn(d);
    notes.push_back(d);
  }
  std::vector<LifelogRecord> kept = dedupe_last_wins(res.records, &notes);
  for (std::size_t i = res.diagnostics.size(); i < notes.size(); ++i) log.warn(notes[i]);
  if (kept.empty()) throw std::runtime_error(csv_path + ": no data rows");

  const std::map<std::string, UserProfile> fitted = fit_profiles(kept);

  std::map<std::string, std::vector<const LifelogRecord*>> groups;
  for (const auto& r : kept) groups[r.participant_id].push_back(&r);

  json pj;
  pj["format"] = "cocreate-profiles";
  pj["version"] = 1;
  json profiles = json::object();
  for (const auto& [id, p] : fitted) {
    profiles[id] = {{"readiness_mean", p.readiness_mean},
                    {"readiness_std", p.readiness_std},
                    {"calories_mean", p.calories_mean},
                    {"calories_std", p.calories_std},
                    {"fatigue_mean", p.fatigue_mean},
                    {"fatigue_std", p.fatigue_std},
                    {"mood_mean", p.mood_mean},
                    {"mood_std", p.mood_std},
                    {"srpe_mean", p.srpe_mean},
                    {"srpe_std", p.srpe_std},
                    {"records", groups.at(id).size()}};
  }
  pj["profiles"] = profiles;

  // Correlation rows: per participant and pooled, readiness against each
  // channel over the records where both are present.
  std::ostringstream cs;
  cs << "participant_id,channel,pearson_r,n\n";
  auto emit = [&](const std::string& label, const std::vector<const LifelogRecord*>& rows) {
    for (int ch = 0; ch < kNumExtraChannels; ++ch) {
      std::vector<double> a, b;
      for (const LifelogRecord* r : rows) {
        const auto v = r->channel(ch);
        if (r->readiness && v) {
          a.push_back(*r->readiness);
          b.push_back(*v);
        }
      }
      try {
        const double r = pearson_correlation(a, b);
        cs << label << ',' << kExtraChannelNames[ch] << ',' << format_double(r) << ','
           << a.size() << '\n';
      } catch (const std::exception& e) {
        const std::string msg = "correlation " + label + "/" + kExtraChannelNames[ch] +
                                " skipped: " + e.what();
        log.warn(msg);
        notes.push_back(msg);
      }
    }
  };
  for (const auto& [id, rows] : groups) emit(id, rows);
  std::vector<const LifelogRecord*> all;
  for (const auto& r : kept) all.push_back(&r);
  emit("all", all);

  ArtifactSink sink{out_dir, {}};
  sink.write("profiles.json", pj.dump(2) + "\n");
  sink.write("correlations.csv", cs.str());
  log.info("fitted " + std::to_string(fitted.size()) + " profiles from " +
           std::to_string(kept.size()) + " records");
  write_manifest(sink, "ingest", json{{"lifelog", csv_path}, {"out_dir", out_dir}}, {},
                 elapsed_seconds(start), notes);
  return kExitOk;
}

}  // namespace

// ---- CLI ----

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"value co-creation service simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool quiet = false;
  std::string csv_path;

  CLI::Option* seed_opt = nullptr;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config)
      sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    seed_opt = sub->add_option("--seed", seed_override, "replace the config's seed list");
    sub->add_option("--out", out_override, "output directory override");
    sub->add_flag("--quiet", quiet, "suppress info logging (warnings stay)");
  };

  CLI::App* train = app.add_subcommand("train", "train the adaptive policy");
  add_common(train, true);
  CLI::Option* train_seed = seed_opt;
  CLI::App* evaluate = app.add_subcommand("evaluate", "per-user totals for a checkpoint");
  add_common(evaluate, true);
  CLI::Option* evaluate_seed = seed_opt;
  CLI::App* compare = app.add_subcommand("compare", "adaptive policy vs fixed plans");
  add_common(compare, true);
  CLI::Option* compare_seed = seed_opt;
  CLI::App* sweep = app.add_subcommand("sweep", "parameter sensitivity sweep");
  add_common(sweep, true);
  CLI::Option* sweep_seed = seed_opt;
  CLI::App* ingest = app.add_subcommand("ingest", "fit profiles from a lifelog CSV");
  ingest->add_option("csv", csv_path, "lifelog CSV file")->required();
  add_common(ingest, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  const Log log{quiet};
  try {
    if (ingest->parsed())
      return cmd_ingest(csv_path, out_override.empty() ? "runs" : out_override, log);

    RunConfig cfg = load_run_config(config_path);
    CLI::Option* used_seed = train->parsed()      ? train_seed
                             : evaluate->parsed() ? evaluate_seed
                             : compare->parsed()  ? compare_seed
                                                  : sweep_seed;
    if (used_seed && used_seed->count()) cfg.seeds = {seed_override};
    if (!out_override.empty()) cfg.out_dir = out_override;

    if (const char* cap_text = std::getenv("COCREATE_SIM_THREADS")) {
      char* end = nullptr;
      const long cap = std::strtol(cap_text, &end, 10);
      if (end && *end == '\0' && cap >= 1)
        cfg.ppo.threads = std::min<int>(cfg.ppo.threads, static_cast<int>(cap));
      else
        log.warn(std::string("ignoring unparsable COCREATE_SIM_THREADS='") + cap_text + "'");
    }
    cfg.validate();

    if (train->parsed()) return cmd_train(cfg, log);
    if (evaluate->parsed()) return cmd_evaluate(cfg, log);
    if (compare->parsed()) return cmd_compare(cfg, log);
    return cmd_sweep(cfg, log);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace cocreate
