#include "cocreate/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cocreate {

std::string to_string(PlanKind k) {
  switch (k) {
    case PlanKind::Plan1: return "plan1";
    case PlanKind::Plan2: return "plan2";
    case PlanKind::Plan3: return "plan3";
    case PlanKind::Random: return "random";
  }
  return "plan?";
}

PlanKind plan_from_string(const std::string& s) {
  if (s == "plan1") return PlanKind::Plan1;
  if (s == "plan2") return PlanKind::Plan2;
  if (s == "plan3") return PlanKind::Plan3;
  if (s == "random") return PlanKind::Random;
  throw std::invalid_argument("unknown plan '" + s + "' (expected plan1|plan2|plan3|random)");
}

void FixedPlanSpec::validate(const ServiceParams& params) const {
  if (constant_level) {
    if (plan != PlanKind::Plan1 && plan != PlanKind::Plan3)
      throw std::invalid_argument("constant_level override applies only to plan1/plan3");
    if (*constant_level < 0 ||
        *constant_level >= static_cast<int>(params.capacity_levels.size()))
      throw std::invalid_argument("constant_level override out of range");
  }
}

int constant_plan_level(const ServiceParams& params) {
  const double target = params.budget / (params.beta * params.horizon);
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(params.capacity_levels.size()); ++i) {
    const double level = params.capacity_levels[i];
    // Only levels sustainable for the whole horizon qualify as constant.
    if (params.beta * level * params.horizon > params.budget + 1e-9) continue;
    const double d = std::abs(level - target);
    if (d < best_dist - 1e-12 ||
        (std::abs(d - best_dist) <= 1e-12 && level > params.capacity_levels[best])) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

Action fixed_plan_action(const FixedPlanSpec& spec, const Environment& env, Rng* rng) {
  const ServiceParams& p = env.params();
  Action a;
  a.provision.assign(p.n_users, 1);

  switch (spec.plan) {
    case PlanKind::Plan1:
    case PlanKind::Plan3: {
      const int level = spec.constant_level ? *spec.constant_level : constant_plan_level(p);
      // The constant rule never overdraws by construction; the clamp covers
      // overrides and non-default budgets.
      a.capacity_index = std::min(level, env.largest_feasible_level());
      break;
    }
    case PlanKind::Plan2: {
      const EnvState& s = env.state();
      const int remaining = p.horizon - s.t;
      const double allowance = s.balance / static_cast<double>(remaining);
      int level = 0;
      for (int i = 0; i < static_cast<int>(p.capacity_levels.size()); ++i)
        if (p.beta * p.capacity_levels[i] <= allowance + 1e-9) level = i;
      a.capacity_index = std::min(level, env.largest_feasible_level());
      break;
    }
    case PlanKind::Random: {
      if (!rng) throw std::invalid_argument("random plan needs an rng");
      std::vector<int> feasible;
      for (int i = 0; i < static_cast<int>(p.capacity_levels.size()); ++i)
        if (env.level_feasible(i)) feasible.push_back(i);
      a.capacity_index = feasible[rng->uniform_int(static_cast<int>(feasible.size()))];
      for (int i = 0; i < p.n_users; ++i) a.provision[i] = rng->bernoulli(0.5) ? 1 : 0;
      break;
    }
  }
  return a;
}

FixedPlanPolicy::FixedPlanPolicy(FixedPlanSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), rng_(mix_seed(seed, 0xF1A2ULL)) {}

void FixedPlanPolicy::begin_episode(std::uint64_t episode_seed) {
  if (spec_.plan == PlanKind::Random) rng_ = Rng(mix_seed(episode_seed, 0xF1A2ULL));
}

Action FixedPlanPolicy::act(const Environment& env) {
  return fixed_plan_action(spec_, env, &rng_);
}

// ---- exact small-instance optimizer ----

double oracle_step_reward(const ServiceParams& params, double capacity,
                          const std::vector<std::uint8_t>& provision,
                          const std::vector<double>& engagement) {
  int provided = 0;
  for (auto y : provision) provided += y ? 1 : 0;
  const double q = perceived_quality(capacity, provided);
  double r = 0.0;
  for (std::size_t i = 0; i < provision.size(); ++i)
    r += health_increment(engagement[i], provision[i] != 0, q, params);
  return r;
}

namespace {

// Both exact solvers compose values through this one function so the float
// grouping (and any FMA contraction) is identical between them.
[[gnu::noinline]] double compose_value(double weight, double step_reward, double tail) {
  return weight * step_reward + tail;
}

void check_schedule(const ServiceParams& params,
                    const std::vector<std::vector<double>>& schedule) {
  if (static_cast<int>(schedule.size()) != params.horizon)
    throw std::invalid_argument("engagement schedule must have one row per step");
  for (const auto& row : schedule)
    if (static_cast<int>(row.size()) != params.n_users)
      throw std::invalid_argument("engagement schedule row width must equal n_users");
}

struct TailSolution {
  double value = 0.0;
  std::vector<Action> actions;  // steps t..T-1
};

// Full enumeration of the tail from step t.  Values compose as
// w * step_reward + tail_value, the same right fold the DP uses, so the two
// solvers agree bitwise on integer-level instances.
TailSolution exhaustive_tail(const ServiceParams& p,
                             const std::vector<std::vector<double>>& x, int t,
                             double balance) {
  TailSolution best;
  if (t == p.horizon) return best;
  best.value = -std::numeric_limits<double>::infinity();

  const int n = p.n_users;
  const int m = static_cast<int>(p.capacity_levels.size());
  const double w = static_cast<double>(p.horizon - t);
  std::vector<std::uint8_t> mask(n, 0);

  for (int ci = 0; ci < m; ++ci) {
    const double cost = p.beta * p.capacity_levels[ci];
    if (cost > balance + 1e-9) continue;
    const double next_balance = std::max(0.0, balance - cost);
    TailSolution tail = exhaustive_tail(p, x, t + 1, next_balance);
    // The tail does not depend on the provision mask, so enumerate masks
    // against the one recursive solve per capacity level.
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
      for (int i = 0; i < n; ++i) mask[i] = static_cast<std::uint8_t>((bits >> i) & 1u);
      const double value = compose_value(
          w, oracle_step_reward(p, p.capacity_levels[ci], mask, x[t]), tail.value);
      if (value > best.value) {
        best.value = value;
        best.actions.clear();
        best.actions.push_back(Action{ci, mask});
        best.actions.insert(best.actions.end(), tail.actions.begin(), tail.actions.end());
      }
    }
  }
  if (!std::isfinite(best.value))
    throw std::logic_error("exhaustive search found no feasible action (level 0 missing?)");
  return best;
}

}  // namespace

OptimalSolution exhaustive_optimal(const ServiceParams& params,
                                   const std::vector<std::vector<double>>& schedule) {
  params.validate();
  check_schedule(params, schedule);
  const int n = params.n_users;
  const int m = static_cast<int>(params.capacity_levels.size());
  if (n > 20) throw std::invalid_argument("exhaustive search: too many users");
  const double log_total =
      params.horizon * std::log10(static_cast<double>(m) * std::pow(2.0, n));
  if (log_total > 7.0)
    throw std::invalid_argument("exhaustive search: instance too large ((m*2^n)^T > 1e7)");

  TailSolution best = exhaustive_tail(params, schedule, 0, params.budget);
  return OptimalSolution{best.value, std::move(best.actions)};
}

OptimalSolution dp_optimal(const ServiceParams& params,
                           const std::vector<std::vector<double>>& schedule) {
  params.validate();
  check_schedule(params, schedule);
  const int n = params.n_users;
  const int m = static_cast<int>(params.capacity_levels.size());
  const int T = params.horizon;

  std::vector<int> int_levels(m);
  for (int i = 0; i < m; ++i) {
    const double v = params.capacity_levels[i];
    if (std::floor(v) != v || v < 0)
      throw std::invalid_argument("dp search needs non-negative integer capacity levels");
    int_levels[i] = static_cast<int>(v);
  }

  // Feasibility of a whole sequence only depends on the total units bought:
  // beta * (sum of levels) <= budget within the environment's tolerance.
  const long long max_units_ll =
      static_cast<long long>(std::floor((params.budget + 1e-9) / params.beta));
  if (max_units_ll < 0) throw std::invalid_argument("budget does not cover level 0");
  if (max_units_ll > 200000) throw std::invalid_argument("dp search: budget grid too large");
  const int U = static_cast<int>(max_units_ll);

  // Per step: users sorted by engagement descending (ties by index), and the
  // exact step reward for every (level, provided-count) pair.  For a fixed
  // count the best mask is the top engagers, since each provided user
  // contributes engagement^alpha1 * quality^alpha2 with a shared quality.
  std::vector<std::vector<int>> order(T);
  std::vector<std::vector<std::vector<double>>> reward(T);
  std::vector<std::uint8_t> mask(n);
  for (int t = 0; t < T; ++t) {
    order[t].resize(n);
    std::iota(order[t].begin(), order[t].end(), 0);
    std::stable_sort(order[t].begin(), order[t].end(),
                     [&](int a, int b) { return schedule[t][a] > schedule[t][b]; });
    reward[t].assign(m, std::vector<double>(n + 1, 0.0));
    for (int ci = 0; ci < m; ++ci) {
      std::fill(mask.begin(), mask.end(), 0);
      reward[t][ci][0] =
          oracle_step_reward(params, params.capacity_levels[ci], mask, schedule[t]);
      for (int z = 1; z <= n; ++z) {
        mask[order[t][z - 1]] = 1;
        reward[t][ci][z] =
            oracle_step_reward(params, params.capacity_levels[ci], mask, schedule[t]);
      }
    }
  }

  // value[u] holds the best tail value from the current step with u cost
  // units left; choice[t][u] the winning (level index, provided count).
  std::vector<double> value(U + 1, 0.0), next(U + 1, 0.0);
  std::vector<std::vector<std::pair<int, int>>> choice(
      T, std::vector<std::pair<int, int>>(U + 1, {0, 0}));
  for (int t = T - 1; t >= 0; --t) {
    const double w = static_cast<double>(T - t);
    for (int u = 0; u <= U; ++u) {
      double best = -std::numeric_limits<double>::infinity();
      std::pair<int, int> arg{0, 0};
      for (int ci = 0; ci < m; ++ci) {
        if (int_levels[ci] > u) continue;
        const double tail = next[u - int_levels[ci]];
        for (int z = 0; z <= n; ++z) {
          const double v = compose_value(w, reward[t][ci][z], tail);
          if (v > best) {
            best = v;
            arg = {ci, z};
          }
        }
      }
      value[u] = best;
      choice[t][u] = arg;
    }
    std::swap(value, next);
  }

  OptimalSolution out;
  out.value = next[U];
  int u = U;
  for (int t = 0; t < T; ++t) {
    const auto [ci, z] = choice[t][u];
    Action a;
    a.capacity_index = ci;
    a.provision.assign(n, 0);
    for (int j = 0; j < z; ++j) a.provision[order[t][j]] = 1;
    out.actions.push_back(std::move(a));
    u -= int_levels[ci];
  }
  return out;
}

OptimalSolution enumerate_optimal(const ServiceParams& params,
                                  const std::vector<std::vector<double>>& schedule) {
  const int m = static_cast<int>(params.capacity_levels.size());
  const double log_total =
      params.horizon * std::log10(static_cast<double>(m) * std::pow(2.0, params.n_users));
  if (params.n_users <= 20 && log_total <= 7.0) return exhaustive_optimal(params, schedule);

  bool integral = true;
  for (double v : params.capacity_levels)
    if (std::floor(v) != v || v < 0) integral = false;
  if (integral) return dp_optimal(params, schedule);
  throw std::invalid_argument(
      "instance too large for exhaustive search and levels not integral for dp");
}

// ---- policy comparison ----

PolicyComparison compare_policies(const std::vector<std::pair<std::string, Policy*>>& policies,
                                  Environment& env, const std::vector<std::uint64_t>& seeds,
                                  int episodes) {
  if (policies.empty()) throw std::invalid_argument("compare_policies: no policies");
  if (seeds.empty()) throw std::invalid_argument("compare_policies: no seeds");
  if (episodes <= 0) throw std::invalid_argument("compare_policies: episodes must be positive");

  const int P = static_cast<int>(policies.size());
  const int S = static_cast<int>(seeds.size());
  const int n = env.params().n_users;

  PolicyComparison out;
  out.names.reserve(P);
  out.per_user_totals.assign(P, std::vector<double>(n, 0.0));
  out.mean_objective.assign(P, 0.0);
  out.objective_std.assign(P, 0.0);
  out.mean_total_reward.assign(P, 0.0);

  std::vector<std::vector<double>> objective_by_seed(P, std::vector<double>(S, 0.0));
  for (int k = 0; k < P; ++k) {
    out.names.push_back(policies[k].first);
    for (int s = 0; s < S; ++s) {
      // The same seed drives the same episode stream for every policy, so
      // comparisons are paired.
      EvalResult r = evaluate_policy(*policies[k].second, env, episodes, seeds[s]);
      for (int i = 0; i < n; ++i) out.per_user_totals[k][i] += r.per_user_mean_total[i] / S;
      out.mean_objective[k] += r.mean_objective / S;
      out.mean_total_reward[k] += r.mean_total_reward / S;
      objective_by_seed[k][s] = r.mean_objective;
    }
    if (S > 1) {
      double acc = 0.0;
      for (int s = 0; s < S; ++s) {
        const double d = objective_by_seed[k][s] - out.mean_objective[k];
        acc += d * d;
      }
      out.objective_std[k] = std::sqrt(acc / (S - 1));
    }
  }

  auto pct = [](double adaptive, double baseline) {
    if (baseline == 0.0)
      return adaptive == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return improvement_percent(adaptive, baseline);
  };
  for (int k = 1; k < P; ++k) {
    std::vector<double> row(n, 0.0);
    for (int i = 0; i < n; ++i)
      row[i] = pct(out.per_user_totals[0][i], out.per_user_totals[k][i]);
    out.per_user_improvement_pct.push_back(std::move(row));
    out.aggregate_improvement_pct.push_back(pct(out.mean_objective[0], out.mean_objective[k]));
  }
  return out;
}

}  // namespace cocreate
