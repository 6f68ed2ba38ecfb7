#include "cocreate/env.hpp"

#include <algorithm>
#include <cmath>

namespace cocreate {

namespace {
constexpr double kBudgetTol = 1e-9;
}

void ServiceParams::validate() const {
  if (!(alpha1 > 0.0 && alpha1 < 1.0))
    throw std::invalid_argument("service.alpha1 must be in (0, 1)");
  if (!(alpha2 > 0.0 && alpha2 < 1.0))
    throw std::invalid_argument("service.alpha2 must be in (0, 1)");
  if (!(alpha1 + alpha2 < 1.0))
    throw std::invalid_argument("service.alpha1 + service.alpha2 must be below 1 (diminishing returns)");
  if (!(budget >= 0.0) || !std::isfinite(budget))
    throw std::invalid_argument("service.budget must be a finite non-negative number");
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("service.beta must be a finite positive number");
  if (n_users < 1) throw std::invalid_argument("service.n_users must be at least 1");
  if (horizon < 1) throw std::invalid_argument("service.horizon must be at least 1");
  if (extra_channels < 0)
    throw std::invalid_argument("service.extra_channels must be non-negative");
  if (capacity_levels.empty())
    throw std::invalid_argument("service.capacity_levels must be non-empty");
  if (!std::is_sorted(capacity_levels.begin(), capacity_levels.end()))
    throw std::invalid_argument("service.capacity_levels must be sorted ascending");
  if (capacity_levels.front() != 0.0)
    throw std::invalid_argument("service.capacity_levels must start at 0 (the idle level)");
  for (std::size_t i = 1; i < capacity_levels.size(); ++i)
    if (capacity_levels[i] == capacity_levels[i - 1])
      throw std::invalid_argument("service.capacity_levels must be strictly increasing");
  if (static_cast<int>(scales.extra_max.size()) != extra_channels)
    throw std::invalid_argument(
        "service.scales.extra_max must list one scale per extra channel");
  for (double s : scales.extra_max)
    if (!(s > 0.0)) throw std::invalid_argument("service.scales.extra_max entries must be positive");
  if (!(scales.engagement_max > 0.0))
    throw std::invalid_argument("service.scales.engagement_max must be positive");
  if (!(scales.health_cap > 0.0))
    throw std::invalid_argument("service.scales.health_cap must be positive");
}

double perceived_quality(double capacity, int provided_count) {
  if (provided_count <= 0) return 0.0;  // no one to perceive it
  return capacity / static_cast<double>(provided_count);
}

double health_increment(double engagement, bool provided, double quality,
                        const ServiceParams& p) {
  if (!provided) return 0.0;
  // pow(0, a) == 0 for a > 0, so zero effort or zero quality contribute 0.
  return std::pow(engagement, p.alpha1) * std::pow(quality, p.alpha2);
}

double budget_update(double balance, double capacity, double beta) {
  double charge = beta * capacity;
  if (charge > balance + kBudgetTol)
    throw InfeasibleAction("capacity charge " + std::to_string(charge) +
                           " exceeds remaining balance " + std::to_string(balance));
  double next = balance - charge;
  return next < 0.0 ? 0.0 : next;  // only reachable within the tolerance
}

double episode_objective(const std::vector<double>& total_health_per_step) {
  double s = 0.0;
  for (double h : total_health_per_step) s += h;
  return s;
}

double episode_objective_from_rewards(const std::vector<double>& rewards) {
  // H(0) = 0, so sum_t sum_i H_i(t) telescopes to sum_t (T - t) * r_t with
  // steps indexed from 0.
  double s = 0.0;
  const double T = static_cast<double>(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t)
    s += (T - static_cast<double>(t)) * rewards[t];
  return s;
}

Environment::Environment(ServiceParams params, std::shared_ptr<const EngagementSource> source)
    : params_(std::move(params)), source_(std::move(source)) {
  params_.validate();
  if (!source_) throw std::invalid_argument("engagement source must not be null");
  if (source_->extra_channels() != params_.extra_channels)
    throw std::invalid_argument("engagement source provides " +
                                std::to_string(source_->extra_channels()) +
                                " extra channels, service expects " +
                                std::to_string(params_.extra_channels));
}

void Environment::draw_exogenous(int t) {
  source_->sample(t, params_.n_users, rng_, std::span<double>(state_.engagement),
                  std::span<double>(state_.extras));
  for (double x : state_.engagement)
    if (!(x >= 0.0) || !std::isfinite(x))
      throw std::runtime_error("engagement source produced a negative or non-finite value");
}

const EnvState& Environment::reset(std::uint64_t seed) {
  rng_ = Rng(mix_seed(seed, 0x5eedULL));
  state_ = EnvState{};
  state_.t = 0;
  state_.balance = params_.budget;
  state_.engagement.assign(params_.n_users, 0.0);
  state_.health.assign(params_.n_users, 0.0);
  state_.extras.assign(static_cast<std::size_t>(params_.extra_channels) * params_.n_users, 0.0);
  draw_exogenous(0);
  state_.budget_exhausted = largest_feasible_level() == 0 && params_.capacity_levels.size() > 1;
  initialized_ = true;
  return state_;
}

bool Environment::level_feasible(int index) const {
  if (index < 0 || index >= static_cast<int>(params_.capacity_levels.size())) return false;
  return params_.beta * params_.capacity_levels[index] <= state_.balance + kBudgetTol;
}

std::vector<std::uint8_t> Environment::feasible_levels() const {
  std::vector<std::uint8_t> mask(params_.capacity_levels.size());
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = level_feasible(static_cast<int>(i)) ? 1 : 0;
  return mask;
}

int Environment::largest_feasible_level() const {
  for (int i = static_cast<int>(params_.capacity_levels.size()) - 1; i >= 0; --i)
    if (level_feasible(i)) return i;
  return 0;  // level 0 costs nothing, always feasible
}

StepOutcome Environment::step(const Action& action) {
  if (!initialized_) throw std::logic_error("step() before reset()");
  if (done()) throw InfeasibleAction("episode already finished (t == horizon)");
  if (static_cast<int>(action.provision.size()) != params_.n_users)
    throw InfeasibleAction("provision mask has size " + std::to_string(action.provision.size()) +
                           ", expected " + std::to_string(params_.n_users));
  if (action.capacity_index < 0 ||
      action.capacity_index >= static_cast<int>(params_.capacity_levels.size()))
    throw InfeasibleAction("capacity index " + std::to_string(action.capacity_index) +
                           " out of range");
  const double capacity = params_.capacity_levels[action.capacity_index];

  int provided = 0;
  for (auto y : action.provision) provided += y ? 1 : 0;
  const double quality = perceived_quality(capacity, provided);

  StepOutcome out;
  out.increments.resize(params_.n_users);
  double reward = 0.0;
  for (int i = 0; i < params_.n_users; ++i) {
    double inc = health_increment(state_.engagement[i], action.provision[i] != 0, quality, params_);
    out.increments[i] = inc;
    state_.health[i] += inc;
    reward += inc;
  }
  state_.balance = budget_update(state_.balance, capacity, params_.beta);
  state_.t += 1;

  // Exogenous draw for the next decision point; the terminal state keeps the
  // last draw (it is never acted upon).
  if (state_.t < params_.horizon) draw_exogenous(state_.t);
  state_.budget_exhausted = largest_feasible_level() == 0 && params_.capacity_levels.size() > 1;

  out.state = state_;
  out.reward = reward;
  out.done = done();
  return out;
}

std::vector<double> Environment::encode_observation(const EnvState& s) const {
  std::vector<double> obs;
  obs.reserve(params_.observation_dim());
  obs.push_back(s.balance / (params_.budget > 0.0 ? params_.budget : 1.0));
  obs.push_back(static_cast<double>(s.t) / static_cast<double>(params_.horizon));
  for (int i = 0; i < params_.n_users; ++i)
    obs.push_back(s.engagement[i] / params_.scales.engagement_max);
  for (int i = 0; i < params_.n_users; ++i)
    obs.push_back(s.health[i] / params_.scales.health_cap);
  // Extras are stored channel-major but encoded user-major so that each
  // user's block is contiguous.
  for (int i = 0; i < params_.n_users; ++i)
    for (int c = 0; c < params_.extra_channels; ++c)
      obs.push_back(s.extras[static_cast<std::size_t>(c) * params_.n_users + i] /
                    params_.scales.extra_max[c]);
  return obs;
}

}  // namespace cocreate
