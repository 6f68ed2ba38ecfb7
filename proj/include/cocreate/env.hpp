#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cocreate/rng.hpp"

namespace cocreate {

// Thrown by Environment::step when the requested action cannot be paid for
// or the episode is already finished.
struct InfeasibleAction : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed per-channel scales used to map raw state onto roughly [0, 1] for the
// network input.  Raw units stay untouched inside the environment itself.
struct ObservationScales {
  double engagement_max = 10.0;
  double health_cap = 50.0;              // soft cap; encoded health may exceed 1
  std::vector<double> extra_max = {12000.0, 5.0, 5.0, 1800.0};
};

// Static description of one service instance: value-creation exponents,
// budget, unit cost, capacity menu and population size.
struct ServiceParams {
  double alpha1 = 0.5;   // engagement exponent, in (0, 1)
  double alpha2 = 0.4;   // quality exponent, in (0, 1); alpha1 + alpha2 < 1
  double budget = 100.0;
  double beta = 0.9;     // cost per unit of capacity per step
  std::vector<double> capacity_levels = default_levels();  // sorted, includes 0
  int n_users = 16;
  int horizon = 30;
  int extra_channels = 4;  // exogenous indicator channels alongside engagement
  ObservationScales scales;

  static std::vector<double> default_levels() {
    std::vector<double> v(16);
    for (int i = 0; i < 16; ++i) v[i] = static_cast<double>(i);
    return v;
  }

  int observation_dim() const { return 2 + (2 + extra_channels) * n_users; }

  // Throws std::invalid_argument with a field-specific message.
  void validate() const;
};

// One decision: a capacity level index plus a per-user provision mask.
struct Action {
  int capacity_index = 0;
  std::vector<std::uint8_t> provision;  // size n_users, 1 = provide
};

// Full simulator state.  engagement/extras refer to the current step's
// exogenous draw; health accumulates over the episode.
struct EnvState {
  int t = 0;
  double balance = 0.0;
  std::vector<double> engagement;  // x_i >= 0, size n
  std::vector<double> health;      // H_i, size n
  std::vector<double> extras;      // channel-major, size extra_channels * n
  bool budget_exhausted = false;   // no positive capacity level affordable

  double total_health() const {
    double s = 0.0;
    for (double h : health) s += h;
    return s;
  }
};

struct StepOutcome {
  EnvState state;   // state after the transition
  double reward;    // sum of per-user health increments this step
  bool done;
  std::vector<double> increments;  // per-user health gain, size n
};

// Source of the exogenous per-step draws (engagement plus extra channels).
// Implementations: the scenario emulator in behavior.hpp, and a fixed
// schedule for exact tests and the enumeration oracle.
class EngagementSource {
 public:
  virtual ~EngagementSource() = default;
  virtual int extra_channels() const = 0;
  // Fill engagement (size n) and extras (channel-major, size channels * n)
  // for step t.  Must be deterministic given (t, rng state).
  virtual void sample(int t, int n_users, Rng& rng, std::span<double> engagement,
                      std::span<double> extras) const = 0;
};

// Quality perceived by each provided user: capacity split evenly across the
// users actually provided this step.  Zero users -> zero quality.
double perceived_quality(double capacity, int provided_count);

// Health gain for one user this step.  Cobb-Douglas in effort and quality;
// users not provided gain nothing.
double health_increment(double engagement, bool provided, double quality,
                        const ServiceParams& p);

// Remaining balance after paying for `capacity` units at unit cost beta.
// Throws InfeasibleAction if the charge exceeds the balance (beyond a 1e-9
// tolerance); results within the tolerance clamp to exactly 0.
double budget_update(double balance, double capacity, double beta);

// Episode-level objective: the sum over steps of total accumulated health,
// i.e. sum_t sum_i H_i(t) over the T post-step states.  With H(0) = 0 this
// equals sum_t (T - t) * reward_t; both forms are provided and tested against
// each other.
double episode_objective(const std::vector<double>& total_health_per_step);
double episode_objective_from_rewards(const std::vector<double>& rewards);

class Environment {
 public:
  Environment(ServiceParams params, std::shared_ptr<const EngagementSource> source);

  // Reset to t = 0 with a fresh exogenous draw.  The same seed always yields
  // an identical initial state and identical subsequent draws.
  const EnvState& reset(std::uint64_t seed);

  // Advance one step.  Throws InfeasibleAction on an unaffordable capacity
  // level, a finished episode, or a provision mask of the wrong size.
  StepOutcome step(const Action& action);

  const EnvState& state() const { return state_; }
  const ServiceParams& params() const { return params_; }
  bool done() const { return state_.t >= params_.horizon; }

  // True if capacity level `index` is payable from the current balance.
  bool level_feasible(int index) const;
  std::vector<std::uint8_t> feasible_levels() const;
  int largest_feasible_level() const;

  // Scaled flat observation: [balance/B, t/T, x/x_max..., H/H_cap...,
  // extras user-major, each channel by its own scale].
  std::vector<double> encode_observation(const EnvState& s) const;

 private:
  void draw_exogenous(int t);

  ServiceParams params_;
  std::shared_ptr<const EngagementSource> source_;
  Rng rng_{0};
  EnvState state_;
  bool initialized_ = false;
};

}  // namespace cocreate
