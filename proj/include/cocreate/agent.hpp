#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cocreate/env.hpp"
#include "cocreate/neural.hpp"
#include "cocreate/policy.hpp"

namespace cocreate {

// Training aborted because a loss or gradient went non-finite.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Factorized action distribution: one categorical head over capacity levels
// (masked to the budget-feasible ones) and n independent Bernoulli provision
// heads.  The joint log-prob is the sum of the factor log-probs, which keeps
// the m * 2^n action space tractable.
struct PolicyDistribution {
  nn::Vec capacity_logits;              // raw head output, size m
  std::vector<std::uint8_t> feasible;   // mask, size m; at least one set
  nn::Vec capacity_probs;               // masked softmax; infeasible entries exactly 0
  nn::Vec provision_logits;             // size n
  nn::Vec provision_probs;              // sigmoid of logits

  static PolicyDistribution from_logits(const nn::Vec& capacity_logits,
                                        const std::vector<std::uint8_t>& feasible,
                                        const nn::Vec& provision_logits);

  double capacity_log_prob(int index) const;
  double log_prob(const Action& a) const;  // joint
  double entropy() const;                  // categorical + sum of Bernoulli entropies
  Action greedy() const;                   // mode of each head
};

// Sample an action and its joint log-prob.
std::pair<Action, double> sample_action(const PolicyDistribution& dist, Rng& rng);

struct PpoConfig {
  double clip_epsilon = 0.2;
  double discount = 1.0;       // the value recursion is undiscounted by default
  double gae_lambda = 1.0;     // 1.0 = plain return-to-go advantage
  int epochs_per_batch = 4;
  int minibatch_episodes = 4;
  int rollout_episodes = 8;    // per batch
  int batches = 300;
  double entropy_coef = 0.01;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double vf_coef = 0.5;
  bool normalize_advantages = true;
  double kl_stop_threshold = 0.0;  // 0 disables the early stop; 0.02 typical
  bool anneal_lr = false;          // linear decay of both lrs to 0 over `batches`
  // Train on rewards weighted by remaining steps, (T - t) * r_t, so that the
  // episode return equals the accumulated-health objective the service
  // maximizes.  Metrics always report the unweighted objective.
  bool objective_weighted_returns = true;
  int threads = 1;  // rollout workers; results are independent of this value

  void validate() const;
};

// One collected episode.  rewards are the training rewards (weighted when
// objective_weighted_returns is set); raw environment rewards and episode
// metrics are kept alongside.
struct Trajectory {
  std::vector<std::vector<double>> observations;
  std::vector<std::vector<std::uint8_t>> feasible;  // capacity mask per step
  std::vector<Action> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> raw_rewards;
  std::vector<double> per_user_totals;  // sum of increments per user
  double objective = 0.0;               // accumulated-health objective
  double total_reward = 0.0;            // sum of raw rewards

  std::size_t length() const { return rewards.size(); }
};

struct AdvantageResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // critic regression targets
};

// Default lambda = 1: advantage = discounted return-to-go minus the value
// baseline.  General GAE(lambda) with terminal bootstrap value 0.  Batch
// normalization of advantages happens separately in the trainer.
AdvantageResult compute_advantages(const Trajectory& traj, const PpoConfig& cfg);

// Scalar PPO-Clip surrogate term min(r * A, clip(r, 1-eps, 1+eps) * A) with
// r = exp(logp_new - logp_old).  The batch objective is the mean of these,
// maximized by the actor.
double ppo_clip_objective(double logp_new, double logp_old, double advantage,
                          double clip_epsilon);

// Squared-error critic term (batch averaging is the caller's job).
double critic_loss(double return_target, double value);

// Improvement of an adaptive result over a baseline, in percent.
double improvement_percent(double adaptive, double baseline);

struct TrainCurveRow {
  int batch = 0;
  double mean_objective = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
};

struct EvalResult {
  std::vector<double> per_user_mean_total;
  double mean_total_reward = 0.0;
  double mean_objective = 0.0;
  int episodes = 0;
};

class PpoAgent {
 public:
  PpoAgent(nn::NetConfig net_cfg, PpoConfig ppo_cfg, std::uint64_t seed);
  // Wrap an existing network (e.g. loaded from a checkpoint).
  PpoAgent(nn::HybridNet net, PpoConfig ppo_cfg, std::uint64_t seed);

  // Collect one episode with the current parameters.
  Trajectory rollout(Environment& env, std::uint64_t episode_seed);

  // Full training loop on the given environment.  Returns the per-batch
  // curve.  Throws TrainingDiverged on a non-finite loss.
  std::vector<TrainCurveRow> train(Environment& env);

  // Greedy (default) or sampled evaluation over `episodes` episodes.
  EvalResult evaluate(Environment& env, int episodes, std::uint64_t seed, bool greedy = true);

  nn::HybridNet& net() { return net_; }
  const nn::HybridNet& net() const { return net_; }
  const PpoConfig& config() const { return ppo_; }

 private:
  struct UpdateStats {
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    int minibatches = 0;
  };
  UpdateStats update(const std::vector<Trajectory>& batch, double lr_factor);

  nn::HybridNet net_;
  PpoConfig ppo_;
  nn::Optimizer opt_;
  Rng rng_;
  std::uint64_t seed_;
  long episode_counter_ = 0;
};

// Greedy or sampling policy over a trained network, usable wherever a fixed
// plan is (comparison tables, manual evaluation).
class AgentPolicy : public Policy {
 public:
  // The net is only read; it is non-const because the tape shares its
  // parameter store.
  AgentPolicy(nn::HybridNet* net, bool greedy, std::uint64_t seed);
  void begin_episode(std::uint64_t episode_seed) override;
  Action act(const Environment& env) override;

 private:
  nn::HybridNet* net_;
  bool greedy_;
  Rng rng_;
  nn::Tape tape_;
  int h_ = -1, c_ = -1;
};

// Evaluate an arbitrary policy the same way PpoAgent::evaluate evaluates the
// trained one (same episode seeds for a fair pairing).
EvalResult evaluate_policy(Policy& policy, Environment& env, int episodes, std::uint64_t seed);

}  // namespace cocreate
