#include "cocreate/agent.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace cocreate {

using nn::Vec;

// ---- PolicyDistribution ----

PolicyDistribution PolicyDistribution::from_logits(const Vec& capacity_logits,
                                                   const std::vector<std::uint8_t>& feasible,
                                                   const Vec& provision_logits) {
  if (static_cast<int>(feasible.size()) != capacity_logits.size())
    throw std::invalid_argument("feasibility mask size does not match capacity logits");
  bool any = false;
  for (auto f : feasible) any = any || f;
  if (!any) throw std::invalid_argument("no feasible capacity level");

  PolicyDistribution d;
  d.capacity_logits = capacity_logits;
  d.feasible = feasible;
  d.provision_logits = provision_logits;

  double zmax = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < capacity_logits.size(); ++j)
    if (feasible[j]) zmax = std::max(zmax, capacity_logits[j]);
  double denom = 0.0;
  for (int j = 0; j < capacity_logits.size(); ++j)
    if (feasible[j]) denom += std::exp(capacity_logits[j] - zmax);
  d.capacity_probs = Vec::Zero(capacity_logits.size());
  for (int j = 0; j < capacity_logits.size(); ++j)
    if (feasible[j]) d.capacity_probs[j] = std::exp(capacity_logits[j] - zmax) / denom;

  d.provision_probs = provision_logits.unaryExpr([](double z) { return 1.0 / (1.0 + std::exp(-z)); });
  return d;
}

double PolicyDistribution::capacity_log_prob(int index) const {
  if (index < 0 || index >= capacity_probs.size() || !feasible[index])
    throw std::invalid_argument("capacity_log_prob: index not feasible");
  return std::log(capacity_probs[index]);
}

double PolicyDistribution::log_prob(const Action& a) const {
  if (static_cast<int>(a.provision.size()) != provision_logits.size())
    throw std::invalid_argument("log_prob: provision mask size mismatch");
  double lp = capacity_log_prob(a.capacity_index);
  for (int i = 0; i < provision_logits.size(); ++i) {
    double z = provision_logits[i];
    // log P(bit) in the stable softplus form.
    double sp = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    lp += (a.provision[i] ? z : 0.0) - sp;
  }
  return lp;
}

double PolicyDistribution::entropy() const {
  double h = 0.0;
  for (int j = 0; j < capacity_probs.size(); ++j) {
    double p = capacity_probs[j];
    if (p > 0.0) h -= p * std::log(p);
  }
  for (int i = 0; i < provision_logits.size(); ++i) {
    double z = provision_logits[i];
    double sp = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    h += sp - z * provision_probs[i];
  }
  return h;
}

Action PolicyDistribution::greedy() const {
  Action a;
  a.capacity_index = 0;
  double best = -1.0;
  for (int j = 0; j < capacity_probs.size(); ++j)
    if (capacity_probs[j] > best) {
      best = capacity_probs[j];
      a.capacity_index = j;
    }
  a.provision.resize(provision_logits.size());
  for (int i = 0; i < provision_logits.size(); ++i)
    a.provision[i] = provision_logits[i] > 0.0 ? 1 : 0;
  return a;
}

std::pair<Action, double> sample_action(const PolicyDistribution& dist, Rng& rng) {
  Action a;
  double u = rng.uniform();
  double acc = 0.0;
  a.capacity_index = -1;
  for (int j = 0; j < dist.capacity_probs.size(); ++j) {
    acc += dist.capacity_probs[j];
    if (u < acc) {
      a.capacity_index = j;
      break;
    }
  }
  if (a.capacity_index < 0) {
    // Rounding left u >= acc; take the last feasible level.
    for (int j = dist.capacity_probs.size() - 1; j >= 0; --j)
      if (dist.feasible[j]) {
        a.capacity_index = j;
        break;
      }
  }
  a.provision.resize(dist.provision_probs.size());
  for (int i = 0; i < dist.provision_probs.size(); ++i)
    a.provision[i] = rng.uniform() < dist.provision_probs[i] ? 1 : 0;
  return {a, dist.log_prob(a)};
}

// ---- config ----

void PpoConfig::validate() const {
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
    throw std::invalid_argument("ppo.clip_epsilon must be in (0, 1)");
  if (!(discount > 0.0 && discount <= 1.0))
    throw std::invalid_argument("ppo.discount must be in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
    throw std::invalid_argument("ppo.gae_lambda must be in [0, 1]");
  if (epochs_per_batch < 1) throw std::invalid_argument("ppo.epochs_per_batch must be positive");
  if (minibatch_episodes < 1) throw std::invalid_argument("ppo.minibatch_episodes must be positive");
  if (rollout_episodes < 1) throw std::invalid_argument("ppo.rollout_episodes must be positive");
  if (batches < 1) throw std::invalid_argument("ppo.batches must be positive");
  if (entropy_coef < 0.0) throw std::invalid_argument("ppo.entropy_coef must be non-negative");
  if (!(actor_lr >= 0.0) || !(critic_lr >= 0.0))
    throw std::invalid_argument("ppo.learning rates must be non-negative");
  if (vf_coef < 0.0) throw std::invalid_argument("ppo.vf_coef must be non-negative");
  if (kl_stop_threshold < 0.0)
    throw std::invalid_argument("ppo.kl_stop_threshold must be non-negative");
  if (threads < 1) throw std::invalid_argument("ppo.threads must be positive");
}

// ---- advantages and loss terms ----

AdvantageResult compute_advantages(const Trajectory& traj, const PpoConfig& cfg) {
  const int T = static_cast<int>(traj.length());
  if (T == 0) throw std::invalid_argument("compute_advantages: empty trajectory");
  AdvantageResult out;
  out.advantages.resize(T);
  out.returns.resize(T);
  const double gamma = cfg.discount;
  const double lambda = cfg.gae_lambda;
  double gae = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double v_next = t + 1 < T ? traj.values[t + 1] : 0.0;  // terminal bootstrap 0
    const double delta = traj.rewards[t] + gamma * v_next - traj.values[t];
    gae = delta + gamma * lambda * gae;
    out.advantages[t] = gae;
    out.returns[t] = gae + traj.values[t];
  }
  return out;
}

double ppo_clip_objective(double logp_new, double logp_old, double advantage,
                          double clip_epsilon) {
  const double r = std::exp(logp_new - logp_old);
  if (!std::isfinite(r)) throw std::invalid_argument("ppo_clip_objective: non-finite ratio");
  const double clipped = std::min(std::max(r, 1.0 - clip_epsilon), 1.0 + clip_epsilon);
  return std::min(r * advantage, clipped * advantage);
}

double critic_loss(double return_target, double value) {
  const double d = return_target - value;
  return d * d;
}

double improvement_percent(double adaptive, double baseline) {
  if (baseline == 0.0) throw std::invalid_argument("improvement_percent: zero baseline");
  return (adaptive - baseline) / baseline * 100.0;
}

// ---- agent ----

PpoAgent::PpoAgent(nn::NetConfig net_cfg, PpoConfig ppo_cfg, std::uint64_t seed)
    : PpoAgent(nn::HybridNet(net_cfg, seed), ppo_cfg, seed) {}

PpoAgent::PpoAgent(nn::HybridNet net, PpoConfig ppo_cfg, std::uint64_t seed)
    : net_(std::move(net)),
      ppo_(ppo_cfg),
      opt_(net_.params(), nn::OptimConfig{nn::OptimConfig::Kind::Adam, 1.0, 0.9, 0.999, 1e-8}),
      rng_(mix_seed(seed, 0xA9E27ULL)),
      seed_(seed) {
  ppo_.validate();
  // Learning rates are carried as per-tensor scales over a unit base rate:
  // the critic branch uses critic_lr, everything else (trunk and actor
  // heads) uses actor_lr.
  const nn::ParamStore& ps = net_.params();
  for (int i = 0; i < ps.count(); ++i)
    opt_.set_tensor_lr_scale(i, ps.name(i).rfind("critic.", 0) == 0 ? ppo_.critic_lr
                                                                    : ppo_.actor_lr);
}

Trajectory PpoAgent::rollout(Environment& env, std::uint64_t episode_seed) {
  nn::Tape tape(&net_.params());
  Rng sample_rng(mix_seed(episode_seed, 0x5A11ULL));
  Trajectory traj;
  const int n = env.params().n_users;
  const int T = env.params().horizon;
  traj.per_user_totals.assign(n, 0.0);
  traj.observations.reserve(T);
  traj.rewards.reserve(T);

  env.reset(episode_seed);
  auto [h, c] = net_.initial_state(tape);
  std::vector<double> health_totals;
  health_totals.reserve(T);

  while (!env.done()) {
    std::vector<double> obs = env.encode_observation(env.state());
    std::vector<std::uint8_t> mask = env.feasible_levels();
    int x = tape.input(Eigen::Map<const Vec>(obs.data(), static_cast<Eigen::Index>(obs.size())));
    auto ids = net_.forward_step(tape, x, h, c);
    h = ids.h;
    c = ids.c;
    PolicyDistribution dist = PolicyDistribution::from_logits(
        tape.val(ids.capacity_logits), mask, tape.val(ids.provision_logits));
    auto [action, logp] = sample_action(dist, sample_rng);

    const int t = env.state().t;
    StepOutcome outcome = env.step(action);

    traj.observations.push_back(std::move(obs));
    traj.feasible.push_back(std::move(mask));
    traj.actions.push_back(action);
    traj.log_probs.push_back(logp);
    traj.values.push_back(tape.scalar(ids.value));
    traj.raw_rewards.push_back(outcome.reward);
    const double w = ppo_.objective_weighted_returns ? static_cast<double>(T - t) : 1.0;
    traj.rewards.push_back(w * outcome.reward);
    for (int i = 0; i < n; ++i) traj.per_user_totals[i] += outcome.increments[i];
    health_totals.push_back(outcome.state.total_health());
  }
  traj.objective = episode_objective(health_totals);
  traj.total_reward = 0.0;
  for (double r : traj.raw_rewards) traj.total_reward += r;
  return traj;
}

PpoAgent::UpdateStats PpoAgent::update(const std::vector<Trajectory>& batch, double lr_factor) {
  const int E = static_cast<int>(batch.size());

  // Per-step advantages / returns, normalized across the whole batch.
  std::vector<AdvantageResult> adv(E);
  double mean = 0.0;
  long count = 0;
  for (int e = 0; e < E; ++e) {
    adv[e] = compute_advantages(batch[e], ppo_);
    for (double a : adv[e].advantages) {
      mean += a;
      ++count;
    }
  }
  mean /= static_cast<double>(count);
  if (ppo_.normalize_advantages) {
    double var = 0.0;
    for (int e = 0; e < E; ++e)
      for (double a : adv[e].advantages) var += (a - mean) * (a - mean);
    const double std = std::sqrt(var / static_cast<double>(count));
    const double denom = std + 1e-8;
    for (int e = 0; e < E; ++e)
      for (double& a : adv[e].advantages) a = (a - mean) / denom;
  }

  UpdateStats stats;
  nn::Tape tape(&net_.params());
  std::vector<int> order(E);
  for (int e = 0; e < E; ++e) order[e] = e;

  bool stop = false;
  for (int epoch = 0; epoch < ppo_.epochs_per_batch && !stop; ++epoch) {
    // Fisher-Yates with our own rng keeps shuffles reproducible everywhere.
    for (int i = E - 1; i > 0; --i) std::swap(order[i], order[rng_.uniform_int(i + 1)]);

    double epoch_kl = 0.0;
    int epoch_steps = 0;
    for (int start = 0; start < E; start += ppo_.minibatch_episodes) {
      const int stop_e = std::min(E, start + ppo_.minibatch_episodes);
      tape.clear();
      std::vector<int> actor_terms, entropy_terms, critic_terms;
      std::vector<double> ratio_minus_logr;  // for approx KL
      int n_steps = 0;
      for (int bi = start; bi < stop_e; ++bi) {
        const Trajectory& traj = batch[order[bi]];
        const AdvantageResult& ar = adv[order[bi]];
        auto [h, c] = net_.initial_state(tape);
        for (std::size_t t = 0; t < traj.length(); ++t) {
          int x = tape.input(Eigen::Map<const Vec>(
              traj.observations[t].data(), static_cast<Eigen::Index>(traj.observations[t].size())));
          auto ids = net_.forward_step(tape, x, h, c);
          h = ids.h;
          c = ids.c;
          int logp_new =
              tape.add(tape.masked_categorical_logprob(ids.capacity_logits, traj.feasible[t],
                                                       traj.actions[t].capacity_index),
                       tape.bernoulli_logprob(ids.provision_logits, traj.actions[t].provision));
          int ratio = tape.exp_(tape.add_const(logp_new, -traj.log_probs[t]));
          int surr1 = tape.scale(ratio, ar.advantages[t]);
          int surr2 = tape.scale(tape.clip(ratio, 1.0 - ppo_.clip_epsilon, 1.0 + ppo_.clip_epsilon),
                                 ar.advantages[t]);
          actor_terms.push_back(tape.min2(surr1, surr2));
          entropy_terms.push_back(
              tape.add(tape.masked_categorical_entropy(ids.capacity_logits, traj.feasible[t]),
                       tape.bernoulli_entropy(ids.provision_logits)));
          int diff = tape.add_const(ids.value, -ar.returns[t]);
          critic_terms.push_back(tape.cmul(diff, diff));
          const double r = tape.scalar(ratio);
          ratio_minus_logr.push_back((r - 1.0) - std::log(r));
          ++n_steps;
        }
      }
      const double inv_n = 1.0 / static_cast<double>(n_steps);
      int actor_obj = tape.scale(tape.list_sum(actor_terms), inv_n);
      int entropy_mean = tape.scale(tape.list_sum(entropy_terms), inv_n);
      int critic_mean = tape.scale(tape.list_sum(critic_terms), inv_n);
      int loss = tape.add(tape.add(tape.scale(actor_obj, -1.0),
                                   tape.scale(entropy_mean, -ppo_.entropy_coef)),
                          tape.scale(critic_mean, ppo_.vf_coef));

      net_.params().zero_grad();
      try {
        tape.backward(loss);
        opt_.step(net_.params(), lr_factor);
      } catch (const std::runtime_error& e) {
        throw TrainingDiverged(std::string("update aborted: ") + e.what());
      }

      double kl = 0.0;
      for (double v : ratio_minus_logr) kl += v;
      kl /= static_cast<double>(ratio_minus_logr.size());
      stats.actor_loss += -tape.scalar(actor_obj);
      stats.critic_loss += tape.scalar(critic_mean);
      stats.entropy += tape.scalar(entropy_mean);
      stats.approx_kl += kl;
      stats.minibatches += 1;
      epoch_kl += kl;
      epoch_steps += 1;
    }
    if (ppo_.kl_stop_threshold > 0.0 && epoch_steps > 0 &&
        epoch_kl / epoch_steps > ppo_.kl_stop_threshold)
      stop = true;
  }

  if (stats.minibatches > 0) {
    stats.actor_loss /= stats.minibatches;
    stats.critic_loss /= stats.minibatches;
    stats.entropy /= stats.minibatches;
    stats.approx_kl /= stats.minibatches;
  }
  return stats;
}

std::vector<TrainCurveRow> PpoAgent::train(Environment& env) {
  std::vector<TrainCurveRow> curve;
  curve.reserve(ppo_.batches);
  std::vector<Trajectory> batch(ppo_.rollout_episodes);

  for (int b = 0; b < ppo_.batches; ++b) {
    // Episode seeds are global and consumed in order, so the stream does not
    // depend on the worker count.
    const long base_counter = episode_counter_;
    episode_counter_ += ppo_.rollout_episodes;

    auto collect = [&](Environment& e, int idx) {
      batch[idx] = rollout(e, mix_seed(seed_, 0xE0000000ULL + static_cast<std::uint64_t>(
                                                                  base_counter + idx)));
    };
    if (ppo_.threads <= 1 || ppo_.rollout_episodes == 1) {
      for (int i = 0; i < ppo_.rollout_episodes; ++i) collect(env, i);
    } else {
      std::atomic<int> next{0};
      const int workers = std::min(ppo_.threads, ppo_.rollout_episodes);
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
          Environment local = env;  // per-worker copy; sources are shared const
          (void)w;
          for (int i = next.fetch_add(1); i < ppo_.rollout_episodes; i = next.fetch_add(1))
            collect(local, i);
        });
      }
      for (auto& t : pool) t.join();
    }

    const double lr_factor =
        ppo_.anneal_lr ? 1.0 - static_cast<double>(b) / static_cast<double>(ppo_.batches) : 1.0;
    UpdateStats stats = update(batch, lr_factor);

    TrainCurveRow row;
    row.batch = b;
    double mo = 0.0;
    for (const auto& t : batch) mo += t.objective;
    row.mean_objective = mo / static_cast<double>(batch.size());
    row.actor_loss = stats.actor_loss;
    row.critic_loss = stats.critic_loss;
    row.entropy = stats.entropy;
    row.approx_kl = stats.approx_kl;
    curve.push_back(row);
  }
  return curve;
}

EvalResult PpoAgent::evaluate(Environment& env, int episodes, std::uint64_t seed, bool greedy) {
  AgentPolicy policy(&net_, greedy, seed);
  return evaluate_policy(policy, env, episodes, seed);
}

// ---- policies and shared evaluation ----

AgentPolicy::AgentPolicy(nn::HybridNet* net, bool greedy, std::uint64_t seed)
    : net_(net), greedy_(greedy), rng_(mix_seed(seed, 0xEA7ULL)), tape_(&net->params()) {}

void AgentPolicy::begin_episode(std::uint64_t episode_seed) {
  tape_.clear();
  auto [h, c] = net_->initial_state(tape_);
  h_ = h;
  c_ = c;
  rng_ = Rng(mix_seed(episode_seed, 0xEA7ULL));
}

Action AgentPolicy::act(const Environment& env) {
  if (h_ < 0) throw std::logic_error("AgentPolicy::act before begin_episode");
  std::vector<double> obs = env.encode_observation(env.state());
  int x = tape_.input(Eigen::Map<const Vec>(obs.data(), static_cast<Eigen::Index>(obs.size())));
  auto ids = net_->forward_step(tape_, x, h_, c_);
  h_ = ids.h;
  c_ = ids.c;
  PolicyDistribution dist = PolicyDistribution::from_logits(
      tape_.val(ids.capacity_logits), env.feasible_levels(), tape_.val(ids.provision_logits));
  if (greedy_) return dist.greedy();
  return sample_action(dist, rng_).first;
}

EvalResult evaluate_policy(Policy& policy, Environment& env, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate_policy: episodes must be positive");
  const int n = env.params().n_users;
  EvalResult out;
  out.per_user_mean_total.assign(n, 0.0);
  out.episodes = episodes;
  for (int ep = 0; ep < episodes; ++ep) {
    const std::uint64_t es = mix_seed(seed, 0xE7A1ULL + static_cast<std::uint64_t>(ep));
    env.reset(es);
    policy.begin_episode(es);
    std::vector<double> health_totals;
    health_totals.reserve(env.params().horizon);
    std::vector<double> totals(n, 0.0);
    while (!env.done()) {
      StepOutcome o = env.step(policy.act(env));
      for (int i = 0; i < n; ++i) totals[i] += o.increments[i];
      health_totals.push_back(o.state.total_health());
    }
    for (int i = 0; i < n; ++i) out.per_user_mean_total[i] += totals[i];
    out.mean_objective += episode_objective(health_totals);
  }
  for (int i = 0; i < n; ++i) {
    out.per_user_mean_total[i] /= episodes;
    out.mean_total_reward += out.per_user_mean_total[i];
  }
  out.mean_objective /= episodes;
  return out;
}

}  // namespace cocreate
