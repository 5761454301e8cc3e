#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uavsec/env.hpp"
#include "uavsec/nn.hpp"
#include "uavsec/scenario.hpp"

namespace uavsec {

/// One environment step for the whole roster. States are the raw
/// observations of every agent laid back to back.
struct Transition {
  std::vector<double> joint_state;
  std::vector<double> joint_action;  // 3 raw entries per agent
  std::vector<double> rewards;       // per agent
  std::vector<double> next_joint_state;
  bool terminal = false;
  /// Per agent: its episode ended on this step (or earlier). Gates the
  /// bootstrap term together with `terminal`.
  std::vector<char> agent_done;
};

/// FIFO ring; pushing into a full buffer drops the oldest transition.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_pushed() const { return pushed_; }
  /// Index 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const { return items_.at(i); }

  /// Uniform draw with replacement. Throws if the buffer is empty or holds
  /// fewer than `batch` transitions.
  std::vector<const Transition*> sample(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t pushed_ = 0;
  std::deque<Transition> items_;
};

/// actor, critic and their targets for one agent.
struct AgentNets {
  nn::Network actor;
  nn::Network critic;
  nn::Network target_actor;
  nn::Network target_critic;
  nn::Adam actor_opt;
  nn::Adam critic_opt;
};

/// y = r + gamma * (1 - done) * q_next, all 1 x batch.
nn::Matrix td_targets(const nn::Matrix& rewards, const nn::Matrix& q_next, const nn::Matrix& done, double gamma);

/// One Adam step on mean squared error to `targets`. Returns the loss
/// before the step.
double regression_step(nn::Network& net, nn::Adam& opt, const nn::Matrix& input, const nn::Matrix& targets);

/// Critic seen by a policy step: returns Q (1 x batch) for `actions` and
/// writes dQ/d(actions) into `dq_da`.
using CriticFn = std::function<nn::Matrix(const nn::Matrix& actions, nn::Matrix& dq_da)>;

/// One Adam step on the actor minimizing -mean Q. Returns the loss before
/// the step.
double policy_step(nn::Network& actor, nn::Adam& opt, const nn::Matrix& obs, const CriticFn& critic);

/// Per-agent losses of one update round.
struct UpdateLosses {
  std::vector<double> actor;
  std::vector<double> critic;
};

/// Per-agent actors with centralized critics.
class Maddpg {
 public:
  /// `obs_scales[i]` multiplies agent i's raw observation before it reaches
  /// any network.
  Maddpg(std::vector<int> obs_dims, std::vector<std::vector<double>> obs_scales, const TrainingParams& params,
         std::uint64_t seed);

  int agent_count() const { return static_cast<int>(obs_dims_.size()); }
  const std::vector<int>& obs_dims() const { return obs_dims_; }
  const std::vector<std::vector<double>>& obs_scales() const { return obs_scales_; }
  const TrainingParams& params() const { return params_; }
  int joint_state_dim() const;
  int joint_action_dim() const { return 3 * agent_count(); }

  AgentNets& agent(int i) { return nets_.at(static_cast<std::size_t>(i)); }
  const AgentNets& agent(int i) const { return nets_.at(static_cast<std::size_t>(i)); }

  /// Actor output for one raw observation; with `explore`, adds N(0, noise_std)
  /// per component and clamps to [-1, 1].
  RawAction act(int agent, std::span<const double> raw_obs, bool explore, std::mt19937_64& noise_rng,
                double noise_std) const;
  RawAction act(int agent, std::span<const double> raw_obs) const;

  double critic_update(int agent, const std::vector<const Transition*>& batch);
  double actor_update(int agent, const std::vector<const Transition*>& batch);
  void soft_update_targets(int agent);

  /// Critic update and actor update for every agent on one shared batch,
  /// then the target blend for every agent.
  UpdateLosses update(const std::vector<const Transition*>& batch);

  /// Scaled joint states of a batch, one column per transition.
  nn::Matrix joint_states(const std::vector<const Transition*>& batch, bool next) const;
  /// Rows of agent i inside a joint state.
  int state_offset(int agent) const;

  void save(const std::string& dir) const;
  static Maddpg load(const std::string& dir);

 private:
  Maddpg() = default;
  struct BatchMatrices;
  BatchMatrices prepare(const std::vector<const Transition*>& batch) const;
  double critic_step(int agent, const BatchMatrices& m);
  double actor_step(int agent, const BatchMatrices& m);
  nn::Matrix scaled(int agent, std::span<const double> raw) const;

  std::vector<int> obs_dims_;
  std::vector<std::vector<double>> obs_scales_;
  TrainingParams params_;
  std::vector<AgentNets> nets_;
};

/// Flattens per-agent observations into one joint state.
std::vector<double> join_observations(const std::vector<Observation>& obs);

struct EpisodeLog {
  int episode = 0;
  double avg_cum_reward = 0.0;
  double avg_cum_st_mbit = 0.0;
  double avg_fairness = 0.0;
  double fst_mbit = 0.0;
  double st_mbit = 0.0;
  double avg_speed = 0.0;
  double accel_violation_rate = 0.0;
  double dist_violation_rate = 0.0;
  double actor_loss = 0.0;   // mean over updates and agents; NaN without updates
  double critic_loss = 0.0;
  long updates = 0;
  int slots = 0;
  std::vector<double> agent_rewards;
  std::vector<double> agent_actor_loss;
  std::vector<double> agent_critic_loss;
  std::vector<char> arrived;
};

struct TrainHooks {
  std::function<void(const EpisodeLog&)> on_episode;
  /// Called after every `checkpoint_every` episodes with the episode count.
  std::function<void(const Maddpg&, int)> on_checkpoint;
};

struct TrainResult {
  Maddpg agents;
  std::vector<EpisodeLog> logs;
};

/// Runs the full training loop on the environment built from `cfg`.
TrainResult train(const SimConfig& cfg, const TrainHooks& hooks = {});
TrainResult train(SecureUavEnv& env, const TrainingParams& params, std::uint64_t seed,
                  const TrainHooks& hooks = {});

Maddpg make_agents(const SecureUavEnv& env, const TrainingParams& params, std::uint64_t seed);

/// Noise-free rollout of one episode; fills `trace` when given.
EpisodeStats greedy_rollout(SecureUavEnv& env, const Maddpg& agents, EpisodeTrace* trace = nullptr);

}  // namespace uavsec
