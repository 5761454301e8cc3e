#include "uavsec/maddpg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace uavsec {

using nn::Matrix;

namespace {

constexpr int kCheckpointFormat = 1;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id)};
  return std::mt19937_64(seq);
}

nn::AdamConfig adam_config(const TrainingParams& p) {
  nn::AdamConfig c;
  c.learning_rate = p.learning_rate;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
  ++pushed_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, std::mt19937_64& rng) const {
  if (items_.empty()) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
  if (batch > items_.size())
    throw std::logic_error("ReplayBuffer::sample: batch of " + std::to_string(batch) + " exceeds " +
                           std::to_string(items_.size()) + " stored transitions");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition*> out(batch);
  for (auto& p : out) p = &items_[pick(rng)];
  return out;
}

// ---------------------------------------------------------------------------

Matrix td_targets(const Matrix& rewards, const Matrix& q_next, const Matrix& done, double gamma) {
  if (rewards.rows() != 1 || q_next.rows() != 1 || done.rows() != 1 || rewards.cols() != q_next.cols() ||
      rewards.cols() != done.cols())
    throw std::invalid_argument("td_targets: expected matching 1 x batch rows");
  return (rewards.array() + gamma * (1.0 - done.array()) * q_next.array()).matrix();
}

double regression_step(nn::Network& net, nn::Adam& opt, const Matrix& input, const Matrix& targets) {
  if (input.cols() == 0) throw std::invalid_argument("regression_step: empty batch");
  nn::Network::Cache cache;
  const Matrix q = net.forward(input, &cache);
  if (q.rows() != targets.rows() || q.cols() != targets.cols())
    throw std::invalid_argument("regression_step: target shape mismatch");
  const Matrix diff = q - targets;
  const double n = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / n;
  std::vector<Matrix> grads;
  net.backward(cache, (2.0 / n) * diff, grads);
  opt.step(net.mutable_parameters(), grads);
  return loss;
}

double policy_step(nn::Network& actor, nn::Adam& opt, const Matrix& obs, const CriticFn& critic) {
  if (obs.cols() == 0) throw std::invalid_argument("policy_step: empty batch");
  nn::Network::Cache cache;
  const Matrix actions = actor.forward(obs, &cache);
  Matrix dq_da;
  const Matrix q = critic(actions, dq_da);
  if (dq_da.rows() != actions.rows() || dq_da.cols() != actions.cols())
    throw std::logic_error("policy_step: critic returned a misshapen action gradient");
  const double b = static_cast<double>(obs.cols());
  const double loss = -q.sum() / b;
  std::vector<Matrix> grads;
  actor.backward(cache, (-1.0 / b) * dq_da, grads);
  opt.step(actor.mutable_parameters(), grads);
  return loss;
}

// ---------------------------------------------------------------------------

struct Maddpg::BatchMatrices {
  Matrix state;         // scaled joint state
  Matrix action;        // joint raw actions
  Matrix critic_input;  // [state; action]
  Matrix target_input;  // [next state; target-actor actions]
  Matrix rewards;       // agents x batch
  Matrix done;          // agents x batch
};

Maddpg::Maddpg(std::vector<int> obs_dims, std::vector<std::vector<double>> obs_scales,
               const TrainingParams& params, std::uint64_t seed)
    : obs_dims_(std::move(obs_dims)), obs_scales_(std::move(obs_scales)), params_(params) {
  if (obs_dims_.empty()) throw std::invalid_argument("Maddpg: no agents");
  if (obs_scales_.size() != obs_dims_.size()) throw std::invalid_argument("Maddpg: one scale vector per agent");
  for (std::size_t i = 0; i < obs_dims_.size(); ++i)
    if (static_cast<int>(obs_scales_[i].size()) != obs_dims_[i])
      throw std::invalid_argument("Maddpg: scale length differs from observation length");

  auto rng = stream(seed, 1);
  for (std::size_t i = 0; i < obs_dims_.size(); ++i) {
    nn::NetworkSpec actor_spec;
    actor_spec.block_lengths = {obs_dims_[i]};
    actor_spec.expansion_width = params.expansion_dims;
    actor_spec.hidden = params.hidden;
    actor_spec.output_dim = 3;
    actor_spec.output = nn::Activation::Tanh;

    nn::NetworkSpec critic_spec;
    critic_spec.block_lengths = obs_dims_;
    critic_spec.tail_dim = joint_action_dim();
    critic_spec.expansion_width = params.expansion_dims;
    critic_spec.hidden = params.hidden;
    critic_spec.output_dim = 1;
    critic_spec.output = nn::Activation::Linear;

    AgentNets n;
    n.actor = nn::Network(actor_spec, rng);
    n.critic = nn::Network(critic_spec, rng);
    n.target_actor = n.actor;
    n.target_critic = n.critic;
    n.actor_opt = nn::Adam(n.actor.parameters(), adam_config(params));
    n.critic_opt = nn::Adam(n.critic.parameters(), adam_config(params));
    nets_.push_back(std::move(n));
  }
}

int Maddpg::joint_state_dim() const {
  int d = 0;
  for (int o : obs_dims_) d += o;
  return d;
}

int Maddpg::state_offset(int agent) const {
  int off = 0;
  for (int i = 0; i < agent; ++i) off += obs_dims_[static_cast<std::size_t>(i)];
  return off;
}

Matrix Maddpg::scaled(int agent, std::span<const double> raw) const {
  const auto& s = obs_scales_.at(static_cast<std::size_t>(agent));
  if (raw.size() != s.size())
    throw std::invalid_argument("Maddpg: observation of length " + std::to_string(raw.size()) + " for agent " +
                                std::to_string(agent) + ", expected " + std::to_string(s.size()));
  Matrix x(static_cast<Eigen::Index>(raw.size()), 1);
  for (std::size_t k = 0; k < raw.size(); ++k) x(static_cast<Eigen::Index>(k), 0) = raw[k] * s[k];
  return x;
}

RawAction Maddpg::act(int agent, std::span<const double> raw_obs, bool explore, std::mt19937_64& noise_rng,
                      double noise_std) const {
  const Matrix y = nets_.at(static_cast<std::size_t>(agent)).actor.forward(scaled(agent, raw_obs));
  RawAction a{};
  std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
  for (int k = 0; k < 3; ++k) {
    double v = y(k, 0);
    if (explore && noise_std > 0.0) v += noise(noise_rng);
    a[static_cast<std::size_t>(k)] = std::clamp(v, -1.0, 1.0);
  }
  return a;
}

RawAction Maddpg::act(int agent, std::span<const double> raw_obs) const {
  std::mt19937_64 unused(0);
  return act(agent, raw_obs, false, unused, 0.0);
}

Matrix Maddpg::joint_states(const std::vector<const Transition*>& batch, bool next) const {
  const int dim = joint_state_dim();
  Matrix s(dim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& v = next ? batch[b]->next_joint_state : batch[b]->joint_state;
    if (static_cast<int>(v.size()) != dim) throw std::invalid_argument("Maddpg: joint state length mismatch");
    int row = 0;
    for (std::size_t i = 0; i < obs_dims_.size(); ++i)
      for (int k = 0; k < obs_dims_[i]; ++k, ++row)
        s(row, static_cast<Eigen::Index>(b)) = v[static_cast<std::size_t>(row)] * obs_scales_[i][static_cast<std::size_t>(k)];
  }
  return s;
}

Maddpg::BatchMatrices Maddpg::prepare(const std::vector<const Transition*>& batch) const {
  if (batch.empty()) throw std::invalid_argument("Maddpg: empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const int agents = agent_count();
  const int sd = joint_state_dim();
  const int ad = joint_action_dim();

  BatchMatrices m;
  m.state = joint_states(batch, false);
  const Matrix next = joint_states(batch, true);
  m.action.resize(ad, n);
  m.rewards.resize(agents, n);
  m.done.resize(agents, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const Transition& t = *batch[static_cast<std::size_t>(b)];
    if (static_cast<int>(t.joint_action.size()) != ad || static_cast<int>(t.rewards.size()) != agents ||
        static_cast<int>(t.agent_done.size()) != agents)
      throw std::invalid_argument("Maddpg: transition does not match the agent roster");
    for (int k = 0; k < ad; ++k) m.action(k, b) = t.joint_action[static_cast<std::size_t>(k)];
    for (int i = 0; i < agents; ++i) {
      m.rewards(i, b) = t.rewards[static_cast<std::size_t>(i)];
      m.done(i, b) = (t.terminal || t.agent_done[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
    }
  }

  m.critic_input.resize(sd + ad, n);
  m.critic_input.topRows(sd) = m.state;
  m.critic_input.bottomRows(ad) = m.action;

  m.target_input.resize(sd + ad, n);
  m.target_input.topRows(sd) = next;
  for (int i = 0; i < agents; ++i) {
    const int off = state_offset(i);
    m.target_input.middleRows(sd + 3 * i, 3) =
        nets_[static_cast<std::size_t>(i)].target_actor.forward(next.middleRows(off, obs_dims_[static_cast<std::size_t>(i)]));
  }
  return m;
}

double Maddpg::critic_step(int agent, const BatchMatrices& m) {
  AgentNets& n = nets_.at(static_cast<std::size_t>(agent));
  const Matrix q_next = n.target_critic.forward(m.target_input);
  const Matrix y = td_targets(m.rewards.row(agent), q_next, m.done.row(agent), params_.gamma);
  return regression_step(n.critic, n.critic_opt, m.critic_input, y);
}

double Maddpg::actor_step(int agent, const BatchMatrices& m) {
  AgentNets& n = nets_.at(static_cast<std::size_t>(agent));
  const int sd = joint_state_dim();
  const int off = state_offset(agent);
  const Matrix obs = m.state.middleRows(off, obs_dims_[static_cast<std::size_t>(agent)]);
  const nn::Network& critic = n.critic;
  Matrix input = m.critic_input;
  const CriticFn q = [&](const Matrix& actions, Matrix& dq_da) {
    input.middleRows(sd + 3 * agent, 3) = actions;
    nn::Network::Cache cache;
    Matrix out = critic.forward(input, &cache);
    std::vector<Matrix> unused;
    const Matrix g = critic.backward(cache, Matrix::Ones(1, input.cols()), unused);
    dq_da = g.middleRows(sd + 3 * agent, 3);
    return out;
  };
  return policy_step(n.actor, n.actor_opt, obs, q);
}

double Maddpg::critic_update(int agent, const std::vector<const Transition*>& batch) {
  return critic_step(agent, prepare(batch));
}

double Maddpg::actor_update(int agent, const std::vector<const Transition*>& batch) {
  return actor_step(agent, prepare(batch));
}

void Maddpg::soft_update_targets(int agent) {
  AgentNets& n = nets_.at(static_cast<std::size_t>(agent));
  nn::soft_update(n.target_actor, n.actor, params_.tau);
  nn::soft_update(n.target_critic, n.critic, params_.tau);
}

UpdateLosses Maddpg::update(const std::vector<const Transition*>& batch) {
  const BatchMatrices m = prepare(batch);
  UpdateLosses out;
  for (int i = 0; i < agent_count(); ++i) {
    out.critic.push_back(critic_step(i, m));
    out.actor.push_back(actor_step(i, m));
  }
  for (int i = 0; i < agent_count(); ++i) soft_update_targets(i);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const char* kNetNames[] = {"actor", "critic", "target_actor", "target_critic"};

std::string net_path(const std::string& dir, int agent, const char* name) {
  return (std::filesystem::path(dir) / ("agent_" + std::to_string(agent) + "_" + name + ".txt")).string();
}

}  // namespace

void Maddpg::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::json doc;
  doc["format_version"] = kCheckpointFormat;
  doc["obs_dims"] = obs_dims_;
  doc["obs_scales"] = obs_scales_;
  doc["training"] = {{"hidden", params_.hidden},         {"expansion_dims", params_.expansion_dims},
                     {"learning_rate", params_.learning_rate}, {"gamma", params_.gamma},
                     {"tau", params_.tau},               {"batch_size", params_.batch_size}};
  std::ofstream(std::filesystem::path(dir) / "agents.json") << doc.dump(2) << "\n";
  for (int i = 0; i < agent_count(); ++i) {
    const AgentNets& n = nets_[static_cast<std::size_t>(i)];
    const nn::Network* nets[] = {&n.actor, &n.critic, &n.target_actor, &n.target_critic};
    for (int k = 0; k < 4; ++k) nn::save_network(*nets[k], net_path(dir, i, kNetNames[k]));
  }
}

Maddpg Maddpg::load(const std::string& dir) {
  const auto meta = std::filesystem::path(dir) / "agents.json";
  std::ifstream in(meta);
  if (!in) throw std::runtime_error("missing checkpoint: " + meta.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(meta.string() + ": " + e.what());
  }
  if (doc.value("format_version", 0) != kCheckpointFormat)
    throw std::runtime_error(meta.string() + ": unsupported checkpoint format");

  Maddpg m;
  m.obs_dims_ = doc.at("obs_dims").get<std::vector<int>>();
  m.obs_scales_ = doc.at("obs_scales").get<std::vector<std::vector<double>>>();
  const auto& t = doc.at("training");
  m.params_.hidden = t.at("hidden").get<std::vector<int>>();
  m.params_.expansion_dims = t.at("expansion_dims").get<int>();
  m.params_.learning_rate = t.at("learning_rate").get<double>();
  m.params_.gamma = t.at("gamma").get<double>();
  m.params_.tau = t.at("tau").get<double>();
  m.params_.batch_size = t.at("batch_size").get<int>();
  for (int i = 0; i < m.agent_count(); ++i) {
    AgentNets n;
    nn::Network* nets[] = {&n.actor, &n.critic, &n.target_actor, &n.target_critic};
    for (int k = 0; k < 4; ++k) *nets[k] = nn::load_network(net_path(dir, i, kNetNames[k]));
    if (n.actor.input_dim() != m.obs_dims_[static_cast<std::size_t>(i)] ||
        n.critic.input_dim() != m.joint_state_dim() + m.joint_action_dim())
      throw std::runtime_error(dir + ": network shapes disagree with agents.json");
    n.actor_opt = nn::Adam(n.actor.parameters(), adam_config(m.params_));
    n.critic_opt = nn::Adam(n.critic.parameters(), adam_config(m.params_));
    m.nets_.push_back(std::move(n));
  }
  return m;
}

// ---------------------------------------------------------------------------

std::vector<double> join_observations(const std::vector<Observation>& obs) {
  std::vector<double> out;
  for (const auto& o : obs) out.insert(out.end(), o.values.begin(), o.values.end());
  return out;
}

Maddpg make_agents(const SecureUavEnv& env, const TrainingParams& params, std::uint64_t seed) {
  std::vector<int> dims;
  std::vector<std::vector<double>> scales;
  for (int i = 0; i < env.agent_count(); ++i) {
    dims.push_back(static_cast<int>(env.observation_dim(i)));
    scales.push_back(env.observation_scale(i));
  }
  return Maddpg(std::move(dims), std::move(scales), params, seed);
}

EpisodeStats greedy_rollout(SecureUavEnv& env, const Maddpg& agents, EpisodeTrace* trace) {
  auto obs = env.reset();
  EpisodeStats stats(env);
  if (trace) trace->record_reset(env);
  std::vector<RawAction> actions(static_cast<std::size_t>(env.agent_count()));
  while (!env.terminal()) {
    for (int i = 0; i < env.agent_count(); ++i)
      actions[static_cast<std::size_t>(i)] = agents.act(i, obs[static_cast<std::size_t>(i)].values);
    StepOutcome out = env.step(actions);
    stats.observe(env, out);
    if (trace) trace->record(env, out);
    obs = std::move(out.next_obs);
  }
  return stats;
}

TrainResult train(SecureUavEnv& env, const TrainingParams& params, std::uint64_t seed, const TrainHooks& hooks) {
  if (params.episodes < 0) throw std::invalid_argument("train: negative episode count");
#if defined(__GLIBC__)
  // Batch matrices are a few hundred KB; keep them on the heap instead of
  // mapping and unmapping pages on every update.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  if (params.batch_size < 1 || params.update_every < 1) throw std::invalid_argument("train: bad update schedule");
  TrainResult result{make_agents(env, params, seed), {}};
  Maddpg& agents = result.agents;
  auto noise_rng = stream(seed, 2);
  auto sample_rng = stream(seed, 3);
  ReplayBuffer buffer(static_cast<std::size_t>(params.buffer_capacity));
  const int n_agents = env.agent_count();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  long slot_counter = 0;
  double noise_std = params.noise_std;

  for (int ep = 0; ep < params.episodes; ++ep) {
    auto obs = env.reset();
    EpisodeStats stats(env);
    std::vector<double> actor_sum(static_cast<std::size_t>(n_agents), 0.0);
    std::vector<double> critic_sum(static_cast<std::size_t>(n_agents), 0.0);
    long updates = 0;
    std::vector<RawAction> actions(static_cast<std::size_t>(n_agents));

    while (!env.terminal()) {
      for (int i = 0; i < n_agents; ++i)
        actions[static_cast<std::size_t>(i)] =
            agents.act(i, obs[static_cast<std::size_t>(i)].values, true, noise_rng, noise_std);
      StepOutcome out = env.step(actions);
      stats.observe(env, out);

      Transition t;
      t.joint_state = join_observations(obs);
      for (const auto& a : actions) t.joint_action.insert(t.joint_action.end(), a.begin(), a.end());
      t.rewards = out.rewards;
      t.next_joint_state = join_observations(out.next_obs);
      t.terminal = out.terminal;
      for (const auto& f : out.flags) t.agent_done.push_back((f.final_slot || !f.active) ? 1 : 0);
      buffer.push(std::move(t));
      obs = std::move(out.next_obs);

      ++slot_counter;
      if (buffer.size() >= static_cast<std::size_t>(params.batch_size) && slot_counter % params.update_every == 0) {
        const auto losses = agents.update(buffer.sample(static_cast<std::size_t>(params.batch_size), sample_rng));
        for (int i = 0; i < n_agents; ++i) {
          actor_sum[static_cast<std::size_t>(i)] += losses.actor[static_cast<std::size_t>(i)];
          critic_sum[static_cast<std::size_t>(i)] += losses.critic[static_cast<std::size_t>(i)];
        }
        ++updates;
      }
    }

    EpisodeLog log;
    log.episode = ep;
    log.avg_cum_reward = stats.average_cumulative_reward();
    log.avg_cum_st_mbit = stats.average_cumulative_st_mbit();
    log.avg_fairness = stats.average_fairness();
    log.fst_mbit = stats.total_fst_mbit();
    log.st_mbit = stats.total_st_mbit();
    log.avg_speed = stats.average_speed();
    log.accel_violation_rate = stats.accel_violation_rate();
    log.dist_violation_rate = stats.separation_violation_rate();
    log.updates = updates;
    log.slots = stats.slots();
    log.agent_rewards = stats.agent_rewards();
    log.arrived = stats.arrived();
    double a_total = 0.0, c_total = 0.0;
    for (int i = 0; i < n_agents; ++i) {
      const double a = updates ? actor_sum[static_cast<std::size_t>(i)] / static_cast<double>(updates) : nan;
      const double c = updates ? critic_sum[static_cast<std::size_t>(i)] / static_cast<double>(updates) : nan;
      log.agent_actor_loss.push_back(a);
      log.agent_critic_loss.push_back(c);
      a_total += a;
      c_total += c;
    }
    log.actor_loss = updates ? a_total / n_agents : nan;
    log.critic_loss = updates ? c_total / n_agents : nan;
    if (hooks.on_episode) hooks.on_episode(log);
    result.logs.push_back(std::move(log));

    if (hooks.on_checkpoint && params.checkpoint_every > 0 && (ep + 1) % params.checkpoint_every == 0)
      hooks.on_checkpoint(agents, ep + 1);
    noise_std *= params.noise_decay;
  }
  return result;
}

TrainResult train(const SimConfig& cfg, const TrainHooks& hooks) {
  SecureUavEnv env = SecureUavEnv::build(cfg);
  return train(env, cfg.training, cfg.seed, hooks);
}

}  // namespace uavsec
