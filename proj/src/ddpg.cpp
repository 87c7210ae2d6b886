#include "fescycle/ddpg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "fescycle/error.hpp"

namespace fes::ddpg {

namespace {

Eigen::VectorXd to_vec(std::span<const double> v) { return nnet::to_eigen(v); }

nnet::DenseNet make_actor(int obs_dim, int action_dim, int hidden,
                          std::mt19937_64 &rng) {
  const std::array<int, 4> dims = {obs_dim, hidden, hidden, action_dim};
  return nnet::DenseNet::create(dims, nnet::Activation::Relu,
                                nnet::Activation::Sigmoid, rng);
}

nnet::DenseNet make_critic(int obs_dim, int action_dim, int hidden,
                           std::mt19937_64 &rng) {
  const std::array<int, 4> dims = {obs_dim + action_dim, hidden, hidden, 1};
  return nnet::DenseNet::create(dims, nnet::Activation::Relu,
                                nnet::Activation::Identity, rng);
}

double curve_metric(env::Mode mode, const EpisodeLog &log) {
  return mode == env::Mode::Starter ? static_cast<double>(log.length)
                                    : log.mean_abs_error;
}

} // namespace

std::uint64_t episode_seed(std::uint64_t root, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = root + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void TrainConfig::validate() const {
  require(episodes >= 0, "episodes must be non-negative");
  require(batch_size >= 1, "batch_size must be positive");
  require(gamma > 0 && gamma < 1, "gamma must lie in (0, 1)");
  require(tau >= 0 && tau <= 1, "tau must lie in [0, 1]");
  require(actor_lr > 0 && critic_lr > 0, "learning rates must be positive");
  require(buffer_capacity >= batch_size, "buffer_capacity must hold a batch");
  require(sigma_start >= 0 && sigma_end >= 0, "exploration sigma must be >= 0");
  require(grad_clip > 0, "grad_clip must be positive");
  require(hidden > 0 && moving_average > 0, "hidden and moving_average must be positive");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity > 0, "replay buffer capacity must be positive");
  ring_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::add(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition &ReplayBuffer::at(std::size_t i) const {
  require(i < size_, "replay index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : next_;
  return ring_[(oldest + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n,
                                                      std::mt19937_64 &rng) const {
  require(n <= size_, "cannot sample more transitions than stored");
  std::vector<std::size_t> out;
  out.reserve(n);
  std::unordered_set<std::size_t> chosen;
  for (std::size_t j = size_ - n; j < size_; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    const std::size_t v = chosen.contains(t) ? j : t;
    chosen.insert(v);
    out.push_back(v);
  }
  return out;
}

int CyclingTask::obs_dim() const {
  return static_cast<int>(env::Observation::dim(env_.config().mode));
}

std::vector<double> CyclingTask::reset(std::uint64_t seed) {
  return env_.reset(seed).to_vector();
}

Task::Step CyclingTask::step(std::span<const double> action) {
  env::Action a{};
  std::copy(action.begin(), action.end(), a.begin());
  const auto r = env_.step(a);
  return {r.observation.to_vector(), r.reward, r.terminal, r.truncated};
}

double CyclingTask::tracking_error() const {
  return std::abs(env_.state().theta_dot - env_.desired());
}

Agent::Agent(int obs_dim, int action_dim, const TrainConfig &config,
             std::mt19937_64 &rng)
    : Agent(make_actor(obs_dim, action_dim, config.hidden, rng),
            make_critic(obs_dim, action_dim, config.hidden, rng), config) {}

Agent::Agent(nnet::DenseNet actor, nnet::DenseNet critic, const TrainConfig &config)
    : config_(config), actor_(std::move(actor)), critic_(std::move(critic)),
      target_actor_(actor_), target_critic_(critic_),
      actor_opt_(actor_, {config.actor_lr}), critic_opt_(critic_, {config.critic_lr}) {
  require(critic_.input_dim() == actor_.input_dim() + actor_.output_dim() &&
              critic_.output_dim() == 1,
          "critic shape does not match actor");
}

Agent Agent::from_checkpoint(const PolicyCheckpoint &ckpt, const TrainConfig &config) {
  require(ckpt.critic.has_value(), "checkpoint has no critic to resume from");
  return Agent(ckpt.actor, *ckpt.critic, config);
}

Eigen::VectorXd Agent::act_greedy(const Eigen::VectorXd &obs) const {
  return actor_.forward(obs).cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::VectorXd Agent::act(const Eigen::VectorXd &obs,
                           std::span<const double> noise) const {
  Eigen::VectorXd a = actor_.forward(obs);
  require(noise.empty() || noise.size() == static_cast<std::size_t>(a.size()),
          "noise length does not match action dimension");
  for (std::size_t i = 0; i < noise.size(); ++i) {
    a(static_cast<Eigen::Index>(i)) += noise[i];
  }
  return a.cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::VectorXd Agent::critic_targets(std::span<const Transition *const> batch) const {
  const auto n = static_cast<Eigen::Index>(batch.size());
  require(n > 0, "critic_targets: empty batch");
  const auto od = actor_.input_dim();
  const auto ad = actor_.output_dim();
  Eigen::MatrixXd next(od, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    next.col(j) = batch[j]->next_obs;
  }
  Eigen::MatrixXd joint(od + ad, n);
  joint.topRows(od) = next;
  joint.bottomRows(ad) = target_actor_.forward_batch(next);
  const Eigen::MatrixXd q = target_critic_.forward_batch(joint);
  Eigen::VectorXd y(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double bootstrap = batch[j]->terminal ? 0.0 : config_.gamma * q(0, j);
    y(j) = batch[j]->reward + bootstrap;
  }
  return y;
}

UpdateStats Agent::update(const ReplayBuffer &buffer, std::mt19937_64 &rng) {
  UpdateStats stats;
  const std::size_t b = config_.batch_size;
  if (buffer.size() < std::max(b, config_.warmup)) {
    return stats;
  }
  const auto idx = buffer.sample_indices(b, rng);
  std::vector<const Transition *> batch;
  batch.reserve(b);
  for (auto i : idx) {
    batch.push_back(&buffer.at(i));
  }
  const auto n = static_cast<Eigen::Index>(b);
  const auto od = actor_.input_dim();
  const auto ad = actor_.output_dim();

  const Eigen::VectorXd y = critic_targets(batch);

  Eigen::MatrixXd joint(od + ad, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    joint.col(j).head(od) = batch[j]->obs;
    joint.col(j).tail(ad) = batch[j]->action;
  }

  // Critic: minimise mean (Q - y)^2.
  nnet::ForwardCache critic_cache;
  const Eigen::MatrixXd q = critic_.forward_batch(joint, &critic_cache);
  const Eigen::RowVectorXd residual = q.row(0) - y.transpose();
  stats.critic_loss = residual.squaredNorm() / static_cast<double>(n);
  auto critic_grads =
      critic_.backward(critic_cache, (2.0 / static_cast<double>(n)) * residual);
  nnet::clip_global_norm(critic_grads, config_.grad_clip);
  critic_opt_.step(critic_, critic_grads);

  // Actor: ascend mean Q(s, mu(s)) through the critic's action input.
  nnet::ForwardCache actor_cache;
  const Eigen::MatrixXd states = joint.topRows(od);
  joint.bottomRows(ad) = actor_.forward_batch(states, &actor_cache);
  const Eigen::MatrixXd q_policy = critic_.forward_batch(joint, &critic_cache);
  stats.actor_objective = q_policy.mean();
  const Eigen::MatrixXd dq = critic_.input_gradient(
      critic_cache,
      Eigen::MatrixXd::Constant(1, n, -1.0 / static_cast<double>(n)));
  auto actor_grads = actor_.backward(actor_cache, dq.bottomRows(ad));
  nnet::clip_global_norm(actor_grads, config_.grad_clip);
  actor_opt_.step(actor_, actor_grads);

  nnet::soft_update(target_critic_, critic_, config_.tau);
  nnet::soft_update(target_actor_, actor_, config_.tau);
  stats.updated = true;
  return stats;
}

PolicyCheckpoint Agent::checkpoint(env::Mode mode, const env::Normalization &norm,
                                   std::string metadata) const {
  PolicyCheckpoint c;
  c.mode = mode;
  c.normalization = norm;
  c.actor = actor_;
  c.critic = critic_;
  c.metadata = std::move(metadata);
  return c;
}

void write_curve_csv(std::ostream &os, const std::vector<EpisodeLog> &curve) {
  os << "episode,length,mean_abs_error,return,sigma\n";
  for (const auto &e : curve) {
    os << e.episode << ',' << e.length << ',' << e.mean_abs_error << ','
       << e.episode_return << ',' << e.sigma << '\n';
  }
}

TrainResult train(Task &task, env::Mode mode, const env::Normalization &norm,
                  const TrainConfig &config, std::optional<Agent> initial,
                  const EpisodeCallback &on_episode) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  Agent agent = initial ? std::move(*initial)
                        : Agent(task.obs_dim(), task.action_dim(), config, rng);
  require(agent.actor().input_dim() == task.obs_dim() &&
              agent.actor().output_dim() == task.action_dim(),
          "agent shape does not match task");

  ReplayBuffer buffer(config.buffer_capacity);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto act_dim = static_cast<std::size_t>(task.action_dim());

  TrainResult result;
  std::optional<PolicyCheckpoint> best;
  double best_score = std::numeric_limits<double>::infinity();
  int best_episode = -1;
  std::deque<bool> recent_finite;

  auto metadata = [&](const char *kind, int episodes) {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["mode"] = env::mode_name(mode);
    j["episodes"] = episodes;
    j["seed"] = config.seed;
    if (best_episode >= 0) {
      j["best_window_end"] = best_episode;
    }
    return j.dump();
  };

  for (int ep = 0; ep < config.episodes; ++ep) {
    if (config.max_env_steps > 0 && result.env_steps >= config.max_env_steps) {
      break;
    }
    EpisodeLog log;
    log.episode = ep;
    log.sigma = config.episodes > 1
                    ? config.sigma_start + (config.sigma_end - config.sigma_start) *
                                               ep / (config.episodes - 1)
                    : config.sigma_start;
    std::vector<double> noise(act_dim, 0.0);
    double error_sum = 0.0;
    try {
      Eigen::VectorXd obs = to_vec(task.reset(episode_seed(config.seed, ep)));
      bool done = false;
      while (!done) {
        for (auto &x : noise) {
          if (config.noise == NoiseKind::Gaussian) {
            x = log.sigma * gauss(rng);
          } else {
            x += -config.ou_theta * x + log.sigma * gauss(rng);
          }
        }
        const Eigen::VectorXd action = agent.act(obs, noise);
        const auto step = task.step({action.data(), act_dim});
        Eigen::VectorXd next = to_vec(step.obs);
        buffer.add({obs, action, step.reward, next, step.terminal && !step.truncated});
        obs = std::move(next);
        ++log.length;
        ++result.env_steps;
        log.episode_return += step.reward;
        error_sum += task.tracking_error();
        if (agent.update(buffer, rng).updated) {
          ++result.updates;
        }
        done = step.terminal ||
               (config.max_env_steps > 0 && result.env_steps >= config.max_env_steps);
      }
    } catch (const NumericalError &) {
      log.finite = false;
    }
    log.mean_abs_error = log.length > 0 ? error_sum / log.length : 0.0;
    log.finite = log.finite && std::isfinite(log.episode_return) &&
                 std::isfinite(log.mean_abs_error);
    result.curve.push_back(log);
    if (on_episode) {
      on_episode(log);
    }

    constexpr std::size_t kHealthWindow = 20;
    recent_finite.push_back(log.finite);
    if (recent_finite.size() > kHealthWindow) {
      recent_finite.pop_front();
    }
    const auto bad = std::count(recent_finite.begin(), recent_finite.end(), false);
    if (2 * static_cast<std::size_t>(bad) > kHealthWindow) {
      throw TrainingError("training aborted: " + std::to_string(bad) + " of the last " +
                          std::to_string(kHealthWindow) +
                          " episodes produced non-finite values");
    }

    const auto window = static_cast<std::size_t>(config.moving_average);
    if (result.curve.size() >= window) {
      double sum = 0.0;
      for (std::size_t k = result.curve.size() - window; k < result.curve.size(); ++k) {
        sum += curve_metric(mode, result.curve[k]);
      }
      const double score = sum / static_cast<double>(window);
      if (score < best_score) {
        best_score = score;
        best_episode = ep;
        best = agent.checkpoint(mode, norm, metadata("best", ep + 1));
      }
    }
  }

  const int ran = static_cast<int>(result.curve.size());
  result.final_checkpoint = agent.checkpoint(mode, norm, metadata("final", ran));
  result.best_checkpoint = best ? std::move(*best) : result.final_checkpoint;
  return result;
}

} // namespace fes::ddpg
