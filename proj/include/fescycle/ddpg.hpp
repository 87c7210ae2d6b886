#pragma once

/**
 * @file ddpg.hpp
 * @brief Deep deterministic policy gradient: replay buffer, actor-critic
 *        updates with soft-updated target networks, and the episodic trainer
 *        that produces Starter and Tracker policies.
 */

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "fescycle/checkpoint.hpp"
#include "fescycle/env.hpp"
#include "fescycle/nnet.hpp"

namespace fes::ddpg {

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Transition {
  Eigen::VectorXd obs;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool terminal = false; // true terminal state: no bootstrap
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity);

  void add(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }

  /// i-th oldest stored transition.
  const Transition &at(std::size_t i) const;

  /// `n` distinct indices drawn uniformly (Floyd's algorithm).
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64 &rng) const;

private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
};

enum class NoiseKind { Gaussian, OrnsteinUhlenbeck };

struct TrainConfig {
  int episodes = 1000;
  std::size_t batch_size = 64;
  double gamma = 0.99;
  double tau = 0.001;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  std::size_t buffer_capacity = 1'000'000;
  std::size_t warmup = 1000;
  double sigma_start = 0.2;
  double sigma_end = 0.02;
  NoiseKind noise = NoiseKind::Gaussian;
  double ou_theta = 0.15;
  double grad_clip = 1.0;
  int hidden = 250;
  int moving_average = 50;
  /// Stop after this many environment steps (0 = no limit).
  long max_env_steps = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Abstract episodic task with a continuous action box [0, 1]^action_dim.
class Task {
public:
  struct Step {
    std::vector<double> obs;
    double reward;
    bool terminal;
    bool truncated;
  };

  virtual ~Task() = default;
  virtual int obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual Step step(std::span<const double> action) = 0;
  /// |tracking error| of the latest step (the learning-curve metric).
  virtual double tracking_error() const = 0;
};

/// Task adapter over the cycling environment.
class CyclingTask : public Task {
public:
  explicit CyclingTask(env::CyclingEnv env) : env_(std::move(env)) {}

  int obs_dim() const override;
  int action_dim() const override { return static_cast<int>(mech::kMuscles); }
  std::vector<double> reset(std::uint64_t seed) override;
  Step step(std::span<const double> action) override;
  double tracking_error() const override;

  env::CyclingEnv &env() { return env_; }

private:
  env::CyclingEnv env_;
};

struct UpdateStats {
  bool updated = false; // false while the buffer is warming up
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

class Agent {
public:
  Agent(int obs_dim, int action_dim, const TrainConfig &config,
        std::mt19937_64 &rng);

  /// Resume from a checkpoint that carries a critic.
  static Agent from_checkpoint(const PolicyCheckpoint &ckpt,
                               const TrainConfig &config);

  /// clip(actor(obs) + noise, 0, 1).
  Eigen::VectorXd act(const Eigen::VectorXd &obs, std::span<const double> noise) const;
  Eigen::VectorXd act_greedy(const Eigen::VectorXd &obs) const;

  /// y_i = r_i + gamma (1 - terminal_i) Q'(s'_i, mu'(s'_i))
  Eigen::VectorXd critic_targets(std::span<const Transition *const> batch) const;

  /// One critic regression step, one actor ascent step, soft target updates.
  UpdateStats update(const ReplayBuffer &buffer, std::mt19937_64 &rng);

  const nnet::DenseNet &actor() const { return actor_; }
  const nnet::DenseNet &critic() const { return critic_; }
  const nnet::DenseNet &target_actor() const { return target_actor_; }
  const nnet::DenseNet &target_critic() const { return target_critic_; }
  nnet::DenseNet &actor() { return actor_; }
  nnet::DenseNet &critic() { return critic_; }

  PolicyCheckpoint checkpoint(env::Mode mode, const env::Normalization &norm,
                              std::string metadata) const;

private:
  Agent(nnet::DenseNet actor, nnet::DenseNet critic, const TrainConfig &config);

  TrainConfig config_;
  nnet::DenseNet actor_, critic_, target_actor_, target_critic_;
  nnet::Adam actor_opt_, critic_opt_;
};

struct EpisodeLog {
  int episode = 0;
  int length = 0;
  double mean_abs_error = 0.0;
  double episode_return = 0.0;
  double sigma = 0.0;
  bool finite = true;
};

void write_curve_csv(std::ostream &os, const std::vector<EpisodeLog> &curve);

struct TrainResult {
  PolicyCheckpoint final_checkpoint;
  PolicyCheckpoint best_checkpoint;
  std::vector<EpisodeLog> curve;
  long env_steps = 0;
  long updates = 0;
};

using EpisodeCallback = std::function<void(const EpisodeLog &)>;

/// Episodic DDPG training. `initial` resumes from an existing agent.
TrainResult train(Task &task, env::Mode mode, const env::Normalization &norm,
                  const TrainConfig &config, std::optional<Agent> initial = {},
                  const EpisodeCallback &on_episode = {});

/// Seed of episode `index` derived from the root seed.
std::uint64_t episode_seed(std::uint64_t root, std::uint64_t index);

} // namespace fes::ddpg
