#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "knobtune/mlp.hpp"
#include "knobtune/pca.hpp"
#include "knobtune/rng.hpp"
#include "knobtune/trial_runner.hpp"

namespace knobtune {

struct TD3Config {
  double gamma = 0.99;
  double tau = 0.005;
  std::size_t policy_delay = 2;
  double smoothing_sd = 0.2;
  double smoothing_clip = 0.5;
  double exploration_sd = 0.1;
  double exploration_decay = 0.97;  ///< per environment step
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 100000;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double momentum = 0.9;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t episode_length = 10;
  std::uint64_t seed = 0;

  void validate() const;
  json to_json() const;
  static TD3Config from_json(const json& j);
};

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;
};

/// Fixed-capacity ring buffer; the oldest transition is overwritten when full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {}

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  json to_json() const;
  static ReplayBuffer from_json(const json& j);

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

struct UpdateReport {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  std::optional<double> actor_objective;  ///< mean Q1(s, actor(s)) before the step
  bool actor_updated = false;
};

/// Actor plus twin critics with target copies. The actor maps a reduced
/// state (k) to K outputs in [0,1]; critics take the concatenation [s, a].
class TD3Agent {
 public:
  TD3Agent(std::size_t state_dim, std::size_t action_dim, TD3Config config);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const TD3Config& config() const { return config_; }
  std::uint64_t update_counter() const { return counter_; }

  Mlp& actor() { return actor_; }
  Mlp& critic1() { return critic1_; }
  Mlp& critic2() { return critic2_; }
  Mlp& actor_target() { return actor_t_; }
  Mlp& critic1_target() { return critic1_t_; }
  Mlp& critic2_target() { return critic2_t_; }
  const Mlp& actor() const { return actor_; }
  const Mlp& critic1() const { return critic1_; }
  const Mlp& critic2() const { return critic2_; }
  const Mlp& actor_target() const { return actor_t_; }
  const Mlp& critic1_target() const { return critic1_t_; }
  const Mlp& critic2_target() const { return critic2_t_; }

  ReplayBuffer& replay() { return replay_; }
  const ReplayBuffer& replay() const { return replay_; }

  /// Biases the actor so that its output starts near `action` for any state
  /// (output weights shrunk, output bias set to the logit). Targets follow.
  void anchor_policy(std::span<const double> action, double weight_scale = 0.05);

  /// Bootstrapped targets with clipped smoothing noise and the min of the
  /// twin target critics. Draws noise from the agent's stream.
  std::vector<double> td3_target(const std::vector<Transition>& batch);

  /// One update on a batch drawn uniformly (with replacement) from replay.
  UpdateReport train_step();
  /// One update on an explicit batch.
  UpdateReport train_step(const std::vector<Transition>& batch);

  std::vector<double> select_action(std::span<const double> s, bool explore, std::uint64_t seed) const;
  std::vector<double> select_action(std::span<const double> s, bool explore, std::uint64_t seed, double sd) const;

  /// theta' <- tau * theta + (1 - tau) * theta' for all three target nets.
  void soft_update();

  std::vector<Transition> sample_batch(std::size_t n);

  json checkpoint(bool include_replay = false) const;
  static TD3Agent restore(const json& j);

  double q1(std::span<const double> s, std::span<const double> a) const;
  double q2(std::span<const double> s, std::span<const double> a) const;

 private:
  std::vector<double> critic_input(std::span<const double> s, std::span<const double> a) const;
  void check_transition(const Transition& t) const;

  std::size_t state_dim_;
  std::size_t action_dim_;
  TD3Config config_;
  Mlp actor_, critic1_, critic2_;
  Mlp actor_t_, critic1_t_, critic2_t_;
  SgdOptimizer actor_opt_, critic1_opt_, critic2_opt_;
  ReplayBuffer replay_;
  Rng rng_;
  std::uint64_t counter_ = 0;
};

inline constexpr int kTd3CheckpointVersion = 1;

/// Reward relative to the reference fitness, clipped to [-1, 5].
double td3_reward(double fitness, double reference);

/// Fine-tunes the top-K coordinates of `start` with `agent` for `budget`
/// trials. The reward reference is `start.fitness`. The replay is pre-seeded
/// with every non-stale pool sample as a terminal one-step transition.
StageOutcome td3_tune(TrialRunner& runner, TD3Agent& agent, const PCAModel& pca, const std::vector<std::size_t>& topk,
                      std::size_t budget, const Sample& start);

}  // namespace knobtune
