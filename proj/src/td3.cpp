#include "knobtune/td3.hpp"

#include <algorithm>
#include <cmath>

#include "knobtune/errors.hpp"

namespace knobtune {

namespace {

constexpr std::uint64_t kActorStream = 0x6163746f72ULL;
constexpr std::uint64_t kCriticStream = 0x637269746963ULL;
constexpr std::uint64_t kAgentStream = 0x6167656e74ULL;
constexpr std::uint64_t kExploreStream = 0x6578706cULL;

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

void soft_copy(Mlp& target, const Mlp& main, double tau) {
  auto t = target.params();
  auto m = main.params();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * m[i] + (1.0 - tau) * t[i];
}

json transition_json(const Transition& t) {
  return json{{"s", t.s}, {"a", t.a}, {"r", t.r}, {"s_next", t.s_next}, {"done", t.done}};
}

Transition transition_from_json(const json& j) {
  Transition t;
  t.s = j.at("s").get<std::vector<double>>();
  t.a = j.at("a").get<std::vector<double>>();
  t.r = j.at("r").get<double>();
  t.s_next = j.at("s_next").get<std::vector<double>>();
  t.done = j.at("done").get<bool>();
  return t;
}

}  // namespace

void TD3Config::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("td3: gamma must be in (0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("td3: tau must be in (0, 1]");
  if (policy_delay < 1) throw ValidationError("td3: policy_delay must be >= 1");
  if (smoothing_sd < 0.0 || smoothing_clip < 0.0 || exploration_sd < 0.0) throw ValidationError("td3: noise scales must be >= 0");
  if (batch_size < 1) throw ValidationError("td3: batch_size must be >= 1");
  if (buffer_capacity < 1) throw ValidationError("td3: buffer_capacity must be >= 1");
  if (episode_length < 1) throw ValidationError("td3: episode_length must be >= 1");
  if (actor_lr < 0.0 || critic_lr < 0.0 || momentum < 0.0 || momentum >= 1.0) throw ValidationError("td3: bad optimizer settings");
}

json TD3Config::to_json() const {
  return json{{"gamma", gamma},
              {"tau", tau},
              {"policy_delay", policy_delay},
              {"smoothing_sd", smoothing_sd},
              {"smoothing_clip", smoothing_clip},
              {"exploration_sd", exploration_sd},
              {"exploration_decay", exploration_decay},
              {"batch_size", batch_size},
              {"buffer_capacity", buffer_capacity},
              {"actor_lr", actor_lr},
              {"critic_lr", critic_lr},
              {"momentum", momentum},
              {"hidden", hidden},
              {"episode_length", episode_length},
              {"seed", seed}};
}

TD3Config TD3Config::from_json(const json& j) {
  TD3Config c;
  try {
    c.gamma = j.at("gamma").get<double>();
    c.tau = j.at("tau").get<double>();
    c.policy_delay = j.at("policy_delay").get<std::size_t>();
    c.smoothing_sd = j.at("smoothing_sd").get<double>();
    c.smoothing_clip = j.at("smoothing_clip").get<double>();
    c.exploration_sd = j.at("exploration_sd").get<double>();
    c.exploration_decay = j.at("exploration_decay").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
    c.actor_lr = j.at("actor_lr").get<double>();
    c.critic_lr = j.at("critic_lr").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.episode_length = j.at("episode_length").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("td3 config: ") + e.what());
  }
  c.validate();
  return c;
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

json ReplayBuffer::to_json() const {
  json items = json::array();
  for (const auto& t : data_) items.push_back(transition_json(t));
  return json{{"capacity", capacity_}, {"head", head_}, {"items", items}};
}

ReplayBuffer ReplayBuffer::from_json(const json& j) {
  try {
    ReplayBuffer b(j.at("capacity").get<std::size_t>());
    for (const auto& item : j.at("items")) b.data_.push_back(transition_from_json(item));
    b.head_ = j.at("head").get<std::size_t>();
    if (b.data_.size() > b.capacity_ || (b.head_ != 0 && b.head_ >= b.data_.size())) throw ParseError("replay: inconsistent ring state");
    return b;
  } catch (const json::exception& e) {
    throw ParseError(std::string("replay: ") + e.what());
  }
}

TD3Agent::TD3Agent(std::size_t state_dim, std::size_t action_dim, TD3Config config)
    : state_dim_(state_dim), action_dim_(action_dim), config_(std::move(config)), replay_(config_.buffer_capacity),
      rng_(derive_seed(config_.seed, kAgentStream, 0)) {
  config_.validate();
  if (action_dim_ == 0) throw ValidationError("td3: action dimension must be positive");
  // state_dim may be 0 (no retained metric channels); the actor then sees a constant input.
  NetworkSpec actor_spec{std::max<std::size_t>(state_dim_, 1), action_dim_, config_.hidden, Activation::Relu,
                         Activation::Sigmoid};
  NetworkSpec critic_spec{std::max<std::size_t>(state_dim_, 1) + action_dim_, 1, config_.hidden, Activation::Relu,
                          Activation::Identity};
  actor_ = Mlp(actor_spec, derive_seed(config_.seed, kActorStream, 0));
  critic1_ = Mlp(critic_spec, derive_seed(config_.seed, kCriticStream, 1));
  critic2_ = Mlp(critic_spec, derive_seed(config_.seed, kCriticStream, 2));
  actor_t_ = actor_;
  critic1_t_ = critic1_;
  critic2_t_ = critic2_;
  actor_opt_ = SgdOptimizer(actor_.param_count(), config_.actor_lr, config_.momentum);
  critic1_opt_ = SgdOptimizer(critic1_.param_count(), config_.critic_lr, config_.momentum);
  critic2_opt_ = SgdOptimizer(critic2_.param_count(), config_.critic_lr, config_.momentum);
}

std::vector<double> TD3Agent::critic_input(std::span<const double> s, std::span<const double> a) const {
  std::vector<double> x;
  x.reserve(critic1_.spec().input_dim);
  if (state_dim_ == 0) {
    x.push_back(0.0);
  } else {
    x.insert(x.end(), s.begin(), s.end());
  }
  x.insert(x.end(), a.begin(), a.end());
  return x;
}

namespace {
std::vector<double> actor_input(std::span<const double> s, std::size_t state_dim) {
  if (state_dim == 0) return {0.0};
  return {s.begin(), s.end()};
}
}  // namespace

void TD3Agent::check_transition(const Transition& t) const {
  if (t.s.size() != state_dim_ || t.s_next.size() != state_dim_ || t.a.size() != action_dim_) {
    throw DimensionError("td3: transition dimensions do not match the agent");
  }
}

double TD3Agent::q1(std::span<const double> s, std::span<const double> a) const {
  return critic1_.forward(critic_input(s, a))[0];
}

double TD3Agent::q2(std::span<const double> s, std::span<const double> a) const {
  return critic2_.forward(critic_input(s, a))[0];
}

void TD3Agent::anchor_policy(std::span<const double> action, double weight_scale) {
  if (action.size() != action_dim_) throw DimensionError("anchor_policy: action size mismatch");
  const std::size_t last = actor_.layer_count() - 1;
  auto p = actor_.params();
  const std::size_t w0 = actor_.weight_offset(last), b0 = actor_.bias_offset(last);
  for (std::size_t i = w0; i < b0; ++i) p[i] *= weight_scale;
  for (std::size_t o = 0; o < action_dim_; ++o) {
    const double y = std::clamp(action[o], 0.02, 0.98);
    p[b0 + o] = std::log(y / (1.0 - y));
  }
  actor_t_ = actor_;
}

std::vector<double> TD3Agent::td3_target(const std::vector<Transition>& batch) {
  if (batch.empty()) throw ValidationError("td3_target: empty batch");
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    check_transition(t);
    std::vector<double> a = actor_t_.forward(actor_input(t.s_next, state_dim_));
    for (auto& v : a) {
      const double eps = config_.smoothing_sd > 0.0 ? rng_.normal(0.0, config_.smoothing_sd) : 0.0;
      v = clip01(v + std::clamp(eps, -config_.smoothing_clip, config_.smoothing_clip));
    }
    const auto x = critic_input(t.s_next, a);
    const double q = std::min(critic1_t_.forward(x)[0], critic2_t_.forward(x)[0]);
    y[i] = t.done ? t.r : t.r + config_.gamma * q;
  }
  return y;
}

std::vector<Transition> TD3Agent::sample_batch(std::size_t n) {
  if (replay_.size() < n || n == 0) {
    throw InsufficientDataError("td3: replay holds " + std::to_string(replay_.size()) + " transitions, batch needs " +
                                std::to_string(n));
  }
  std::vector<Transition> batch;
  batch.reserve(n);
  for (std::size_t i = 0; i < n; ++i) batch.push_back(replay_.at(static_cast<std::size_t>(rng_.below(replay_.size()))));
  return batch;
}

UpdateReport TD3Agent::train_step() { return train_step(sample_batch(config_.batch_size)); }

UpdateReport TD3Agent::train_step(const std::vector<Transition>& batch) {
  const std::vector<double> y = td3_target(batch);
  const double n = static_cast<double>(batch.size());
  UpdateReport report;

  auto critic_update = [&](Mlp& critic, SgdOptimizer& opt) {
    std::vector<double> grad(critic.param_count(), 0.0);
    double loss = 0.0;
    Mlp::Tape tape;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double q = critic.forward(critic_input(batch[i].s, batch[i].a), tape)[0];
      const double err = q - y[i];
      loss += err * err;
      const double up = 2.0 * err / n;
      critic.backward(tape, std::span<const double>(&up, 1), grad);
    }
    opt.step(critic.params(), grad);
    return loss / n;
  };
  report.critic1_loss = critic_update(critic1_, critic1_opt_);
  report.critic2_loss = critic_update(critic2_, critic2_opt_);

  ++counter_;
  if (counter_ % config_.policy_delay == 0) {
    std::vector<double> grad(actor_.param_count(), 0.0);
    std::vector<double> critic_scratch(critic1_.param_count(), 0.0);
    double objective = 0.0;
    Mlp::Tape actor_tape, critic_tape;
    for (const auto& t : batch) {
      const auto a = actor_.forward(actor_input(t.s, state_dim_), actor_tape);
      objective += critic1_.forward(critic_input(t.s, a), critic_tape)[0];
      const double up = 1.0;
      const auto dx = critic1_.backward(critic_tape, std::span<const double>(&up, 1), critic_scratch);
      // Gradient ascent on Q1: descend on -Q1 / n.
      std::vector<double> da(dx.end() - static_cast<std::ptrdiff_t>(action_dim_), dx.end());
      for (auto& g : da) g = -g / n;
      actor_.backward(actor_tape, da, grad);
    }
    actor_opt_.step(actor_.params(), grad);
    report.actor_objective = objective / n;
    report.actor_updated = true;
    soft_update();
  }
  return report;
}

std::vector<double> TD3Agent::select_action(std::span<const double> s, bool explore, std::uint64_t seed) const {
  return select_action(s, explore, seed, config_.exploration_sd);
}

std::vector<double> TD3Agent::select_action(std::span<const double> s, bool explore, std::uint64_t seed, double sd) const {
  if (s.size() != state_dim_) throw DimensionError("select_action: state size mismatch");
  std::vector<double> a = actor_.forward(actor_input(s, state_dim_));
  if (explore && sd > 0.0) {
    Rng rng(derive_seed(seed, kExploreStream, 0));
    for (auto& v : a) v = clip01(v + rng.normal(0.0, sd));
  }
  return a;
}

void TD3Agent::soft_update() {
  soft_copy(actor_t_, actor_, config_.tau);
  soft_copy(critic1_t_, critic1_, config_.tau);
  soft_copy(critic2_t_, critic2_, config_.tau);
}

json TD3Agent::checkpoint(bool include_replay) const {
  json j{{"format", "knobtune-td3"},
         {"version", kTd3CheckpointVersion},
         {"state_dim", state_dim_},
         {"action_dim", action_dim_},
         {"config", config_.to_json()},
         {"update_counter", counter_},
         {"actor", actor_.to_json()},
         {"critic1", critic1_.to_json()},
         {"critic2", critic2_.to_json()},
         {"actor_target", actor_t_.to_json()},
         {"critic1_target", critic1_t_.to_json()},
         {"critic2_target", critic2_t_.to_json()}};
  if (include_replay) j["replay"] = replay_.to_json();
  return j;
}

TD3Agent TD3Agent::restore(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "knobtune-td3") throw ParseError("td3 checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kTd3CheckpointVersion) throw ParseError("td3 checkpoint: unsupported version");
    TD3Agent agent(j.at("state_dim").get<std::size_t>(), j.at("action_dim").get<std::size_t>(),
                   TD3Config::from_json(j.at("config")));
    auto load = [&](Mlp& net, const char* key) {
      Mlp m = Mlp::from_json(j.at(key));
      if (m.param_count() != net.param_count()) throw ParseError(std::string("td3 checkpoint: shape mismatch in ") + key);
      net = std::move(m);
    };
    load(agent.actor_, "actor");
    load(agent.critic1_, "critic1");
    load(agent.critic2_, "critic2");
    load(agent.actor_t_, "actor_target");
    load(agent.critic1_t_, "critic1_target");
    load(agent.critic2_t_, "critic2_target");
    agent.counter_ = j.at("update_counter").get<std::uint64_t>();
    if (j.contains("replay")) agent.replay_ = ReplayBuffer::from_json(j.at("replay"));
    return agent;
  } catch (const json::exception& e) {
    throw ParseError(std::string("td3 checkpoint: ") + e.what());
  }
}

double td3_reward(double fitness, double reference) {
  if (!(reference > 0.0)) return 0.0;
  return std::clamp((fitness - reference) / reference, -1.0, 5.0);
}

StageOutcome td3_tune(TrialRunner& runner, TD3Agent& agent, const PCAModel& pca, const std::vector<std::size_t>& topk,
                      std::size_t budget, const Sample& start_ref) {
  if (budget < 1) throw ValidationError("td3_tune: budget must be >= 1");
  if (topk.empty()) throw ValidationError("td3_tune: no knobs selected");
  if (agent.action_dim() != topk.size() || agent.state_dim() != pca.k()) {
    throw DimensionError("td3_tune: agent dimensions do not match the reduced space");
  }
  const Sample start = start_ref;  // pool appends may invalidate the reference
  const KnobCatalog& catalog = runner.catalog();
  for (auto i : topk) {
    if (i >= catalog.dimension()) throw DimensionError("td3_tune: selected knob index out of range");
  }
  const double reference = start.fitness;

  auto restrict = [&](std::span<const double> action) {
    std::vector<double> a(topk.size());
    for (std::size_t j = 0; j < topk.size(); ++j) a[j] = action[topk[j]];
    return a;
  };

  // Only samples that precede this stage; on resume the pool also holds later trials.
  const std::uint64_t first = runner.next_trial();
  for (const Sample* s : runner.pool().select(SampleFilter{std::nullopt, false})) {
    if (s->trial_index >= first) continue;
    const auto z = pca.transform(s->state);
    agent.replay().push(Transition{z, restrict(s->action), td3_reward(s->fitness, reference), z, true});
  }
  const auto start_action = restrict(start.action);
  agent.anchor_policy(start_action);

  StageTracker tracker(denormalize(catalog, start.action), start.fitness);
  const std::vector<double> start_state = pca.transform(start.state);
  std::vector<double> s = start_state;
  const TD3Config& cfg = agent.config();

  for (std::size_t step = 0; step < budget; ++step) {
    const std::size_t pos = step % cfg.episode_length;
    if (pos == 0) s = start_state;
    const double sd = cfg.exploration_sd * std::pow(cfg.exploration_decay, static_cast<double>(step));
    const auto a = agent.select_action(s, true, derive_seed(cfg.seed, 0x73746570ULL, step), sd);
    std::vector<double> full = start.action;
    for (std::size_t j = 0; j < topk.size(); ++j) full[topk[j]] = a[j];

    const Sample* sample = runner.run(full, Stage::Td3);
    if (!sample) {
      tracker.count_failure();
      continue;
    }
    tracker.offer(*sample, catalog);
    auto s_next = pca.transform(sample->state);
    // The executed action is the quantized one the environment actually saw.
    agent.replay().push(Transition{s, restrict(sample->action), td3_reward(sample->fitness, reference), s_next,
                                   pos + 1 == cfg.episode_length});
    s = std::move(s_next);
    if (agent.replay().size() >= cfg.batch_size) agent.train_step();
  }
  return tracker.outcome();
}

}  // namespace knobtune
