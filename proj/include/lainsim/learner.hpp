#pragma once

#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lainsim/core.hpp"
#include "lainsim/env.hpp"

namespace lain {

// Dense rectifier network with a linear head, double precision throughout.
struct ValueNet {
  std::vector<int> dims;                // {in, hidden..., out}
  std::vector<std::vector<double>> weights;  // row-major, out x in per layer
  std::vector<std::vector<double>> biases;

  static ValueNet make(const std::vector<int>& dims, Rng& rng);
  std::vector<double> forward(std::span<const double> x) const;
  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  size_t parameter_count() const;
  bool finite() const;
};

constexpr double kMaskedQ = -1e30;

// Forward pass with invalid slots pinned to a sentinel the argmax can never
// pick.
std::vector<double> q_forward(const ValueNet& net, std::span<const double> obs,
                              const std::vector<bool>& mask);

int argmax_valid(std::span<const double> q, const std::vector<bool>& mask);

struct Transition {
  std::vector<double> obs;
  int action = 0;
  double reward = 0.0;
  std::vector<double> obs_next;
  bool done = false;                 // f^r
  std::vector<bool> mask_next;       // valid slots at collection time, next state
  std::uint32_t dest_bs_ordinal = 0; // HHERB partition key
};

enum class BufferMode : std::uint8_t { Plain, Sherb, Hherb };

// Ring storage; HHERB partitions by destination BS and samples uniformly
// over nonempty partitions, then uniformly within the partition.
class ReplayBuffer {
 public:
  ReplayBuffer(BufferMode mode, size_t capacity)
      : mode_(mode), capacity_(capacity) {}

  void push(Transition t);
  size_t size() const { return size_; }
  BufferMode mode() const { return mode_; }
  std::vector<const Transition*> sample(size_t count, Rng& rng) const;

 private:
  BufferMode mode_;
  size_t capacity_;
  size_t size_ = 0;
  std::deque<Transition> ring_;
  std::map<std::uint32_t, std::deque<Transition>> partitions_;
};

enum class TargetSelector : std::uint8_t {
  Online,  // standard double-DQN action selection
  Target   // literal reading with the selector on the target parameters
};

std::vector<double> ddqn_target(std::span<const Transition* const> batch,
                                const ValueNet& online, const ValueNet& target,
                                double gamma,
                                TargetSelector selector = TargetSelector::Online);

std::vector<double> dqn_target(std::span<const Transition* const> batch,
                               const ValueNet& target, double gamma);

enum class OptimizerKind : std::uint8_t { Sgd, Momentum, Adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Sgd;
  double momentum = 0.9;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<std::vector<double>> vel_w, vel_b;   // momentum / adam m
  std::vector<std::vector<double>> sq_w, sq_b;     // adam v
  std::uint64_t t = 0;
};

// One mean-squared-error gradient step on the taken-action Q-values.
// Returns the batch loss; throws DivergenceDetected on non-finite values.
double sgd_update(ValueNet& net, std::span<const Transition* const> batch,
                  std::span<const double> targets, double learning_rate,
                  OptimizerState* opt = nullptr);

// theta_minus <- tau * theta + (1 - tau) * theta_minus
void soft_target_update(const ValueNet& online, ValueNet& target, double tau);

// Loss gradient via backprop, exposed for the finite-difference check.
void loss_gradients(const ValueNet& net, std::span<const Transition* const> batch,
                    std::span<const double> targets,
                    std::vector<std::vector<double>>& grad_w,
                    std::vector<std::vector<double>>& grad_b, double* loss_out);

struct TrainConfig {
  double learning_rate = 1e-3;
  double gamma = 0.95;
  int batch = 64;
  int target_period = 100;  // W: soft updates every this many gradient steps
  double tau = 0.01;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.5;  // of total episodes
  int episodes = 2000;
  int steps_per_episode = 8;
  size_t buffer_capacity = 20000;
  int hidden_units = 64;
  int hidden_layers = 2;
  bool double_dqn = true;
  TargetSelector selector = TargetSelector::Online;
  BufferMode buffer_mode = BufferMode::Sherb;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  int inject_per_episode = 1;       // fixed load when arrivals are disabled
  double inject_max_delay_s = 1e9;
  int checkpoint_every = 0;
  std::string checkpoint_path;
};

double epsilon_at(int episode, const TrainConfig& cfg);

struct Agent {
  NodeId id;
  ValueNet online;
  ValueNet target;
  ReplayBuffer buffer;
  OptimizerState opt;
  std::uint64_t gradient_steps = 0;
};

struct EpisodeRow {
  int episode = 0;
  double cumulative_reward = 0.0;
  double mean_loss = 0.0;
  double epsilon = 0.0;
};

struct TrainResult {
  std::map<NodeId, ValueNet> policies;
  std::vector<EpisodeRow> series;
  std::uint64_t env_generation_hash = 0;
};

// Full training loop: init nets, per-episode rollout with epsilon-greedy
// per-demand sub-actions, replay sampling, target computation, gradient
// steps, and periodic soft target updates.
TrainResult train(Environment& env, const TrainConfig& cfg, std::uint64_t agent_seed);

// Greedy joint action for the current environment state under the policies.
std::map<DemandId, NodeId> greedy_actions(const Environment& env,
                                          const std::map<NodeId, ValueNet>& policies);

void save_checkpoint(const std::string& path, const std::map<NodeId, ValueNet>& nets,
                     std::uint64_t train_step);
std::map<NodeId, ValueNet> load_checkpoint(const std::string& path,
                                           std::uint64_t* train_step = nullptr);

}  // namespace lain
