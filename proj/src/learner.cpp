#include "lainsim/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

namespace lain {

ValueNet ValueNet::make(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2) throw ShapeError("network needs input and output dims");
  ValueNet net;
  net.dims = dims;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / in));
    std::vector<double> w(static_cast<size_t>(in) * out);
    for (auto& v : w) v = init(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::vector<double>(out, 0.0));
  }
  return net;
}

std::vector<double> ValueNet::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dims.front())
    throw ShapeError("forward: input dimension mismatch");
  std::vector<double> a(x.begin(), x.end());
  for (size_t l = 0; l < weights.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    std::vector<double> z(out);
    const double* w = weights[l].data();
    for (int o = 0; o < out; ++o) {
      double acc = biases[l][o];
      const double* row = w + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * a[i];
      z[o] = acc;
    }
    if (l + 1 < weights.size())
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
    a = std::move(z);
  }
  return a;
}

size_t ValueNet::parameter_count() const {
  size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

bool ValueNet::finite() const {
  for (const auto& w : weights)
    for (double v : w)
      if (!std::isfinite(v)) return false;
  for (const auto& b : biases)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

std::vector<double> q_forward(const ValueNet& net, std::span<const double> obs,
                              const std::vector<bool>& mask) {
  std::vector<double> q = net.forward(obs);
  if (mask.size() != q.size()) throw ShapeError("q_forward: mask size mismatch");
  for (size_t i = 0; i < q.size(); ++i)
    if (!mask[i]) q[i] = kMaskedQ;
  return q;
}

int argmax_valid(std::span<const double> q, const std::vector<bool>& mask) {
  int best = -1;
  for (size_t i = 0; i < q.size(); ++i) {
    if (!mask[i]) continue;
    if (best < 0 || q[i] > q[best]) best = static_cast<int>(i);
  }
  return best;
}

void ReplayBuffer::push(Transition t) {
  if (capacity_ == 0) return;
  if (mode_ == BufferMode::Hherb) {
    auto& part = partitions_[t.dest_bs_ordinal];
    part.push_back(std::move(t));
    ++size_;
    if (size_ > capacity_) {
      // FIFO within the incoming partition; fall back to the largest one.
      if (part.size() > 1) {
        part.pop_front();
      } else {
        auto largest = partitions_.begin();
        for (auto it = partitions_.begin(); it != partitions_.end(); ++it)
          if (it->second.size() > largest->second.size()) largest = it;
        largest->second.pop_front();
      }
      --size_;
    }
    return;
  }
  ring_.push_back(std::move(t));
  ++size_;
  if (size_ > capacity_) {
    ring_.pop_front();
    --size_;
  }
}

std::vector<const Transition*> ReplayBuffer::sample(size_t count, Rng& rng) const {
  std::vector<const Transition*> out;
  out.reserve(count);
  if (size_ == 0) return out;
  if (mode_ == BufferMode::Hherb) {
    std::vector<const std::deque<Transition>*> nonempty;
    for (const auto& [key, part] : partitions_)
      if (!part.empty()) nonempty.push_back(&part);
    std::uniform_int_distribution<size_t> pick_part(0, nonempty.size() - 1);
    for (size_t i = 0; i < count; ++i) {
      const auto* part = nonempty[pick_part(rng)];
      std::uniform_int_distribution<size_t> pick(0, part->size() - 1);
      out.push_back(&(*part)[pick(rng)]);
    }
    return out;
  }
  std::uniform_int_distribution<size_t> pick(0, ring_.size() - 1);
  for (size_t i = 0; i < count; ++i) out.push_back(&ring_[pick(rng)]);
  return out;
}

namespace {
double bootstrap_term(const Transition& t, const ValueNet& select_net,
                      const ValueNet& eval_net) {
  const bool any_valid =
      std::any_of(t.mask_next.begin(), t.mask_next.end(), [](bool b) { return b; });
  if (!any_valid) return 0.0;
  const std::vector<double> q_select = q_forward(select_net, t.obs_next, t.mask_next);
  const int a_star = argmax_valid(q_select, t.mask_next);
  if (&select_net == &eval_net) return q_select[a_star];
  const std::vector<double> q_eval = eval_net.forward(t.obs_next);
  return q_eval[a_star];
}
}  // namespace

std::vector<double> ddqn_target(std::span<const Transition* const> batch,
                                const ValueNet& online, const ValueNet& target,
                                double gamma, TargetSelector selector) {
  std::vector<double> y;
  y.reserve(batch.size());
  const ValueNet& select_net = selector == TargetSelector::Online ? online : target;
  for (const Transition* t : batch) {
    if (t->done || gamma == 0.0) {
      y.push_back(t->reward);
      continue;
    }
    y.push_back(t->reward + gamma * bootstrap_term(*t, select_net, target));
  }
  return y;
}

std::vector<double> dqn_target(std::span<const Transition* const> batch,
                               const ValueNet& target, double gamma) {
  std::vector<double> y;
  y.reserve(batch.size());
  for (const Transition* t : batch) {
    if (t->done || gamma == 0.0) {
      y.push_back(t->reward);
      continue;
    }
    y.push_back(t->reward + gamma * bootstrap_term(*t, target, target));
  }
  return y;
}

void loss_gradients(const ValueNet& net, std::span<const Transition* const> batch,
                    std::span<const double> targets,
                    std::vector<std::vector<double>>& grad_w,
                    std::vector<std::vector<double>>& grad_b, double* loss_out) {
  if (batch.empty()) throw ShapeError("loss_gradients: empty batch");
  if (batch.size() != targets.size())
    throw ShapeError("loss_gradients: target count mismatch");
  const size_t layers = net.weights.size();
  grad_w.assign(layers, {});
  grad_b.assign(layers, {});
  for (size_t l = 0; l < layers; ++l) {
    grad_w[l].assign(net.weights[l].size(), 0.0);
    grad_b[l].assign(net.biases[l].size(), 0.0);
  }

  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<std::vector<double>> acts(layers + 1);
  for (size_t s = 0; s < batch.size(); ++s) {
    const Transition& t = *batch[s];
    // Forward pass keeping the post-activation values per layer.
    acts[0].assign(t.obs.begin(), t.obs.end());
    for (size_t l = 0; l < layers; ++l) {
      const int in = net.dims[l];
      const int out = net.dims[l + 1];
      acts[l + 1].assign(out, 0.0);
      const double* w = net.weights[l].data();
      for (int o = 0; o < out; ++o) {
        double acc = net.biases[l][o];
        const double* row = w + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) acc += row[i] * acts[l][i];
        acts[l + 1][o] = (l + 1 < layers && acc < 0.0) ? 0.0 : acc;
      }
    }
    const double q_taken = acts[layers][t.action];
    const double err = q_taken - targets[s];
    loss += err * err * inv_n;

    // Backward: dL/dq is nonzero only on the taken action.
    std::vector<double> delta(net.dims[layers], 0.0);
    delta[t.action] = 2.0 * err * inv_n;
    for (size_t l = layers; l-- > 0;) {
      const int in = net.dims[l];
      const int out = net.dims[l + 1];
      const double* w = net.weights[l].data();
      for (int o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        grad_b[l][o] += d;
        double* grow = grad_w[l].data() + static_cast<size_t>(o) * in;
        const double* a = acts[l].data();
        for (int i = 0; i < in; ++i) grow[i] += d * a[i];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (int o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* row = w + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) prev[i] += d * row[i];
      }
      // ReLU gate: the stored activation is zero exactly where the unit was
      // clamped.
      for (int i = 0; i < in; ++i)
        if (acts[l][i] <= 0.0) prev[i] = 0.0;
      delta = std::move(prev);
    }
  }
  if (loss_out) *loss_out = loss;
}

namespace {
void ensure_opt_buffers(OptimizerState& opt, const ValueNet& net) {
  if (!opt.vel_w.empty()) return;
  for (size_t l = 0; l < net.weights.size(); ++l) {
    opt.vel_w.emplace_back(net.weights[l].size(), 0.0);
    opt.vel_b.emplace_back(net.biases[l].size(), 0.0);
    opt.sq_w.emplace_back(net.weights[l].size(), 0.0);
    opt.sq_b.emplace_back(net.biases[l].size(), 0.0);
  }
}

void apply_gradient(std::vector<double>& param, const std::vector<double>& grad,
                    std::vector<double>& vel, std::vector<double>& sq, double lr,
                    OptimizerState* opt) {
  const OptimizerKind kind = opt ? opt->kind : OptimizerKind::Sgd;
  switch (kind) {
    case OptimizerKind::Sgd:
      for (size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
      break;
    case OptimizerKind::Momentum:
      for (size_t i = 0; i < param.size(); ++i) {
        vel[i] = opt->momentum * vel[i] + grad[i];
        param[i] -= lr * vel[i];
      }
      break;
    case OptimizerKind::Adam: {
      const double b1 = opt->beta1, b2 = opt->beta2;
      const double bc1 = 1.0 - std::pow(b1, static_cast<double>(opt->t));
      const double bc2 = 1.0 - std::pow(b2, static_cast<double>(opt->t));
      for (size_t i = 0; i < param.size(); ++i) {
        vel[i] = b1 * vel[i] + (1.0 - b1) * grad[i];
        sq[i] = b2 * sq[i] + (1.0 - b2) * grad[i] * grad[i];
        param[i] -= lr * (vel[i] / bc1) / (std::sqrt(sq[i] / bc2) + opt->eps);
      }
      break;
    }
  }
}
}  // namespace

double sgd_update(ValueNet& net, std::span<const Transition* const> batch,
                  std::span<const double> targets, double learning_rate,
                  OptimizerState* opt) {
  std::vector<std::vector<double>> gw, gb;
  double loss = 0.0;
  loss_gradients(net, batch, targets, gw, gb, &loss);
  if (!std::isfinite(loss))
    throw DivergenceDetected("non-finite training loss");
  if (opt) {
    ensure_opt_buffers(*opt, net);
    ++opt->t;
  }
  static std::vector<double> dummy;
  for (size_t l = 0; l < net.weights.size(); ++l) {
    apply_gradient(net.weights[l], gw[l], opt ? opt->vel_w[l] : dummy,
                   opt ? opt->sq_w[l] : dummy, learning_rate, opt);
    apply_gradient(net.biases[l], gb[l], opt ? opt->vel_b[l] : dummy,
                   opt ? opt->sq_b[l] : dummy, learning_rate, opt);
  }
  if (!net.finite()) throw DivergenceDetected("non-finite parameters after update");
  return loss;
}

void soft_target_update(const ValueNet& online, ValueNet& target, double tau) {
  if (online.dims != target.dims)
    throw ShapeError("soft_target_update: shape mismatch");
  for (size_t l = 0; l < online.weights.size(); ++l) {
    for (size_t i = 0; i < online.weights[l].size(); ++i)
      target.weights[l][i] = tau * online.weights[l][i] + (1.0 - tau) * target.weights[l][i];
    for (size_t i = 0; i < online.biases[l].size(); ++i)
      target.biases[l][i] = tau * online.biases[l][i] + (1.0 - tau) * target.biases[l][i];
  }
}

double epsilon_at(int episode, const TrainConfig& cfg) {
  const double decay_episodes =
      std::max(1.0, cfg.eps_decay_fraction * cfg.episodes);
  const double frac = std::min(1.0, episode / decay_episodes);
  return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start);
}

namespace {
struct PendingDecision {
  NodeId agent;
  DemandId demand;
  std::vector<double> obs;
  int slot;
  NodeId target;
};
}  // namespace

TrainResult train(Environment& env, const TrainConfig& cfg, std::uint64_t agent_seed) {
  TrainResult result;
  Rng explore_rng(derive_seed(agent_seed, "explore"));
  Rng sample_rng(derive_seed(agent_seed, "sample"));
  Rng init_rng(derive_seed(agent_seed, "init"));

  std::vector<int> dims{env.input_dim()};
  for (int l = 0; l < cfg.hidden_layers; ++l) dims.push_back(cfg.hidden_units);
  dims.push_back(env.action_dim());

  std::map<NodeId, Agent> agents;
  for (NodeId u : env.agents()) {
    Agent a{u, ValueNet::make(dims, init_rng), {}, ReplayBuffer(cfg.buffer_mode, cfg.buffer_capacity), {}, 0};
    a.target = a.online;
    a.opt.kind = cfg.optimizer;
    agents.emplace(u, std::move(a));
  }

  const bool arrivals = env.scenario().gen.arrival_probability > 0.0;
  for (int episode = 0; episode < cfg.episodes; ++episode) {
    env.reset(episode);
    if (!arrivals && cfg.inject_per_episode > 0)
      env.inject_demands(cfg.inject_per_episode, cfg.inject_max_delay_s);
    const double eps = epsilon_at(episode, cfg);
    double ep_reward = 0.0;
    double loss_sum = 0.0;
    int loss_count = 0;
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    for (int t = 0; t < cfg.steps_per_episode; ++t) {
      std::vector<PendingDecision> pending;
      std::map<DemandId, NodeId> actions;
      for (auto& [u, agent] : agents) {
        if (!env.topology().node(u).active) continue;
        const auto queue = env.traffic().queue_of(u);
        for (DemandId r : queue) {
          const ActionSet as = env.action_set(u, r);
          if (as.empty()) continue;  // hold in place, reward 0
          std::vector<double> x = env.observe_with_demand(u, r);
          int slot;
          if (coin(explore_rng) < eps) {
            std::vector<int> valid;
            for (size_t i = 0; i < as.mask.size(); ++i)
              if (as.mask[i]) valid.push_back(static_cast<int>(i));
            std::uniform_int_distribution<size_t> pick(0, valid.size() - 1);
            slot = valid[pick(explore_rng)];
          } else {
            const auto q = q_forward(agent.online, x, as.mask);
            slot = argmax_valid(q, as.mask);
          }
          const auto target = as.resolve(slot);
          if (!target) continue;
          actions[r] = *target;
          pending.push_back({u, r, std::move(x), slot, *target});
        }
      }

      const StepResult sr = env.step(actions);

      for (const PendingDecision& pd : pending) {
        const AgentHopResult* hop = nullptr;
        for (const auto& h : sr.agent_hops)
          if (h.demand == pd.demand && h.agent == pd.agent) hop = &h;
        if (!hop) continue;
        Transition tr;
        tr.obs = pd.obs;
        tr.action = pd.slot;
        tr.reward = hop->reward;
        tr.done = hop->flag;
        tr.obs_next = env.observe_with_demand(pd.agent, pd.demand);
        tr.mask_next = env.action_set(pd.agent, pd.demand).mask;
        const auto& bss = env.topology().base_stations();
        const NodeId dest = env.traffic().demand(pd.demand).destination;
        tr.dest_bs_ordinal = static_cast<std::uint32_t>(
            std::find(bss.begin(), bss.end(), dest) - bss.begin());
        agents.at(pd.agent).buffer.push(std::move(tr));
        ep_reward += hop->reward;
      }

      for (auto& [u, agent] : agents) {
        if (agent.buffer.size() <= static_cast<size_t>(cfg.batch)) continue;
        const auto batch = agent.buffer.sample(cfg.batch, sample_rng);
        const std::vector<double> y =
            cfg.double_dqn
                ? ddqn_target(batch, agent.online, agent.target, cfg.gamma, cfg.selector)
                : dqn_target(batch, agent.target, cfg.gamma);
        try {
          loss_sum += sgd_update(agent.online, batch, y, cfg.learning_rate, &agent.opt);
        } catch (const DivergenceDetected& e) {
          throw DivergenceDetected(std::string(e.what()) + " (agent " +
                                   std::to_string(u.index) + ", episode " +
                                   std::to_string(episode) + ", step " +
                                   std::to_string(t) + ")");
        }
        ++loss_count;
        ++agent.gradient_steps;
        if (agent.gradient_steps % cfg.target_period == 0)
          soft_target_update(agent.online, agent.target, cfg.tau);
      }

      if (!arrivals && env.traffic().total_queued() == 0) break;
    }

    EpisodeRow row;
    row.episode = episode;
    row.cumulative_reward = ep_reward;
    row.mean_loss = loss_count ? loss_sum / loss_count : 0.0;
    row.epsilon = eps;
    result.series.push_back(row);

    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
        (episode + 1) % cfg.checkpoint_every == 0) {
      std::map<NodeId, ValueNet> nets;
      for (const auto& [u, a] : agents) nets.emplace(u, a.online);
      save_checkpoint(cfg.checkpoint_path, nets, episode + 1);
    }
  }

  for (auto& [u, a] : agents) result.policies.emplace(u, std::move(a.online));
  result.env_generation_hash = env.generation_sequence_hash();
  return result;
}

std::map<DemandId, NodeId> greedy_actions(const Environment& env,
                                          const std::map<NodeId, ValueNet>& policies) {
  std::map<DemandId, NodeId> actions;
  for (const auto& [u, net] : policies) {
    if (!env.topology().node(u).active) continue;
    for (DemandId r : env.traffic().queue_of(u)) {
      const ActionSet as = env.action_set(u, r);
      if (as.empty()) continue;
      const auto x = env.observe_with_demand(u, r);
      const auto q = q_forward(net, x, as.mask);
      const int slot = argmax_valid(q, as.mask);
      if (const auto target = as.resolve(slot)) actions[r] = *target;
    }
  }
  return actions;
}

void save_checkpoint(const std::string& path, const std::map<NodeId, ValueNet>& nets,
                     std::uint64_t train_step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open checkpoint for writing: " + path);
  const char magic[4] = {'L', 'S', 'C', 'K'};
  out.write(magic, 4);
  const std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&train_step), 8);
  const std::uint32_t count = static_cast<std::uint32_t>(nets.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& [id, net] : nets) {
    out.write(reinterpret_cast<const char*>(&id.index), 4);
    const std::uint32_t nl = static_cast<std::uint32_t>(net.dims.size());
    out.write(reinterpret_cast<const char*>(&nl), 4);
    for (int d : net.dims) {
      const std::uint32_t v = static_cast<std::uint32_t>(d);
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
    for (size_t l = 0; l < net.weights.size(); ++l) {
      out.write(reinterpret_cast<const char*>(net.weights[l].data()),
                static_cast<std::streamsize>(net.weights[l].size() * 8));
      out.write(reinterpret_cast<const char*>(net.biases[l].data()),
                static_cast<std::streamsize>(net.biases[l].size() * 8));
    }
  }
  if (!out) throw IoFailure("checkpoint write failed: " + path);
}

std::map<NodeId, ValueNet> load_checkpoint(const std::string& path,
                                           std::uint64_t* train_step) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, "LSCK", 4) != 0) throw IoFailure("bad checkpoint magic");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw IoFailure("unsupported checkpoint version");
  std::uint64_t step = 0;
  in.read(reinterpret_cast<char*>(&step), 8);
  if (train_step) *train_step = step;
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  std::map<NodeId, ValueNet> nets;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t idx = 0, nl = 0;
    in.read(reinterpret_cast<char*>(&idx), 4);
    in.read(reinterpret_cast<char*>(&nl), 4);
    ValueNet net;
    net.dims.resize(nl);
    for (auto& d : net.dims) {
      std::uint32_t v = 0;
      in.read(reinterpret_cast<char*>(&v), 4);
      d = static_cast<int>(v);
    }
    for (size_t l = 0; l + 1 < net.dims.size(); ++l) {
      net.weights.emplace_back(static_cast<size_t>(net.dims[l]) * net.dims[l + 1]);
      net.biases.emplace_back(net.dims[l + 1]);
      in.read(reinterpret_cast<char*>(net.weights[l].data()),
              static_cast<std::streamsize>(net.weights[l].size() * 8));
      in.read(reinterpret_cast<char*>(net.biases[l].data()),
              static_cast<std::streamsize>(net.biases[l].size() * 8));
    }
    if (!in) throw IoFailure("checkpoint truncated: " + path);
    nets.emplace(NodeId{idx}, std::move(net));
  }
  return nets;
}

}  // namespace lain
