#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavnet/env.hpp"
#include "uavnet/error.hpp"
#include "uavnet/format.hpp"
#include "uavnet/rng.hpp"
#include "uavnet/sdam.hpp"
#include "uavnet/valuenet.hpp"

namespace uavnet {

// ---------------------------------------------------------------------------
// Agent values and action selection
// ---------------------------------------------------------------------------

inline Vector agent_q(const DenseNet& agent, std::span<const double> observation) {
  if (static_cast<int>(observation.size()) != agent.input_dim())
    throw InputError("agent_q: observation has " + std::to_string(observation.size()) + " entries, network expects " +
                     std::to_string(agent.input_dim()));
  Vector x = Eigen::Map<const Vector>(observation.data(), static_cast<Eigen::Index>(observation.size()));
  return forward(agent, x);
}

// Highest value among permitted actions, ties to the lowest id.
inline int masked_argmax(const Eigen::Ref<const Vector>& q, const std::vector<char>& mu) {
  int best = -1;
  for (int a = 0; a < q.size(); ++a)
    if (mu[a] && (best < 0 || q(a) > q(best))) best = a;
  if (best < 0) throw InputError("masked_argmax: mask permits no action");
  return best;
}

// epsilon-greedy restricted to the mask. Always draws one uniform; draws an
// index only when exploring.
inline int select_action(const Eigen::Ref<const Vector>& q, const ActionMask& mask, double epsilon, Rng& rng) {
  if (q.size() != mask.size()) throw InputError("select_action: q and mask sizes differ");
  const int permitted = mask.permitted_count();
  if (permitted == 0) throw InputError("select_action: mask permits no action");
  if (rng.uniform() < epsilon) {
    auto idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(permitted)));
    for (int a = 0; a < mask.size(); ++a)
      if (mask.mu[a] && idx-- == 0) return a;
  }
  return masked_argmax(q, mask.mu);
}

// ---------------------------------------------------------------------------
// Monotonic mixer
//
//   hidden = elu(|W1(s)|^T q + b1(s))
//   Q_tot  = |w2(s)| . hidden + V(s)
//
// W1(s) is a C x E matrix produced by a linear hypernetwork; the absolute
// value keeps every mixing weight non-negative, so Q_tot is non-decreasing
// in each agent value.
// ---------------------------------------------------------------------------

struct MixerNet {
  int agents = 0;
  int embed = 0;
  DenseNet hyper_w1;  // state -> C*E
  DenseNet hyper_b1;  // state -> E
  DenseNet hyper_w2;  // state -> E
  DenseNet hyper_v;   // state -> E -> 1

  static MixerNet create(int state_dim, int agents, int embed, std::uint64_t seed) {
    MixerNet m;
    m.agents = agents;
    m.embed = embed;
    Rng rng(seed);
    m.hyper_w1 = make_mlp({state_dim, agents * embed}, rng.next());
    m.hyper_b1 = make_mlp({state_dim, embed}, rng.next());
    m.hyper_w2 = make_mlp({state_dim, embed}, rng.next());
    m.hyper_v = make_mlp({state_dim, embed, 1}, rng.next());
    return m;
  }

  int state_dim() const { return hyper_w1.input_dim(); }

  bool operator==(const MixerNet& o) const {
    return agents == o.agents && embed == o.embed && hyper_w1 == o.hyper_w1 && hyper_b1 == o.hyper_b1 &&
           hyper_w2 == o.hyper_w2 && hyper_v == o.hyper_v;
  }
};

struct MixerCache {
  ForwardCache w1, b1, w2, v;
  Matrix raw_w1;  // C*E x B
  Matrix raw_w2;  // E x B
  Matrix pre;     // E x B
  Matrix hidden;  // E x B
  Matrix q;       // C x B
};

struct MixerGradients {
  Gradients w1, b1, w2, v;
  Matrix q;      // dQ_tot/dq, C x B
  Matrix state;  // dQ_tot/ds, S x B

  static MixerGradients zeros_like(const MixerNet& m) {
    return {Gradients::zeros_like(m.hyper_w1), Gradients::zeros_like(m.hyper_b1), Gradients::zeros_like(m.hyper_w2),
            Gradients::zeros_like(m.hyper_v), {}, {}};
  }
};

namespace detail {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }
inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

// q: C x B agent values, states: S x B. Returns 1 x B.
inline Matrix mix(const Matrix& q, const Matrix& states, const MixerNet& mixer, MixerCache* cache = nullptr) {
  if (q.rows() != mixer.agents) throw InputError("mix: expected " + std::to_string(mixer.agents) + " agent values");
  if (states.rows() != mixer.state_dim() || states.cols() != q.cols()) throw InputError("mix: state shape mismatch");
  const int C = mixer.agents, E = mixer.embed;
  const Eigen::Index B = q.cols();

  MixerCache local;
  MixerCache& c = cache ? *cache : local;
  c.raw_w1 = forward(mixer.hyper_w1, states, &c.w1);
  const Matrix b1 = forward(mixer.hyper_b1, states, &c.b1);
  c.raw_w2 = forward(mixer.hyper_w2, states, &c.w2);
  const Matrix v = forward(mixer.hyper_v, states, &c.v);
  c.q = q;
  c.pre.resize(E, B);
  c.hidden.resize(E, B);
  Matrix out(1, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    double total = v(0, b);
    for (int e = 0; e < E; ++e) {
      double z = b1(e, b);
      for (int u = 0; u < C; ++u) z += std::abs(c.raw_w1(u * E + e, b)) * q(u, b);
      c.pre(e, b) = z;
      c.hidden(e, b) = detail::elu(z);
      total += std::abs(c.raw_w2(e, b)) * c.hidden(e, b);
    }
    out(0, b) = total;
  }
  return out;
}

inline double mix(std::span<const double> agent_values, std::span<const double> state, const MixerNet& mixer) {
  Matrix q = Eigen::Map<const Vector>(agent_values.data(), static_cast<Eigen::Index>(agent_values.size()));
  Matrix s = Eigen::Map<const Vector>(state.data(), static_cast<Eigen::Index>(state.size()));
  return mix(q, s, mixer)(0, 0);
}

inline MixerGradients mix_backward(const MixerNet& mixer, const MixerCache& c, const Matrix& upstream) {
  const int C = mixer.agents, E = mixer.embed;
  const Eigen::Index B = c.q.cols();
  if (upstream.rows() != 1 || upstream.cols() != B) throw InputError("mix_backward: upstream shape mismatch");

  Matrix d_raw_w1 = Matrix::Zero(C * E, B);
  Matrix d_b1(E, B);
  Matrix d_raw_w2(E, B);
  Matrix d_v = upstream;
  Matrix d_q = Matrix::Zero(C, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const double g = upstream(0, b);
    for (int e = 0; e < E; ++e) {
      d_raw_w2(e, b) = g * c.hidden(e, b) * detail::sign(c.raw_w2(e, b));
      const double d_pre = g * std::abs(c.raw_w2(e, b)) * detail::elu_grad(c.pre(e, b));
      d_b1(e, b) = d_pre;
      for (int u = 0; u < C; ++u) {
        const double w = c.raw_w1(u * E + e, b);
        d_raw_w1(u * E + e, b) = d_pre * c.q(u, b) * detail::sign(w);
        d_q(u, b) += d_pre * std::abs(w);
      }
    }
  }
  MixerGradients out;
  out.w1 = backward(mixer.hyper_w1, c.w1, d_raw_w1);
  out.b1 = backward(mixer.hyper_b1, c.b1, d_b1);
  out.w2 = backward(mixer.hyper_w2, c.w2, d_raw_w2);
  out.v = backward(mixer.hyper_v, c.v, d_v);
  out.q = std::move(d_q);
  out.state = out.w1.input + out.b1.input + out.w2.input + out.v.input;
  return out;
}

template <typename Fn>
void for_each_parameter(MixerNet& m, MixerGradients* g, Fn&& fn) {
  for_each_parameter(m.hyper_w1, g ? &g->w1 : nullptr, fn);
  for_each_parameter(m.hyper_b1, g ? &g->b1 : nullptr, fn);
  for_each_parameter(m.hyper_w2, g ? &g->w2 : nullptr, fn);
  for_each_parameter(m.hyper_v, g ? &g->v : nullptr, fn);
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

struct Transition {
  Frame state;
  Frame next_state;
  std::vector<int> actions;
  double reward = 0.0;
  bool done = false;
  std::vector<std::vector<char>> masks;       // used at t, one per agent
  std::vector<std::vector<char>> next_masks;  // valid at t+1
};

class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("buffer_capacity", "must be > 0");
  }

  void add(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

  // Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const {
    if (batch == 0 || items_.size() < batch) throw InputError("replay: not enough transitions to sample");
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) out.push_back(&items_[rng.below(items_.size())]);
    return out;
  }

private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
};

// ---------------------------------------------------------------------------
// Networks and loss
// ---------------------------------------------------------------------------

struct QmixNets {
  std::vector<DenseNet> agents;
  MixerNet mixer;

  bool operator==(const QmixNets& o) const { return agents == o.agents && mixer == o.mixer; }
};

inline QmixNets make_qmix_nets(int obs_dim, int state_dim, int n_actions, int uavs, std::span<const int> hidden,
                               int mixer_embed, std::uint64_t seed) {
  Rng rng(seed);
  QmixNets nets;
  std::vector<int> dims{obs_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(n_actions);
  for (int u = 0; u < uavs; ++u) nets.agents.push_back(make_mlp(std::span<const int>(dims), rng.next()));
  nets.mixer = MixerNet::create(state_dim, uavs, mixer_embed, rng.next());
  return nets;
}

struct QmixGradients {
  std::vector<Gradients> agents;
  MixerGradients mixer;

  static QmixGradients zeros_like(const QmixNets& n) {
    QmixGradients g;
    for (const auto& a : n.agents) g.agents.push_back(Gradients::zeros_like(a));
    g.mixer = MixerGradients::zeros_like(n.mixer);
    return g;
  }

  double squared_norm() const {
    double s = mixer.w1.squared_norm() + mixer.b1.squared_norm() + mixer.w2.squared_norm() + mixer.v.squared_norm();
    for (const auto& a : agents) s += a.squared_norm();
    return s;
  }

  void scale(double f) {
    for (auto& a : agents) a.scale(f);
    mixer.w1.scale(f);
    mixer.b1.scale(f);
    mixer.w2.scale(f);
    mixer.v.scale(f);
  }
};

template <typename Fn>
void for_each_parameter(QmixNets& nets, QmixGradients* g, Fn&& fn) {
  for (std::size_t u = 0; u < nets.agents.size(); ++u) for_each_parameter(nets.agents[u], g ? &g->agents[u] : nullptr, fn);
  for_each_parameter(nets.mixer, g ? &g->mixer : nullptr, fn);
}

// Network inputs for a batch, one column per transition.
struct BatchInputs {
  std::vector<Matrix> obs;       // per agent, obs_dim x B
  std::vector<Matrix> next_obs;  // per agent
  Matrix states;                 // state_dim x B
  Matrix next_states;
};

inline BatchInputs build_batch_inputs(std::span<const Transition* const> batch, int n_vertices) {
  if (batch.empty()) throw InputError("build_batch_inputs: empty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const int C = static_cast<int>(batch.front()->actions.size());
  const int m = static_cast<int>(batch.front()->state.p_e.size());
  const int obs_dim = 2 * m + n_vertices;
  const int state_dim = obs_dim + C;
  BatchInputs in;
  in.obs.assign(C, Matrix(obs_dim, B));
  in.next_obs.assign(C, Matrix(obs_dim, B));
  in.states.resize(state_dim, B);
  in.next_states.resize(state_dim, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Transition& tr = *batch[b];
    for (int u = 0; u < C; ++u) {
      encode_observation(tr.state, u, n_vertices, std::span<double>(in.obs[u].col(b).data(), obs_dim));
      encode_observation(tr.next_state, u, n_vertices, std::span<double>(in.next_obs[u].col(b).data(), obs_dim));
    }
    encode_state(tr.state, n_vertices, std::span<double>(in.states.col(b).data(), state_dim));
    encode_state(tr.next_state, n_vertices, std::span<double>(in.next_states.col(b).data(), state_dim));
  }
  return in;
}

struct TdLossResult {
  double loss = 0.0;
  QmixGradients grads;
};

// Mean squared TD error of the mixed value. The bootstrap target picks each
// agent's action with the online nets over its t+1 mask and evaluates it
// with the target nets. Depleted agents contribute a constant zero value.
inline TdLossResult td_loss(std::span<const Transition* const> batch, const QmixNets& nets, const QmixNets& target,
                            double gamma) {
  if (batch.empty()) throw InputError("td_loss: empty batch");
  const int C = static_cast<int>(nets.agents.size());
  const int n = nets.agents.front().output_dim();
  const auto B = static_cast<Eigen::Index>(batch.size());
  const BatchInputs in = build_batch_inputs(batch, n);

  std::vector<ForwardCache> caches(C);
  Matrix chosen = Matrix::Zero(C, B);
  Matrix next_values = Matrix::Zero(C, B);
  for (int u = 0; u < C; ++u) {
    const Matrix q = forward(nets.agents[u], in.obs[u], &caches[u]);
    const Matrix q_next = forward(nets.agents[u], in.next_obs[u]);
    const Matrix q_next_target = forward(target.agents[u], in.next_obs[u]);
    for (Eigen::Index b = 0; b < B; ++b) {
      const Transition& tr = *batch[b];
      if (tr.state.alive[u]) chosen(u, b) = q(tr.actions[u], b);
      if (tr.next_state.alive[u]) {
        const int a_star = masked_argmax(q_next.col(b), tr.next_masks[u]);
        next_values(u, b) = q_next_target(a_star, b);
      }
    }
  }

  MixerCache mcache;
  const Matrix q_tot = mix(chosen, in.states, nets.mixer, &mcache);
  const Matrix q_tot_next = mix(next_values, in.next_states, target.mixer);

  TdLossResult res;
  Matrix d_q_tot(1, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Transition& tr = *batch[b];
    const double y = tr.reward + (tr.done ? 0.0 : gamma * q_tot_next(0, b));
    const double err = q_tot(0, b) - y;
    res.loss += err * err;
    d_q_tot(0, b) = 2.0 * err / static_cast<double>(B);
  }
  res.loss /= static_cast<double>(B);

  res.grads.mixer = mix_backward(nets.mixer, mcache, d_q_tot);
  for (int u = 0; u < C; ++u) {
    Matrix upstream = Matrix::Zero(n, B);
    for (Eigen::Index b = 0; b < B; ++b)
      if (batch[b]->state.alive[u]) upstream(batch[b]->actions[u], b) = res.grads.mixer.q(u, b);
    res.grads.agents.push_back(backward(nets.agents[u], caches[u], upstream));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int episodes = 3000;
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.6;  // of all episodes
  int batch_size = 32;
  int buffer_episodes = 5000;  // capacity in episodes' worth of transitions
  int target_update_interval = 200;  // gradient updates between target syncs
  int update_period = 1;             // episodes between update rounds
  int updates_per_episode = 1;
  double learning_rate = 5e-4;
  double grad_clip = 10.0;  // global L2 norm; 0 disables
  std::vector<int> agent_hidden{64, 64};
  int mixer_embed = 32;
  MaskSchedule mask;
  std::uint64_t seed = 1;

  void validate() const {
    if (episodes < 1) throw ConfigError("train.episodes", "must be >= 1");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("train.gamma", "must be in [0, 1)");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0)) throw ConfigError("train.epsilon_start", "must be in [0, 1]");
    if (!(epsilon_end >= 0.0 && epsilon_end <= 1.0)) throw ConfigError("train.epsilon_end", "must be in [0, 1]");
    if (!(epsilon_decay_fraction > 0.0)) throw ConfigError("train.epsilon_decay_fraction", "must be > 0");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (buffer_episodes < 1) throw ConfigError("train.buffer_episodes", "must be >= 1");
    if (target_update_interval < 1) throw ConfigError("train.target_update_interval", "must be >= 1");
    if (update_period < 1) throw ConfigError("train.update_period", "must be >= 1");
    if (updates_per_episode < 1) throw ConfigError("train.updates_per_episode", "must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be > 0");
    if (grad_clip < 0.0) throw ConfigError("train.grad_clip", "must be >= 0");
    if (mixer_embed < 1) throw ConfigError("train.mixer_embed", "must be >= 1");
    for (int h : agent_hidden)
      if (h < 1) throw ConfigError("train.agent_hidden", "dims must be >= 1");
    if (mask.mode == MaskMode::fixed && mask.fixed_na < 1) throw ConfigError("train.fixed_na", "must be >= 1");
  }

  // Linear decay from start to end over the first fraction of episodes.
  double epsilon(int s) const {
    const double span = std::max(1.0, epsilon_decay_fraction * episodes);
    const double frac = std::min(1.0, (s - 1) / span);
    return epsilon_start + (epsilon_end - epsilon_start) * frac;
  }
};

struct CurvePoint {
  int episode = 0;
  double episode_return = 0.0;
  double epsilon = 0.0;
  int n_a = 0;
  double loss_mean = std::nan("");  // nan when no update ran
};

inline void write_learning_curve(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "episode,return,epsilon,N_A,loss_mean\n";
  for (const auto& p : curve)
    out << p.episode << ',' << format_double(p.episode_return) << ',' << format_double(p.epsilon) << ',' << p.n_a
        << ',' << format_double(p.loss_mean) << '\n';
}

using EnvFactory = std::function<Environment()>;

// Decentralised execution: each agent acts from its own view of the env.
class Policy {
public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual int act(const Environment& env, int agent, Rng& rng) const = 0;

  std::vector<int> joint_action(const Environment& env, Rng& rng) const {
    std::vector<int> actions(env.uav_count());
    for (int u = 0; u < env.uav_count(); ++u)
      actions[u] = env.uavs()[u].alive ? act(env, u, rng) : env.uavs()[u].pos;
    return actions;
  }
};

// Greedy masked policy over trained agent networks.
class LearnedPolicy : public Policy {
public:
  LearnedPolicy(std::string name, std::vector<DenseNet> agents, ScoreParams score, int n_a)
      : name_(std::move(name)), agents_(std::move(agents)), score_(std::move(score)), n_a_(n_a) {}

  std::string name() const override { return name_; }

  int act(const Environment& env, int agent, Rng&) const override {
    const ScoreParams sp = score_.resolved(env.graph());
    const ActionMask mask = mask_for(env, agent, sp, n_a_);
    const Observation o = env.observe(agent);
    return masked_argmax(agent_q(agents_.at(agent), o.features), mask.mu);
  }

  const std::vector<DenseNet>& agents() const { return agents_; }
  const ScoreParams& score() const { return score_; }
  int n_a() const { return n_a_; }

private:
  std::string name_;
  std::vector<DenseNet> agents_;
  ScoreParams score_;
  int n_a_;
};

struct TrainHooks {
  std::function<void(const QmixNets& online, const QmixNets& target)> on_sync;
  std::function<void(const Environment& env, int agent, const ActionMask& mask, int action)> on_action;
};

struct TrainResult {
  QmixNets nets;
  std::shared_ptr<LearnedPolicy> policy;
  std::vector<CurvePoint> curve;
  long updates = 0;
};

class QmixTrainer {
public:
  QmixTrainer(EnvFactory factory, TrainConfig cfg, ScoreParams score, std::string name = "q_sdam")
      : factory_(std::move(factory)), cfg_(std::move(cfg)), score_(std::move(score)), name_(std::move(name)) {
    cfg_.validate();
  }

  TrainResult train(const TrainHooks& hooks = {}) {
    Environment env = factory_();
    const RoadGraph& g = env.graph();
    const int n = g.vertex_count();
    const int C = env.uav_count();
    const ScoreParams sp = score_.resolved(g);

    Rng rng(cfg_.seed);
    TrainResult res;
    res.nets = make_qmix_nets(observation_size(g), state_size(g, C), n, C, cfg_.agent_hidden, cfg_.mixer_embed,
                              rng.next());
    QmixNets target = res.nets;
    std::vector<AdamState> agent_opt;
    for (const auto& a : res.nets.agents) agent_opt.push_back(AdamState::for_net(a, cfg_.learning_rate));
    std::vector<AdamState> mixer_opt{AdamState::for_net(res.nets.mixer.hyper_w1, cfg_.learning_rate),
                                     AdamState::for_net(res.nets.mixer.hyper_b1, cfg_.learning_rate),
                                     AdamState::for_net(res.nets.mixer.hyper_w2, cfg_.learning_rate),
                                     AdamState::for_net(res.nets.mixer.hyper_v, cfg_.learning_rate)};
    ReplayBuffer buffer(static_cast<std::size_t>(cfg_.buffer_episodes) * env.horizon());
    Rng act_rng = rng.fork();
    Rng sample_rng = rng.fork();

    for (int s = 1; s <= cfg_.episodes; ++s) {
      const int n_a = schedule_na(s, cfg_.episodes, n, cfg_.mask);
      const double eps = cfg_.epsilon(s);
      env.reset();
      auto masks = current_masks(env, sp, n_a);
      double ret = 0.0;
      while (!env.done()) {
        Transition tr;
        tr.state = env.frame();
        tr.actions.resize(C);
        for (int u = 0; u < C; ++u) {
          const UavState& uav = env.uavs()[u];
          if (!uav.alive) {
            tr.actions[u] = uav.pos;
            continue;
          }
          const Observation o = env.observe(u);
          const Vector q = agent_q(res.nets.agents[u], o.features);
          const int a = select_action(q, masks[u], eps, act_rng);
          if (!masks[u].allows(a)) throw std::logic_error("training selected a masked-out action");
          if (hooks.on_action) hooks.on_action(env, u, masks[u], a);
          tr.actions[u] = a;
        }
        const StepOutcome out = env.step(tr.actions);
        ret += out.reward;
        tr.reward = out.reward;
        tr.done = out.done;
        tr.next_state = env.frame();
        auto next = current_masks(env, sp, n_a);
        for (int u = 0; u < C; ++u) {
          tr.masks.push_back(masks[u].mu);
          tr.next_masks.push_back(next[u].mu);
        }
        masks = std::move(next);
        buffer.add(std::move(tr));
      }

      CurvePoint point{s, ret, eps, n_a, std::nan("")};
      if (buffer.size() >= static_cast<std::size_t>(cfg_.batch_size) && s % cfg_.update_period == 0) {
        double loss_sum = 0.0;
        for (int k = 0; k < cfg_.updates_per_episode; ++k) {
          const auto batch = buffer.sample(cfg_.batch_size, sample_rng);
          TdLossResult td = td_loss(batch, res.nets, target, cfg_.gamma);
          loss_sum += td.loss;
          if (cfg_.grad_clip > 0.0) {
            const double norm = std::sqrt(td.grads.squared_norm());
            if (norm > cfg_.grad_clip) td.grads.scale(cfg_.grad_clip / norm);
          }
          for (int u = 0; u < C; ++u) opt_step(res.nets.agents[u], td.grads.agents[u], agent_opt[u]);
          opt_step(res.nets.mixer.hyper_w1, td.grads.mixer.w1, mixer_opt[0]);
          opt_step(res.nets.mixer.hyper_b1, td.grads.mixer.b1, mixer_opt[1]);
          opt_step(res.nets.mixer.hyper_w2, td.grads.mixer.w2, mixer_opt[2]);
          opt_step(res.nets.mixer.hyper_v, td.grads.mixer.v, mixer_opt[3]);
          ++res.updates;
          if (res.updates % cfg_.target_update_interval == 0) {
            target = res.nets;
            if (hooks.on_sync) hooks.on_sync(res.nets, target);
          }
        }
        point.loss_mean = loss_sum / cfg_.updates_per_episode;
      }
      res.curve.push_back(point);
    }

    const int exec_na = schedule_na(cfg_.episodes, cfg_.episodes, n, cfg_.mask);
    res.policy = std::make_shared<LearnedPolicy>(name_, res.nets.agents, score_, exec_na);
    return res;
  }

  const TrainConfig& config() const { return cfg_; }

private:
  // Depleted agents get a one-hot mask on their current vertex.
  static std::vector<ActionMask> current_masks(const Environment& env, const ScoreParams& sp, int n_a) {
    std::vector<ActionMask> out;
    const int n = env.graph().vertex_count();
    for (int u = 0; u < env.uav_count(); ++u) {
      const UavState& uav = env.uavs()[u];
      if (uav.alive) {
        out.push_back(mask_for(env, u, sp, n_a));
      } else {
        ActionMask m{std::vector<char>(n, 0), 1};
        m.mu[uav.pos] = 1;
        out.push_back(std::move(m));
      }
    }
    return out;
  }

  EnvFactory factory_;
  TrainConfig cfg_;
  ScoreParams score_;
  std::string name_;
};

inline TrainResult train(const EnvFactory& factory, const TrainConfig& cfg, const ScoreParams& score,
                         const TrainHooks& hooks = {}) {
  return QmixTrainer(factory, cfg, score).train(hooks);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline MetricSummary summarize(std::span<const double> xs) {
  MetricSummary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  for (double x : xs) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(s.stddev / static_cast<double>(xs.size()));
  return s;
}

struct EvaluationReport {
  std::vector<MetricsReport> episodes;
  std::vector<EpisodeLog> logs;
  MetricSummary m_c, m_e, m_f, o1, o2, episode_return;
};

// epsilon = 0 rollouts; the rng only feeds stochastic policies.
inline EvaluationReport evaluate(const Policy& policy, const EnvFactory& factory, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw InputError("evaluate: episodes must be >= 1");
  Environment env = factory();
  Rng rng(seed);
  EvaluationReport rep;
  std::vector<double> mc, me, mf, o1, o2, ret;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset();
    while (!env.done()) env.step(policy.joint_action(env, rng));
    rep.logs.push_back(env.log());
    MetricsReport m = metrics(env.log());
    mc.push_back(m.m_c);
    me.push_back(m.m_e);
    mf.push_back(m.m_f);
    o1.push_back(m.o1);
    o2.push_back(m.o2);
    ret.push_back(env.log().episode_return());
    rep.episodes.push_back(std::move(m));
  }
  rep.m_c = summarize(mc);
  rep.m_e = summarize(me);
  rep.m_f = summarize(mf);
  rep.o1 = summarize(o1);
  rep.o2 = summarize(o2);
  rep.episode_return = summarize(ret);
  return rep;
}

}  // namespace uavnet
