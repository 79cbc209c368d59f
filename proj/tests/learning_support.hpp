#pragma once

#include <limits>
#include <vector>

#include "support.hpp"
#include "uavnet/baselines.hpp"
#include "uavnet/qmix.hpp"

namespace testsupport {

using namespace uavnet;

// Transitions from random-action rollouts, masks recorded the way the
// trainer records them.
inline std::vector<Transition> random_transitions(const EnvFactory& factory, int count, int n_a, Rng& rng) {
  Environment env = factory();
  const ScoreParams sp = ScoreParams{}.resolved(env.graph());
  const int n = env.graph().vertex_count();
  std::vector<Transition> out;
  env.reset();
  while (static_cast<int>(out.size()) < count) {
    if (env.done()) env.reset();
    Transition tr;
    tr.state = env.frame();
    for (int u = 0; u < env.uav_count(); ++u) tr.masks.push_back(mask_for(env, u, sp, n_a).mu);
    for (int u = 0; u < env.uav_count(); ++u) tr.actions.push_back(static_cast<int>(rng.below(n)));
    auto res = env.step(tr.actions);
    tr.reward = res.reward;
    tr.done = res.done;
    tr.next_state = env.frame();
    for (int u = 0; u < env.uav_count(); ++u) tr.next_masks.push_back(mask_for(env, u, sp, n_a).mu);
    out.push_back(std::move(tr));
  }
  return out;
}

// Every piecewise choice inside td_loss for the online nets: ReLU gates,
// the double-Q argmax, and the signs under the mixer's absolute values.
inline std::vector<char> td_pattern(std::span<const Transition* const> batch, const QmixNets& nets) {
  const int n = nets.agents.front().output_dim();
  const BatchInputs in = build_batch_inputs(batch, n);
  std::vector<char> sig;
  for (std::size_t u = 0; u < nets.agents.size(); ++u) {
    ForwardCache c;
    forward(nets.agents[u], in.obs[u], &c);
    auto p = relu_pattern(c, nets.agents[u]);
    sig.insert(sig.end(), p.begin(), p.end());
    const Matrix qn = forward(nets.agents[u], in.next_obs[u], &c);
    p = relu_pattern(c, nets.agents[u]);
    sig.insert(sig.end(), p.begin(), p.end());
    for (Eigen::Index b = 0; b < qn.cols(); ++b)
      sig.push_back(static_cast<char>(masked_argmax(qn.col(b), batch[b]->next_masks[u])));
  }
  MixerCache mc;
  Matrix q = Matrix::Ones(nets.mixer.agents, in.states.cols());
  mix(q, in.states, nets.mixer, &mc);
  for (Eigen::Index i = 0; i < mc.raw_w1.size(); ++i) sig.push_back(mc.raw_w1.data()[i] > 0);
  for (Eigen::Index i = 0; i < mc.raw_w2.size(); ++i) sig.push_back(mc.raw_w2.data()[i] > 0);
  auto p = relu_pattern(mc.v, nets.mixer.hyper_v);
  sig.insert(sig.end(), p.begin(), p.end());
  return sig;
}

inline GradCheckResult td_gradient_check(std::span<const Transition* const> batch, QmixNets nets,
                                         const QmixNets& target, double gamma, double tol) {
  TdLossResult base = td_loss(batch, nets, target, gamma);
  std::vector<double*> params;
  std::vector<double> analytic;
  for_each_parameter(nets, &base.grads, [&](double& p, double g) {
    params.push_back(&p);
    analytic.push_back(g);
  });
  auto loss = [&] { return td_loss(batch, nets, target, gamma).loss; };
  auto pattern = [&] { return td_pattern(batch, nets); };
  return check_gradients(params, analytic, loss, pattern, tol);
}

// Smallest finite-difference slope dQ_tot/dq_u at one random point.
inline double monotonicity_probe(const MixerNet& mixer, Rng& rng, double h = 1e-6) {
  std::vector<double> q(mixer.agents), s(mixer.state_dim());
  for (auto& x : q) x = rng.uniform(-5, 5);
  for (auto& x : s) x = rng.uniform(-1, 1);
  double worst = std::numeric_limits<double>::infinity();
  for (int u = 0; u < mixer.agents; ++u) {
    auto up = q, down = q;
    up[u] += h;
    down[u] -= h;
    worst = std::min(worst, (mix(up, s, mixer) - mix(down, s, mixer)) / (2 * h));
  }
  return worst;
}

inline EnvFactory fig2_factory(int uavs, int horizon = 6) {
  auto g = std::make_shared<const RoadGraph>(load_roadmap(fixture("fig2.json")));
  auto t = std::make_shared<const TrafficTrace>(synth_trace(*g, {6, 0.5, 3}, horizon));
  EnvConfig cfg;
  cfg.uavs = uavs;
  return [g, t, cfg] { return Environment(g, t, cfg); };
}

inline EnvFactory grid5_factory(int uavs, int horizon = 20) {
  auto g = grid5();
  auto t = grid5_trace(*g, horizon);
  EnvConfig cfg;
  cfg.uavs = uavs;
  return [g, t, cfg] { return Environment(g, t, cfg); };
}

inline TrainConfig small_train_config(int episodes) {
  TrainConfig c;
  c.episodes = episodes;
  c.batch_size = 8;
  c.buffer_episodes = 50;
  c.target_update_interval = 5;
  c.agent_hidden = {16};
  c.mixer_embed = 8;
  return c;
}

inline bool same_curves(const std::vector<CurvePoint>& a, const std::vector<CurvePoint>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    const bool loss_same = (std::isnan(x.loss_mean) && std::isnan(y.loss_mean)) || x.loss_mean == y.loss_mean;
    if (x.episode != y.episode || x.episode_return != y.episode_return || x.epsilon != y.epsilon || x.n_a != y.n_a ||
        !loss_same)
      return false;
  }
  return true;
}

}  // namespace testsupport
