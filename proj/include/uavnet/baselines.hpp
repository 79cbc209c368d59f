#pragma once

#include <memory>
#include <string>

#include "uavnet/qmix.hpp"
#include "uavnet/sdam.hpp"

namespace uavnet {

// Highest action score, ties to the lowest vertex id.
inline int mu_greedy(const VertexConnectivityView& view, const RoadGraph& g, const ScoreParams& sp) {
  int best = 0;
  double best_score = score(view, 0, g, sp);
  for (int v = 1; v < g.vertex_count(); ++v) {
    const double s = score(view, v, g, sp);
    if (s > best_score) {
      best = v;
      best_score = s;
    }
  }
  return best;
}

inline int random_policy(int n_vertices, Rng& rng) {
  return static_cast<int>(rng.below(static_cast<std::uint64_t>(n_vertices)));
}

class MuGreedyPolicy : public Policy {
public:
  explicit MuGreedyPolicy(ScoreParams score) : score_(std::move(score)) {}

  std::string name() const override { return "mu_greedy"; }

  int act(const Environment& env, int agent, Rng&) const override {
    return mu_greedy(connectivity_view(env, agent), env.graph(), score_.resolved(env.graph()));
  }

private:
  ScoreParams score_;
};

class RandomPolicy : public Policy {
public:
  std::string name() const override { return "random"; }

  int act(const Environment& env, int, Rng& rng) const override {
    return random_policy(env.graph().vertex_count(), rng);
  }
};

enum class PolicyKind { q_sdam, q_sam, mu_greedy, random };

inline const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::q_sdam: return "q_sdam";
    case PolicyKind::q_sam: return "q_sam";
    case PolicyKind::mu_greedy: return "mu_greedy";
    case PolicyKind::random: return "random";
  }
  return "?";
}

inline PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "q_sdam") return PolicyKind::q_sdam;
  if (s == "q_sam") return PolicyKind::q_sam;
  if (s == "mu_greedy") return PolicyKind::mu_greedy;
  if (s == "random") return PolicyKind::random;
  throw ConfigError("policy", "expected q_sdam | q_sam | mu_greedy | random, got '" + s + "'");
}

inline bool is_learned(PolicyKind k) { return k == PolicyKind::q_sdam || k == PolicyKind::q_sam; }

// Default fixed mask width: a quarter of the action space.
inline int default_fixed_na(int n_vertices) { return std::max(1, n_vertices / 4); }

// Q-SDAM training with N_A held constant.
inline TrainResult q_sam_train(const EnvFactory& factory, TrainConfig cfg, const ScoreParams& score, int fixed_na,
                               const TrainHooks& hooks = {}) {
  cfg.mask = {MaskMode::fixed, fixed_na};
  return QmixTrainer(factory, std::move(cfg), score, "q_sam").train(hooks);
}

}  // namespace uavnet
