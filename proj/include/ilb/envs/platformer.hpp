#ifndef ILB_ENVS_PLATFORMER_HPP
#define ILB_ENVS_PLATFORMER_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ilb/core.hpp"

namespace ilb {

// Side-scrolling tile corridor. Row 0 is the ground line; gap columns have
// no ground, obstacle columns carry a wall of height 1 or 2.
struct Stage {
  int length = 0;
  int height = 10;
  std::vector<std::uint8_t> solid_cells;  // [x * height + y]
  std::uint64_t stage_seed = 0;

  bool solid(int x, int y) const {
    if (y < 0 || y >= height) return false;
    if (x < 0) return true;       // wall behind the start
    if (x >= length) return false;
    return solid_cells[static_cast<std::size_t>(x) * height + y] != 0;
  }
  void set_solid(int x, int y, bool v) {
    solid_cells[static_cast<std::size_t>(x) * height + y] = v ? 1 : 0;
  }

  void save(std::ostream& out) const;
  static Stage load(std::istream& in);

  // Deterministic generation; difficulty scales obstacle density and size.
  static Stage generate(int difficulty, std::uint64_t stage_seed, int length = 300);
};

// Four binary buttons packed into one discrete label.
struct Buttons {
  bool left = false, right = false, jump = false, speed = false;
  static Buttons from_label(int label) {
    return Buttons{(label & 1) != 0, (label & 2) != 0, (label & 4) != 0, (label & 8) != 0};
  }
  int label() const { return (left ? 1 : 0) | (right ? 2 : 0) | (jump ? 4 : 0) | (speed ? 8 : 0); }
};

struct AgentState {
  int x = 2;
  int y = 1;
  int vy = 0;
  bool on_ground = true;
  bool dead = false;
  bool completed = false;
};

// One physics step; integer cell dynamics with a jump impulse of +2 and
// unit gravity (terminal fall speed 2).
AgentState platformer_step(const Stage& stage, const AgentState& s, Buttons b);

struct PlatformerConfig {
  int difficulty = 1;
  std::vector<std::uint64_t> stage_seeds = {0, 1, 2, 3, 4, 5, 6, 7};
  int stage_length = 300;
  int window_back = 4;
  int window_ahead = 10;
  int window_height = 9;
  int action_history = 6;
  int plan_depth = 7;
  // chance of a running stumble (horizontal move cancelled) per grounded
  // non-jump step; varies how obstacles are approached without touching
  // jump arcs
  double slip_prob = 0.12;

  int feature_dim() const {
    return (window_back + window_ahead + 1) * window_height + 5 /*vy one-hot*/ +
           1 /*on ground*/ + 4 * action_history;
  }
};

// Breadth-first search over the true dynamics up to plan_depth steps,
// maximizing distance among surviving plans; if nothing survives, the
// longest-surviving plan is used. Tie-break prefers plain running right,
// with jumping only when it pays.
Buttons planner_expert(const Stage& stage, const AgentState& s, int plan_depth);

class PlannerCache {
 public:
  bool lookup(std::uint64_t key, int& label);
  void store(std::uint64_t key, int label);

 private:
  std::mutex mu_;
  std::unordered_map<std::uint64_t, int> map_;
};

class PlatformerEnv : public Environment {
 public:
  PlatformerEnv(const PlatformerConfig& cfg, std::shared_ptr<PlannerCache> cache);

  const EnvSchema& schema() const override { return schema_; }
  void reset(RngStream& rng) override;
  StateObs observe() const override;
  ActionVal expert_action() const override;
  bool step(const ActionVal& a, RngStream& rng) override;
  std::map<std::string, double> episode_metrics() const override;

  const Stage& stage() const { return stage_; }
  const AgentState& agent() const { return agent_; }
  void load_stage(Stage stage);  // fixes the stage for the episode

 private:
  const PlatformerConfig& cfg_;
  std::shared_ptr<PlannerCache> cache_;
  EnvSchema schema_;
  Stage stage_;
  AgentState agent_;
  std::vector<int> recent_actions_;
  int steps_ = 0;
  int stuck_streak_ = 0;
  int max_stuck_streak_ = 0;
};

class PlatformerModel : public EnvModel {
 public:
  explicit PlatformerModel(PlatformerConfig cfg = PlatformerConfig{});

  std::unique_ptr<Environment> make() const override;
  const EnvSchema& schema() const override { return schema_; }
  Featurizer featurizer() const override { return identity_featurizer(); }
  PolicyPtr expert_policy() const override { return env_expert_policy(); }
  std::string metric_name() const override { return "mean_distance"; }
  double metric_from(const std::vector<Trajectory>& trajs) const override;

  const PlatformerConfig& config() const { return cfg_; }

 private:
  PlatformerConfig cfg_;
  EnvSchema schema_;
  std::shared_ptr<PlannerCache> cache_;
};

}  // namespace ilb

#endif  // ILB_ENVS_PLATFORMER_HPP
