#include "ilb/envs/platformer.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

#include "ilb/rng.hpp"

namespace ilb {

// ---------------------------------------------------------------------------
// Stage
// ---------------------------------------------------------------------------

void Stage::save(std::ostream& out) const {
  out << "ilb-stage v1 length=" << length << " height=" << height << " seed=" << stage_seed
      << "\n";
  for (int x = 0; x < length; ++x) {
    out << "T";
    for (int y = 0; y < height; ++y) out << ' ' << (solid(x, y) ? 1 : 0);
    out << '\n';
  }
}

Stage Stage::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty stage file");
  Stage st;
  {
    std::istringstream head(line);
    std::string magic, ver, l, h, s;
    head >> magic >> ver >> l >> h >> s;
    if (magic != "ilb-stage" || ver != "v1" || l.rfind("length=", 0) != 0 ||
        h.rfind("height=", 0) != 0)
      throw IoError("bad stage header: " + line);
    st.length = std::atoi(l.c_str() + 7);
    st.height = std::atoi(h.c_str() + 7);
    if (s.rfind("seed=", 0) == 0) st.stage_seed = std::strtoull(s.c_str() + 5, nullptr, 10);
  }
  if (st.length < 1 || st.height < 1) throw IoError("bad stage shape");
  st.solid_cells.assign(static_cast<std::size_t>(st.length) * st.height, 0);
  int x = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != "T" || x >= st.length)
      throw IoError("stage line " + std::to_string(line_no) + ": bad tile row");
    for (int y = 0; y < st.height; ++y) {
      int v;
      if (!(ls >> v)) throw IoError("stage line " + std::to_string(line_no) + ": short tile row");
      st.set_solid(x, y, v != 0);
    }
    ++x;
  }
  if (x != st.length) throw IoError("stage column count mismatch");
  return st;
}

Stage Stage::generate(int difficulty, std::uint64_t stage_seed, int length) {
  if (difficulty < 1) throw ConfigError("difficulty starts at 1");
  Stage st;
  st.length = length;
  st.height = 10;
  st.stage_seed = stage_seed;
  st.solid_cells.assign(static_cast<std::size_t>(length) * st.height, 0);
  for (int x = 0; x < length; ++x) st.set_solid(x, 0, true);  // ground line

  RngStream rng = RngStream::child(0x57a6e, stage_seed, static_cast<std::uint64_t>(difficulty));
  int x = 12;  // flat start zone
  while (x < length - 12) {
    const bool make_gap = rng.bernoulli(0.35);
    if (make_gap) {
      const int width = 2 + static_cast<int>(rng.uniform_int(std::min(3, difficulty)));
      for (int g = 0; g < width && x + g < length - 12; ++g) st.set_solid(x + g, 0, false);
      x += width;
    } else {
      const int h = rng.bernoulli(0.4) ? 2 : 1;
      for (int y = 1; y <= h; ++y) st.set_solid(x, y, true);
      x += 1;
    }
    x += 5 + static_cast<int>(rng.uniform_int(6));  // spacing between features
  }
  return st;
}

// ---------------------------------------------------------------------------
// Physics
// ---------------------------------------------------------------------------

AgentState platformer_step(const Stage& stage, const AgentState& s, Buttons b) {
  AgentState n = s;
  if (n.dead || n.completed) return n;
  if (b.jump && n.on_ground) {
    n.vy = 2;
    n.on_ground = false;
  }
  // horizontal, cell by cell; a solid cell blocks the rest of the move
  const int dir = (b.right ? 1 : 0) - (b.left ? 1 : 0);
  const int steps = dir == 0 ? 0 : 1 + (b.speed ? 1 : 0);
  for (int k = 0; k < steps; ++k) {
    const int nx = n.x + dir;
    if (stage.solid(nx, n.y)) break;
    n.x = nx;
  }
  // vertical
  if (n.vy > 0) {
    for (int k = 0; k < n.vy; ++k) {
      if (stage.solid(n.x, n.y + 1)) {
        n.vy = 0;
        break;
      }
      ++n.y;
    }
  } else if (n.vy < 0) {
    for (int k = 0; k < -n.vy; ++k) {
      if (stage.solid(n.x, n.y - 1)) break;
      --n.y;
    }
  }
  n.on_ground = stage.solid(n.x, n.y - 1);
  if (n.on_ground) n.vy = 0;
  else n.vy = std::max(n.vy - 1, -2);
  if (n.y < 0) n.dead = true;
  if (n.x >= stage.length - 1) n.completed = true;
  return n;
}

// ---------------------------------------------------------------------------
// Planner expert
// ---------------------------------------------------------------------------

namespace {

// candidate actions in preference order: plain running first, jumps only
// when they improve the outcome
const Buttons kPlanActions[] = {
    Buttons{false, true, false, true},   // right + speed
    Buttons{false, true, false, false},  // right
    Buttons{false, true, true, true},    // right + speed + jump
    Buttons{false, true, true, false},   // right + jump
    Buttons{false, false, false, false}, // noop
    Buttons{false, false, true, false},  // jump in place
    Buttons{true, false, false, false},  // left
};

struct PlanNode {
  AgentState state;
  int first_action;  // index into kPlanActions
  int survived;      // steps survived so far
  int crowding;      // grounded steps spent right in front of a wall
};

std::uint64_t pack_state(const AgentState& s) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s.x)) << 16) ^
         (static_cast<std::uint64_t>(s.y + 4) << 8) ^
         (static_cast<std::uint64_t>(s.vy + 3) << 4) ^ (s.on_ground ? 2 : 0) ^
         (s.dead ? 1 : 0);
}

// grounded with a wall at body height within the next few cells
bool crowds_wall(const Stage& stage, const AgentState& s) {
  if (!s.on_ground) return false;
  for (int d = 1; d <= 4; ++d) {
    if (stage.solid(s.x + d, s.y) || stage.solid(s.x + d, s.y + 1)) return true;
  }
  return false;
}

}  // namespace

Buttons planner_expert(const Stage& stage, const AgentState& s, int plan_depth) {
  // best = (alive at horizon, final x, low wall crowding, preference rank of
  // the first action); penalizing crowding makes the planner take jumps
  // with a comfortable margin instead of at the last moment
  int best_action = 0;
  bool best_alive = false;
  int best_x = std::numeric_limits<int>::min();
  int best_crowding = std::numeric_limits<int>::max();
  int best_survived = -1;

  std::deque<PlanNode> frontier;
  frontier.push_back(PlanNode{s, -1, 0, 0});
  // packed state -> (crowding, first action rank) of the best path found
  std::unordered_map<std::uint64_t, std::pair<int, int>> seen;
  for (int depth = 0; depth < plan_depth; ++depth) {
    std::deque<PlanNode> next;
    while (!frontier.empty()) {
      const PlanNode node = frontier.front();
      frontier.pop_front();
      for (int a = 0; a < 7; ++a) {
        const AgentState child = platformer_step(stage, node.state, kPlanActions[a]);
        const int first = node.first_action < 0 ? a : node.first_action;
        const int survived = child.dead ? node.survived : node.survived + 1;
        const int crowding = node.crowding + (crowds_wall(stage, child) ? 1 : 0);
        if (child.dead) {
          if (!best_alive && survived > best_survived) {
            best_survived = survived;
            best_x = child.x;
            best_action = first;
          }
          continue;
        }
        if (child.completed || depth == plan_depth - 1) {
          const bool better =
              !best_alive || child.x > best_x || (child.x == best_x && crowding < best_crowding);
          if (better) {
            best_alive = true;
            best_x = child.x;
            best_crowding = crowding;
            best_action = first;
            best_survived = survived;
          }
          if (child.completed) continue;
        }
        const std::uint64_t key = pack_state(child);
        const auto it = seen.find(key);
        const std::pair<int, int> mark{crowding, first};
        if (it != seen.end() && it->second <= mark) continue;
        if (it == seen.end()) seen.emplace(key, mark);
        else it->second = mark;
        next.push_back(PlanNode{child, first, survived, crowding});
      }
    }
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  return kPlanActions[best_action];
}

bool PlannerCache::lookup(std::uint64_t key, int& label) {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = map_.find(key);
  if (it == map_.end()) return false;
  label = it->second;
  return true;
}

void PlannerCache::store(std::uint64_t key, int label) {
  std::lock_guard<std::mutex> lock(mu_);
  map_.emplace(key, label);
}

// ---------------------------------------------------------------------------
// PlatformerEnv
// ---------------------------------------------------------------------------

PlatformerEnv::PlatformerEnv(const PlatformerConfig& cfg, std::shared_ptr<PlannerCache> cache)
    : cfg_(cfg), cache_(std::move(cache)) {
  schema_.name = "platformer";
  schema_.feature_dim = cfg.feature_dim();
  schema_.action = ActionSpec::discrete(16, /*bits=*/true);
  recent_actions_.assign(cfg.action_history, 0);
}

void PlatformerEnv::load_stage(Stage stage) {
  stage_ = std::move(stage);
  agent_ = AgentState{};
  recent_actions_.assign(cfg_.action_history, 0);
  steps_ = 0;
  stuck_streak_ = 0;
  max_stuck_streak_ = 0;
}

void PlatformerEnv::reset(RngStream& rng) {
  const std::uint64_t seed =
      cfg_.stage_seeds[rng.uniform_int(cfg_.stage_seeds.size())];
  load_stage(Stage::generate(cfg_.difficulty, seed, cfg_.stage_length));
}

StateObs PlatformerEnv::observe() const {
  std::vector<double> f;
  f.reserve(schema_.feature_dim);
  for (int dx = -cfg_.window_back; dx <= cfg_.window_ahead; ++dx) {
    for (int y = 0; y < cfg_.window_height; ++y) {
      f.push_back(stage_.solid(agent_.x + dx, y) ? 1.0 : 0.0);
    }
  }
  for (int v = -2; v <= 2; ++v) f.push_back(agent_.vy == v ? 1.0 : 0.0);
  f.push_back(agent_.on_ground ? 1.0 : 0.0);
  for (int a : recent_actions_) {
    for (int bit = 0; bit < 4; ++bit) f.push_back((a >> bit) & 1 ? 1.0 : 0.0);
  }
  return StateObs::from_features(std::move(f));
}

ActionVal PlatformerEnv::expert_action() const {
  const std::uint64_t key = mix64(stage_.stage_seed) ^ pack_state(agent_);
  int label;
  if (cache_ && cache_->lookup(key, label)) return ActionVal::make_discrete(label);
  label = planner_expert(stage_, agent_, cfg_.plan_depth).label();
  if (cache_) cache_->store(key, label);
  return ActionVal::make_discrete(label);
}

bool PlatformerEnv::step(const ActionVal& a, RngStream& rng) {
  if (!a.is_discrete() || a.label() < 0 || a.label() >= 16)
    throw SchemaError("platformer expects a 4-bit button label");
  const int prev_x = agent_.x;
  Buttons b = Buttons::from_label(a.label());
  if (cfg_.slip_prob > 0 && agent_.on_ground && !b.jump && rng.bernoulli(cfg_.slip_prob)) {
    b.left = b.right = false;  // stumble: the run stalls for one step
  }
  agent_ = platformer_step(stage_, agent_, b);
  recent_actions_.erase(recent_actions_.begin());
  recent_actions_.push_back(a.label());
  ++steps_;
  // stalled against a wall at running height
  if (agent_.x == prev_x && !agent_.dead &&
      (stage_.solid(agent_.x + 1, agent_.y) || stage_.solid(agent_.x + 1, agent_.y + 1))) {
    ++stuck_streak_;
  } else {
    stuck_streak_ = 0;
  }
  max_stuck_streak_ = std::max(max_stuck_streak_, stuck_streak_);
  return !agent_.dead && !agent_.completed;
}

std::map<std::string, double> PlatformerEnv::episode_metrics() const {
  return {{"distance", static_cast<double>(agent_.x)},
          {"completed", agent_.completed ? 1.0 : 0.0},
          {"died", agent_.dead ? 1.0 : 0.0},
          {"max_stuck_streak", static_cast<double>(max_stuck_streak_)}};
}

// ---------------------------------------------------------------------------
// PlatformerModel
// ---------------------------------------------------------------------------

PlatformerModel::PlatformerModel(PlatformerConfig cfg)
    : cfg_(std::move(cfg)), cache_(std::make_shared<PlannerCache>()) {
  schema_.name = "platformer";
  schema_.feature_dim = cfg_.feature_dim();
  schema_.action = ActionSpec::discrete(16, /*bits=*/true);
}

std::unique_ptr<Environment> PlatformerModel::make() const {
  return std::make_unique<PlatformerEnv>(cfg_, cache_);
}

double PlatformerModel::metric_from(const std::vector<Trajectory>& trajs) const {
  double total = 0.0;
  for (const auto& t : trajs) total += t.metrics.at("distance");
  return trajs.empty() ? 0.0 : total / trajs.size();
}

}  // namespace ilb
