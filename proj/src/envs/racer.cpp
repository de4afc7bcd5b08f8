#include "ilb/envs/racer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ilb {

namespace {

double wrap_angle(double a) {
  while (a > std::numbers::pi) a -= 2 * std::numbers::pi;
  while (a < -std::numbers::pi) a += 2 * std::numbers::pi;
  return a;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Track
// ---------------------------------------------------------------------------

double Track::total_length() const {
  double len = 0.0;
  const std::size_t n = centerline.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = centerline[i];
    const Vec2& b = centerline[(i + 1) % n];
    len += std::hypot(b.x - a.x, b.y - a.y);
  }
  return len;
}

Track::Nearest Track::nearest(const Vec2& p) const {
  const std::size_t n = centerline.size();
  Nearest best;
  best.distance = 1e300;
  double arc_acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = centerline[i];
    const Vec2& b = centerline[(i + 1) % n];
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double seg_len2 = dx * dx + dy * dy;
    const double seg_len = std::sqrt(seg_len2);
    double t = seg_len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / seg_len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double qx = a.x + t * dx, qy = a.y + t * dy;
    const double dist = std::hypot(p.x - qx, p.y - qy);
    if (dist < best.distance) {
      best.distance = dist;
      best.arc = arc_acc + t * seg_len;
      // cross product of the tangent with the offset: positive = left
      const double cross = dx * (p.y - qy) - dy * (p.x - qx);
      best.signed_offset = cross >= 0 ? dist : -dist;
    }
    arc_acc += seg_len;
  }
  return best;
}

Vec2 Track::point_at(double arc) const {
  const double total = total_length();
  double s = std::fmod(arc, total);
  if (s < 0) s += total;
  const std::size_t n = centerline.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = centerline[i];
    const Vec2& b = centerline[(i + 1) % n];
    const double seg_len = std::hypot(b.x - a.x, b.y - a.y);
    if (s <= seg_len) {
      const double t = seg_len > 0 ? s / seg_len : 0.0;
      return Vec2{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    }
    s -= seg_len;
  }
  return centerline.front();
}

double Track::tangent_heading(double arc) const {
  const double total = total_length();
  double s = std::fmod(arc, total);
  if (s < 0) s += total;
  const std::size_t n = centerline.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = centerline[i];
    const Vec2& b = centerline[(i + 1) % n];
    const double seg_len = std::hypot(b.x - a.x, b.y - a.y);
    if (s <= seg_len) return std::atan2(b.y - a.y, b.x - a.x);
    s -= seg_len;
  }
  return 0.0;
}

bool Track::on_track(const Vec2& p) const { return nearest(p).distance <= width / 2.0; }

void Track::save(std::ostream& out) const {
  out << "ilb-track v1 width=" << fmt_double(width) << " vertices=" << centerline.size() << "\n";
  for (const Vec2& v : centerline) out << "V " << fmt_double(v.x) << ' ' << fmt_double(v.y) << '\n';
}

Track Track::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty track file");
  Track t;
  std::size_t n_vertices = 0;
  {
    std::istringstream head(line);
    std::string magic, ver, w, n;
    head >> magic >> ver >> w >> n;
    if (magic != "ilb-track" || ver != "v1" || w.rfind("width=", 0) != 0 ||
        n.rfind("vertices=", 0) != 0)
      throw IoError("bad track header: " + line);
    t.width = std::atof(w.c_str() + 6);
    n_vertices = std::strtoul(n.c_str() + 9, nullptr, 10);
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    Vec2 v;
    if (!(ls >> tag >> v.x >> v.y) || tag != "V")
      throw IoError("track line " + std::to_string(line_no) + ": bad vertex");
    t.centerline.push_back(v);
  }
  if (t.centerline.size() != n_vertices || t.centerline.size() < 3)
    throw IoError("track vertex count mismatch");
  return t;
}

void Track::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  save(out);
}

Track Track::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return load(in);
}

Track Track::wavy_loop(double radius, double wobble, int lobes, double width, int vertices) {
  Track t;
  t.width = width;
  t.centerline.reserve(vertices);
  for (int i = 0; i < vertices; ++i) {
    const double phi = 2 * std::numbers::pi * i / vertices;
    const double r = radius * (1.0 + wobble * std::sin(lobes * phi));
    t.centerline.push_back(Vec2{r * std::cos(phi), r * std::sin(phi)});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Expert and features
// ---------------------------------------------------------------------------

double pure_pursuit_steer(const Track& track, const KartPose& pose, double lookahead,
                          double pursuit_gain, double max_turn) {
  const Track::Nearest near = track.nearest(pose.position);
  const Vec2 target = track.point_at(near.arc + lookahead);
  const double bearing =
      std::atan2(target.y - pose.position.y, target.x - pose.position.x);
  const double err = wrap_angle(bearing - pose.heading);
  // positive steer turns clockwise (rightward)
  return std::clamp(-pursuit_gain * err / max_turn, -1.0, 1.0);
}

std::vector<double> racer_raster(const RacerConfig& cfg, const KartPose& pose) {
  // perspective-style ground view: rows at log-spaced distances, each row
  // spanning a fixed angular width, like a resized forward camera image
  std::vector<double> cells(cfg.feature_dim(), 0.0);
  const double ch = std::cos(pose.heading), sh = std::sin(pose.heading);
  const double rx = sh, ry = -ch;  // right-hand unit vector of the kart frame
  const double ratio = cfg.view_ahead / cfg.view_near;
  const double tan_half = std::tan(cfg.view_half_angle);
  int idx = 0;
  for (int j = 0; j < cfg.raster_h; ++j) {
    const double frac = cfg.raster_h > 1 ? static_cast<double>(j) / (cfg.raster_h - 1) : 0.0;
    const double f = cfg.view_near * std::pow(ratio, frac);
    const double halfwidth = f * tan_half;
    for (int i = 0; i < cfg.raster_w; ++i, ++idx) {
      const double l = halfwidth * (2.0 * (i + 0.5) / cfg.raster_w - 1.0);
      const Vec2 p{pose.position.x + f * ch + l * rx, pose.position.y + f * sh + l * ry};
      cells[idx] = cfg.track.on_track(p) ? 1.0 : 0.0;
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// RacerEnv
// ---------------------------------------------------------------------------

RacerEnv::RacerEnv(const RacerConfig& cfg) : cfg_(cfg) {
  schema_.name = "racer";
  schema_.feature_dim = cfg.feature_dim();
  schema_.action = ActionSpec::continuous({-1.0}, {1.0});
}

void RacerEnv::reset(RngStream& rng) {
  const double total = cfg_.track.total_length();
  const double arc = rng.uniform(0.0, total);
  const double offset =
      rng.uniform(-1.0, 1.0) * cfg_.spawn_offset * cfg_.track.width / 2.0;
  const double heading = cfg_.track.tangent_heading(arc);
  const Vec2 center = cfg_.track.point_at(arc);
  // left-hand normal
  const double nx = -std::sin(heading), ny = std::cos(heading);
  pose_.position = Vec2{center.x + offset * nx, center.y + offset * ny};
  pose_.heading = heading + rng.uniform(-1.0, 1.0) * cfg_.spawn_heading_noise;
  falls_ = 0;
  steps_ = 0;
}

StateObs RacerEnv::observe() const { return StateObs::from_features(racer_raster(cfg_, pose_)); }

ActionVal RacerEnv::expert_action() const {
  const double steer =
      pure_pursuit_steer(cfg_.track, pose_, cfg_.lookahead, cfg_.pursuit_gain, cfg_.max_turn);
  return ActionVal::make_continuous({steer}, schema_.action);
}

bool RacerEnv::step(const ActionVal& a, RngStream& rng) {
  if (a.is_discrete() || a.values().size() != 1)
    throw SchemaError("racer expects a one-dimensional continuous steer");
  const double steer = std::clamp(a.values()[0], -1.0, 1.0);
  const double disturbance =
      cfg_.heading_noise > 0 ? rng.uniform(-cfg_.heading_noise, cfg_.heading_noise) : 0.0;
  pose_.heading = wrap_angle(pose_.heading - steer * cfg_.max_turn + disturbance);
  const double ds = cfg_.track.total_length() / cfg_.steps_per_lap;
  pose_.position.x += ds * std::cos(pose_.heading);
  pose_.position.y += ds * std::sin(pose_.heading);
  ++steps_;
  const Track::Nearest near = cfg_.track.nearest(pose_.position);
  if (near.distance > cfg_.track.width / 2.0) {
    // off the track: count a fall and reposition at the center
    ++falls_;
    pose_.position = cfg_.track.point_at(near.arc);
    pose_.heading = cfg_.track.tangent_heading(near.arc);
  }
  return true;  // fixed-horizon episodes
}

std::map<std::string, double> RacerEnv::episode_metrics() const {
  const double laps = static_cast<double>(steps_) / cfg_.steps_per_lap;
  return {{"falls", static_cast<double>(falls_)},
          {"laps", laps},
          {"falls_per_lap", laps > 0 ? falls_ / laps : 0.0}};
}

// ---------------------------------------------------------------------------
// RacerModel
// ---------------------------------------------------------------------------

RacerModel::RacerModel(RacerConfig cfg) : cfg_(std::move(cfg)) {
  schema_.name = "racer";
  schema_.feature_dim = cfg_.feature_dim();
  schema_.action = ActionSpec::continuous({-1.0}, {1.0});
}

std::unique_ptr<Environment> RacerModel::make() const {
  return std::make_unique<RacerEnv>(cfg_);
}

double RacerModel::metric_from(const std::vector<Trajectory>& trajs) const {
  double falls = 0.0, laps = 0.0;
  for (const auto& t : trajs) {
    falls += t.metrics.at("falls");
    laps += t.metrics.at("laps");
  }
  return laps > 0 ? falls / laps : 0.0;
}

}  // namespace ilb
