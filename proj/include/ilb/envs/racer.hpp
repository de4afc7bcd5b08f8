#ifndef ILB_ENVS_RACER_HPP
#define ILB_ENVS_RACER_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "ilb/core.hpp"

namespace ilb {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Closed 2D centerline of constant width. Arc positions wrap around the
// total length.
struct Track {
  std::vector<Vec2> centerline;
  double width = 4.0;

  struct Nearest {
    double arc = 0.0;       // arc-length position of the projection
    double distance = 0.0;  // unsigned distance to the centerline
    double signed_offset = 0.0;  // positive on the left of travel
  };

  double total_length() const;
  Nearest nearest(const Vec2& p) const;
  Vec2 point_at(double arc) const;
  double tangent_heading(double arc) const;
  bool on_track(const Vec2& p) const;

  void save(std::ostream& out) const;
  static Track load(std::istream& in);
  void save_file(const std::string& path) const;
  static Track load_file(const std::string& path);

  // Wavy closed loop: a circle with sinusoidal radial wobble, sampled as a
  // polyline. Curvature varies in both directions so steering stays
  // nontrivial.
  static Track wavy_loop(double radius, double wobble, int lobes, double width, int vertices);
};

struct RacerConfig {
  Track track = Track::wavy_loop(25.0, 0.25, 4, 3.0, 128);
  int steps_per_lap = 200;
  double max_turn = 0.12;      // radians per step at full steering
  double pursuit_gain = 1.0;   // fraction of the heading error corrected per step
  double lookahead = 4.0;      // arc-length lookahead of the expert
  int raster_w = 25;           // lateral cells (echoes the coarse view raster)
  int raster_h = 19;           // forward cells (near to far)
  double view_near = 1.0;      // ground distance of the nearest raster row
  double view_ahead = 14.0;    // ground distance of the farthest row
  double view_half_angle = 0.62;  // radians; rows widen with distance
  double spawn_offset = 0.05;  // initial lateral offset as a fraction of half width
  double spawn_heading_noise = 0.01;
  double heading_noise = 0.03;  // per-step heading disturbance (uniform, radians)

  int feature_dim() const { return raster_w * raster_h; }
};

struct KartPose {
  Vec2 position;
  double heading = 0.0;
};

// Steer toward the centerline point `lookahead` ahead of the kart's
// projection; positive output turns right.
double pure_pursuit_steer(const Track& track, const KartPose& pose, double lookahead,
                          double pursuit_gain, double max_turn);

std::vector<double> racer_raster(const RacerConfig& cfg, const KartPose& pose);

class RacerEnv : public Environment {
 public:
  explicit RacerEnv(const RacerConfig& cfg);

  const EnvSchema& schema() const override { return schema_; }
  void reset(RngStream& rng) override;
  StateObs observe() const override;
  ActionVal expert_action() const override;
  bool step(const ActionVal& a, RngStream& rng) override;
  std::map<std::string, double> episode_metrics() const override;

  const KartPose& pose() const { return pose_; }
  void place(const KartPose& pose) { pose_ = pose; }
  int falls() const { return falls_; }

 private:
  const RacerConfig& cfg_;
  EnvSchema schema_;
  KartPose pose_;
  int falls_ = 0;
  int steps_ = 0;
};

class RacerModel : public EnvModel {
 public:
  explicit RacerModel(RacerConfig cfg = RacerConfig{});

  std::unique_ptr<Environment> make() const override;
  const EnvSchema& schema() const override { return schema_; }
  Featurizer featurizer() const override { return identity_featurizer(); }
  PolicyPtr expert_policy() const override { return env_expert_policy(); }
  std::string metric_name() const override { return "falls_per_lap"; }
  double metric_from(const std::vector<Trajectory>& trajs) const override;

  const RacerConfig& config() const { return cfg_; }

 private:
  RacerConfig cfg_;
  EnvSchema schema_;
};

}  // namespace ilb

#endif  // ILB_ENVS_RACER_HPP
