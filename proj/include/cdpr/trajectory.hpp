#pragma once

#include <string>
#include <vector>

#include "cdpr/types.hpp"

namespace cdpr {

struct TrajectorySample {
  Pose pose = Pose::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 accel = Vec3::Zero();

  Vec6 state() const {
    Vec6 x;
    x << pose, velocity;
    return x;
  }
};

/// Uniformly sampled reference; sample k is at time k * dt.
struct Trajectory {
  double dt = 0.0;
  std::vector<TrajectorySample> samples;

  double duration() const {
    return samples.empty() ? 0.0 : dt * static_cast<double>(samples.size() - 1);
  }
  /// Linear interpolation of pose, velocity and acceleration, clamped to the
  /// ends.
  TrajectorySample at(double t) const;

  /// Throws FormatError if consecutive samples are kinematically
  /// inconsistent, the ends are not at rest, or a value is not finite.
  void validate() const;
};

struct ProfileSample {
  double s = 0, ds = 0, dds = 0;
};

/// Time-optimal rest-to-rest motion over `distance` under speed and
/// acceleration caps. Trapezoidal, or triangular when the cruise phase
/// vanishes.
class TrapezoidProfile {
 public:
  TrapezoidProfile(double distance, double vmax, double amax);

  double duration() const { return 2 * t_accel_ + t_cruise_; }
  double peak_speed() const { return v_peak_; }
  double accel_time() const { return t_accel_; }
  double cruise_time() const { return t_cruise_; }

  /// Acceleration is right-continuous; past the end the profile is at rest.
  ProfileSample eval(double t) const;

 private:
  double distance_, amax_;
  double t_accel_, t_cruise_, v_peak_;
};

/// Samples at k * dt for k = 0..ceil(T/dt); the last sample is at rest at
/// `distance`.
std::vector<ProfileSample> trapezoidal_profile(double distance, double vmax,
                                               double amax, double dt);

struct DiamondOptions {
  Vec2 center = Vec2::Zero();
  double area_w = 1.5;
  double area_h = 1.0;
  int n_rings = 4;
  double vmax = 0.5;
  double amax = 1.0;
  double dt = 0.01;
  /// Rest at the first vertex before motion starts (at least one sample).
  double hold = 1.0;
};

/// Ring scale of ring i out of n: 1, 0.75, 0.5, 0.25 for n = 4.
double ring_scale(int ring, int n_rings);

/// Vertex tour: each ring counterclockwise from its +x vertex, largest ring
/// first, returning to the +x vertex before stepping inward.
std::vector<Vec2> diamond_vertices(const DiamondOptions& opts);

/// Stop-at-vertex tour of the diamond vertices with theta held at zero.
Trajectory diamond_reference(const DiamondOptions& opts);

/// Straight rest-to-rest moves through `waypoints` (poses), used for short
/// test references.
Trajectory waypoint_reference(const std::vector<Pose>& waypoints, double vmax,
                              double amax, double dt, double hold);

void save_trajectory(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory(const std::string& path);

}  // namespace cdpr
