#include "cdpr/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdpr/errors.hpp"
#include "csv.hpp"

namespace cdpr {

namespace {

const char* kTrajectoryHeader = "t,theta,x,y,dtheta,dx,dy,ddtheta,ddx,ddy";

void require_positive(double v, const char* name) {
  if (!(v > 0) || !std::isfinite(v)) {
    throw Error(std::string(name) + " must be positive and finite");
  }
}

}  // namespace

TrajectorySample Trajectory::at(double t) const {
  if (samples.empty()) throw Error("trajectory has no samples");
  if (samples.size() == 1 || t <= 0) return samples.front();
  const double pos = t / dt;
  const auto last = samples.size() - 1;
  if (pos >= static_cast<double>(last)) return samples.back();
  const auto k = static_cast<std::size_t>(std::floor(pos));
  const double w = pos - static_cast<double>(k);
  const auto& a = samples[k];
  const auto& b = samples[k + 1];
  return {(1 - w) * a.pose + w * b.pose, (1 - w) * a.velocity + w * b.velocity,
          (1 - w) * a.accel + w * b.accel};
}

void Trajectory::validate() const {
  if (samples.empty()) throw FormatError("no samples");
  double amax = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    if (!s.pose.allFinite() || !s.velocity.allFinite() || !s.accel.allFinite()) {
      throw FormatError("sample " + std::to_string(k) + " is not finite");
    }
    amax = std::max(amax, s.accel.cwiseAbs().maxCoeff());
  }
  const auto at_rest = [](const TrajectorySample& s) {
    return s.velocity.norm() < 1e-9 && s.accel.norm() < 1e-9;
  };
  if (!at_rest(samples.front()) || !at_rest(samples.back())) {
    throw FormatError("trajectory must start and end at rest");
  }
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const Vec3 gap = samples[k + 1].pose - samples[k].pose - dt * samples[k].velocity;
    if (gap.cwiseAbs().maxCoeff() > 0.5 * amax * dt * dt + 1e-9) {
      throw FormatError("samples " + std::to_string(k) + " and " +
                        std::to_string(k + 1) + " are kinematically inconsistent");
    }
  }
}

// ---------------------------------------------------------------------------

TrapezoidProfile::TrapezoidProfile(double distance, double vmax, double amax)
    : distance_(distance), amax_(amax) {
  require_positive(distance, "distance");
  require_positive(vmax, "vmax");
  require_positive(amax, "amax");
  if (distance >= vmax * vmax / amax) {
    v_peak_ = vmax;
    t_accel_ = vmax / amax;
    t_cruise_ = (distance - vmax * vmax / amax) / vmax;
  } else {
    v_peak_ = std::sqrt(distance * amax);
    t_accel_ = v_peak_ / amax;
    t_cruise_ = 0;
  }
}

ProfileSample TrapezoidProfile::eval(double t) const {
  const double t1 = t_accel_;
  const double t2 = t_accel_ + t_cruise_;
  const double T = duration();
  if (t <= 0) return {0, 0, t < 0 ? 0 : (T > 0 ? amax_ : 0)};
  if (t >= T) return {distance_, 0, 0};
  if (t < t1) return {0.5 * amax_ * t * t, amax_ * t, amax_};
  const double s1 = 0.5 * amax_ * t1 * t1;
  if (t < t2) return {s1 + v_peak_ * (t - t1), v_peak_, 0};
  const double tr = T - t;
  return {distance_ - 0.5 * amax_ * tr * tr, amax_ * tr, -amax_};
}

std::vector<ProfileSample> trapezoidal_profile(double distance, double vmax,
                                               double amax, double dt) {
  require_positive(dt, "dt");
  const TrapezoidProfile prof(distance, vmax, amax);
  const auto n = static_cast<std::size_t>(std::ceil(prof.duration() / dt - 1e-12));
  std::vector<ProfileSample> out;
  out.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out.push_back(prof.eval(static_cast<double>(k) * dt));
  out.back() = {distance, 0, 0};
  return out;
}

// ---------------------------------------------------------------------------

double ring_scale(int ring, int n_rings) {
  return 1.0 - static_cast<double>(ring) / static_cast<double>(n_rings);
}

std::vector<Vec2> diamond_vertices(const DiamondOptions& o) {
  require_positive(o.area_w, "area width");
  require_positive(o.area_h, "area height");
  if (o.n_rings < 1) throw Error("n_rings must be >= 1");
  std::vector<Vec2> v;
  for (int ring = 0; ring < o.n_rings; ++ring) {
    const double s = ring_scale(ring, o.n_rings);
    const double hx = 0.5 * s * o.area_w;
    const double hy = 0.5 * s * o.area_h;
    const Vec2 c = o.center;
    v.push_back(c + Vec2(hx, 0));
    v.push_back(c + Vec2(0, hy));
    v.push_back(c + Vec2(-hx, 0));
    v.push_back(c + Vec2(0, -hy));
    v.push_back(c + Vec2(hx, 0));
  }
  return v;
}

Trajectory waypoint_reference(const std::vector<Pose>& waypoints, double vmax,
                              double amax, double dt, double hold) {
  require_positive(dt, "dt");
  if (waypoints.empty()) throw Error("waypoint_reference: no waypoints");

  struct Segment {
    double start;
    Pose from;
    Vec3 dir;
    TrapezoidProfile profile;
  };
  std::vector<Segment> segs;
  double t = std::ceil(std::max(hold, dt) / dt - 1e-9) * dt;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const Vec3 d = waypoints[i + 1] - waypoints[i];
    const double len = d.norm();
    if (len < 1e-12) continue;
    segs.push_back({t, waypoints[i], d / len, TrapezoidProfile(len, vmax, amax)});
    // next move starts on the sample grid so every vertex has a rest sample
    t += std::ceil(segs.back().profile.duration() / dt - 1e-9) * dt;
  }
  const double end = t;

  Trajectory traj;
  traj.dt = dt;
  const auto n = static_cast<std::size_t>(std::ceil(end / dt - 1e-9));
  traj.samples.reserve(n + 1);
  std::size_t seg = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double tk = static_cast<double>(k) * dt;
    while (seg < segs.size() &&
           tk >= segs[seg].start + segs[seg].profile.duration()) {
      ++seg;
    }
    TrajectorySample s;
    if (seg == segs.size()) {
      s.pose = waypoints.back();
    } else if (tk < segs[seg].start) {
      s.pose = segs[seg].from;
    } else {
      const auto p = segs[seg].profile.eval(tk - segs[seg].start);
      s.pose = segs[seg].from + p.s * segs[seg].dir;
      s.velocity = p.ds * segs[seg].dir;
      s.accel = p.dds * segs[seg].dir;
    }
    traj.samples.push_back(s);
  }
  return traj;
}

Trajectory diamond_reference(const DiamondOptions& o) {
  std::vector<Pose> poses;
  for (const Vec2& v : diamond_vertices(o)) poses.emplace_back(0.0, v.x(), v.y());
  return waypoint_reference(poses, o.vmax, o.amax, o.dt, o.hold);
}

// ---------------------------------------------------------------------------

void save_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << kTrajectoryHeader << '\n';
  std::string line;
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    line.clear();
    csv::append(line, static_cast<double>(k) * traj.dt);
    for (int i = 0; i < 3; ++i) csv::append(line, s.pose(i));
    for (int i = 0; i < 3; ++i) csv::append(line, s.velocity(i));
    for (int i = 0; i < 3; ++i) csv::append(line, s.accel(i));
    out << line << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": no samples");
  if (csv::strip_cr(line) != kTrajectoryHeader) {
    throw FormatError(path + ":1: malformed header");
  }
  Trajectory traj;
  std::vector<double> times;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto v = csv::parse_row(line, 10, path, lineno);
    TrajectorySample s;
    s.pose = Vec3(v[1], v[2], v[3]);
    s.velocity = Vec3(v[4], v[5], v[6]);
    s.accel = Vec3(v[7], v[8], v[9]);
    if (!times.empty() && !(v[0] > times.back())) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": non-monotone time");
    }
    times.push_back(v[0]);
    traj.samples.push_back(s);
  }
  if (traj.samples.empty()) throw FormatError(path + ": no samples");
  traj.dt = times.size() > 1 ? times[1] - times[0] : 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double expect = times[0] + static_cast<double>(k) * traj.dt;
    if (std::abs(times[k] - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
      throw FormatError(path + ":" + std::to_string(k + 2) + ": non-uniform time step");
    }
  }
  traj.validate();
  return traj;
}

}  // namespace cdpr
