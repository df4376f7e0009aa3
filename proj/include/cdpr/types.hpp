#pragma once

#include <Eigen/Core>

namespace cdpr {

inline constexpr int kStateDim = 6;
inline constexpr int kControlDim = 4;
inline constexpr int kMeasDim = 8;
inline constexpr int kNumCables = 4;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat8 = Eigen::Matrix<double, 8, 8>;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat43 = Eigen::Matrix<double, 4, 3>;
using Mat64 = Eigen::Matrix<double, 6, 4>;
using Mat46 = Eigen::Matrix<double, 4, 6>;
using Mat68 = Eigen::Matrix<double, 6, 8>;
using Mat86 = Eigen::Matrix<double, 8, 6>;

/// Planar pose ordered [theta, x, y].
using Pose = Vec3;

/// LQG state: [theta, x, y, dtheta, dx, dy].
struct PlatformState {
  Vec6 x = Vec6::Zero();

  Pose pose() const { return x.head<3>(); }
  Vec3 velocity() const { return x.tail<3>(); }

  static PlatformState from(const Pose& pose, const Vec3& vel) {
    PlatformState s;
    s.x << pose, vel;
    return s;
  }
};

}  // namespace cdpr
