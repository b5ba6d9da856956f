#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

namespace jprlc {

// Coordinates are millimeters throughout.
using Point3 = Eigen::Vector3d;

/// An ordered, non-empty set of finite 3D points. Point indices are stable
/// identities: the neighbor graph and posterior tables are keyed on them.
class PointCloud {
 public:
  PointCloud() = default;
  /// Throws ConfigError if `points` is empty or holds a non-finite coordinate.
  explicit PointCloud(Eigen::Matrix3Xd points);
  explicit PointCloud(const std::vector<Point3>& points);

  Eigen::Index size() const noexcept { return points_.cols(); }
  bool empty() const noexcept { return points_.cols() == 0; }
  Point3 operator[](Eigen::Index i) const { return points_.col(i); }
  const Eigen::Matrix3Xd& points() const noexcept { return points_; }

  Point3 centroid() const;

 private:
  Eigen::Matrix3Xd points_;
};

using PointCloudSet = std::vector<PointCloud>;

/// Proper rigid motion p -> R p + t.
class RigidTransform {
 public:
  static constexpr double kTolerance = 1e-9;

  RigidTransform() = default;  // identity
  /// Throws ConfigError unless R^T R = I and det(R) = +1 within kTolerance.
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Eigen::Vector3d& t) {
    return {Eigen::Matrix3d::Identity(), t};
  }

  const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }

  Eigen::Matrix4d homogeneous() const;

  static bool is_rotation(const Eigen::Matrix3d& r, double tol = kTolerance);

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

Point3 apply_transform(const RigidTransform& t, const Point3& p);
/// All columns of `points` mapped by `t`.
Eigen::Matrix3Xd apply_transform(const RigidTransform& t, const Eigen::Matrix3Xd& points);
PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);

/// (a ∘ b)(p) = a(b(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);

struct BoundingSphere {
  Point3 center;
  double radius;
};

/// Center is the centroid of every point of every cloud; radius the largest
/// distance from it.
BoundingSphere bounding_sphere(std::span<const PointCloud> clouds);

/// Axis-aligned box volume (mm^3). A zero-extent side is replaced by
/// 1e-6 x the largest extent so 1/V stays finite for planar data.
double bounding_box_volume(std::span<const PointCloud> clouds);

/// Length of the axis-aligned bounding box diagonal.
double bounding_box_diagonal(std::span<const PointCloud> clouds);

/// Root-mean-square point displacement between calculated and ground-truth
/// poses for clouds 2..N, both expressed relative to cloud 1
/// (T_rel^j = T_1^-1 ∘ T_j). Throws ConfigError on length mismatch.
double rmse(std::span<const RigidTransform> calculated,
            std::span<const RigidTransform> ground_truth,
            std::span<const PointCloud> clouds);

}  // namespace jprlc
