#include "jprlc/geometry.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "jprlc/error.hpp"

namespace jprlc {

PointCloud::PointCloud(Eigen::Matrix3Xd points) : points_(std::move(points)) {
  if (points_.cols() == 0) throw ConfigError("point cloud is empty");
  if (!points_.allFinite()) throw ConfigError("point cloud has non-finite coordinates");
}

PointCloud::PointCloud(const std::vector<Point3>& points) {
  Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = points[i];
  *this = PointCloud(std::move(m));
}

Point3 PointCloud::centroid() const { return points_.rowwise().mean(); }

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation,
                               const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!translation_.allFinite()) throw ConfigError("translation is not finite");
  if (!is_rotation(rotation_)) throw ConfigError("matrix is not a proper rotation");
}

bool RigidTransform::is_rotation(const Eigen::Matrix3d& r, double tol) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Eigen::Matrix4d RigidTransform::homogeneous() const {
  Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
  h.topLeftCorner<3, 3>() = rotation_;
  h.topRightCorner<3, 1>() = translation_;
  return h;
}

Point3 apply_transform(const RigidTransform& t, const Point3& p) {
  return t.rotation() * p + t.translation();
}

Eigen::Matrix3Xd apply_transform(const RigidTransform& t, const Eigen::Matrix3Xd& points) {
  return (t.rotation() * points).colwise() + t.translation();
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  return PointCloud(apply_transform(t, cloud.points()));
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

RigidTransform inverse(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation().transpose();
  return {rt, -(rt * t.translation())};
}

namespace {

struct Extents {
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(-std::numeric_limits<double>::infinity());
};

Extents extents(std::span<const PointCloud> clouds) {
  Extents e;
  bool any = false;
  for (const auto& c : clouds) {
    if (c.empty()) continue;
    e.lo = e.lo.cwiseMin(c.points().rowwise().minCoeff());
    e.hi = e.hi.cwiseMax(c.points().rowwise().maxCoeff());
    any = true;
  }
  if (!any) throw ConfigError("point cloud set is empty");
  return e;
}

}  // namespace

BoundingSphere bounding_sphere(std::span<const PointCloud> clouds) {
  Point3 sum = Point3::Zero();
  Eigen::Index count = 0;
  for (const auto& c : clouds) {
    sum += c.points().rowwise().sum();
    count += c.size();
  }
  if (count == 0) throw ConfigError("point cloud set is empty");
  const Point3 center = sum / static_cast<double>(count);
  double r2 = 0.0;
  for (const auto& c : clouds) {
    if (c.empty()) continue;
    r2 = std::max(r2, (c.points().colwise() - center).colwise().squaredNorm().maxCoeff());
  }
  return {center, std::sqrt(r2)};
}

double bounding_box_volume(std::span<const PointCloud> clouds) {
  const Extents e = extents(clouds);
  Eigen::Vector3d side = e.hi - e.lo;
  const double largest = side.maxCoeff();
  // A single repeated point has no scale at all; fall back to a unit cube.
  const double floor = largest > 0.0 ? 1e-6 * largest : 1.0;
  for (int k = 0; k < 3; ++k)
    if (side[k] <= 0.0) side[k] = floor;
  return side.prod();
}

double bounding_box_diagonal(std::span<const PointCloud> clouds) {
  const Extents e = extents(clouds);
  return (e.hi - e.lo).norm();
}

double rmse(std::span<const RigidTransform> calculated,
            std::span<const RigidTransform> ground_truth,
            std::span<const PointCloud> clouds) {
  if (calculated.size() != clouds.size() || ground_truth.size() != clouds.size())
    throw ConfigError("rmse: expected " + std::to_string(clouds.size()) + " poses, got " +
                      std::to_string(calculated.size()) + " calculated and " +
                      std::to_string(ground_truth.size()) + " ground-truth");
  if (clouds.size() < 2) throw ConfigError("rmse: need at least two clouds");

  const RigidTransform cal_ref = inverse(calculated[0]);
  const RigidTransform gt_ref = inverse(ground_truth[0]);
  double sum = 0.0;
  Eigen::Index count = 0;
  for (std::size_t j = 1; j < clouds.size(); ++j) {
    const RigidTransform cal = compose(cal_ref, calculated[j]);
    const RigidTransform gt = compose(gt_ref, ground_truth[j]);
    const Eigen::Matrix3Xd diff =
        apply_transform(cal, clouds[j].points()) - apply_transform(gt, clouds[j].points());
    sum += diff.colwise().squaredNorm().sum();
    count += clouds[j].size();
  }
  if (count == 0) return 0.0;
  return std::sqrt(sum / static_cast<double>(count));
}

}  // namespace jprlc
