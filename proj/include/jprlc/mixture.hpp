#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "jprlc/geometry.hpp"

namespace jprlc {

/// Shared isotropic Gaussian mixture plus a uniform outlier class of fixed
/// weight over a support of volume `volume`.
struct MixtureModel {
  Eigen::Matrix3Xd centroids;  // 3 x M, mm
  Eigen::VectorXd variances;   // M, mm^2
  Eigen::VectorXd weights;     // M
  double outlier_weight = 0.0;
  double volume = 1.0;  // mm^3

  Eigen::Index size() const noexcept { return centroids.cols(); }

  /// Throws ConfigError if the weights are off the simplex by more than
  /// `tol`, any variance is below `variance_floor`, or the volume is not positive.
  void validate(double variance_floor = 0.0, double tol = 1e-12) const;
};

using PosteriorTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Responsibilities of every point for every component. For cloud j,
/// `components[j]` is N_j x M and `outlier[j]` holds the uniform-class share;
/// each row plus its outlier entry sums to one.
struct PosteriorMatrix {
  std::vector<PosteriorTable> components;
  std::vector<Eigen::VectorXd> outlier;

  std::size_t cloud_count() const noexcept { return components.size(); }
};

/// Initial model: M centroids on a Fibonacci lattice over the sphere centred
/// at the all-points centroid with half the bounding-sphere radius, equal
/// variances, equal weights (1 - outlier_weight) / M, V from the bounding box.
MixtureModel init_mixture(std::span<const PointCloud> clouds, Eigen::Index m_count,
                          double outlier_weight, double initial_variance);

/// Deterministic, seedless equal-area points on the unit sphere.
Eigen::Matrix3Xd fibonacci_sphere(Eigen::Index count);

/// (2 pi s)^(-3/2) exp(-|x - y|^2 / (2 s)). Throws NumericError if s <= 0.
double gaussian_density(const Point3& x, const Point3& y, double variance);

/// Posteriors of each transformed point, evaluated with log-sum-exp over the
/// M Gaussian terms and the constant outlier term.
PosteriorMatrix e_step(std::span<const PointCloud> clouds,
                       std::span<const RigidTransform> transforms, const MixtureModel& model);

}  // namespace jprlc
