#include "jprlc/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "jprlc/error.hpp"

namespace jprlc {

void MixtureModel::validate(double variance_floor, double tol) const {
  const Eigen::Index m = size();
  if (m < 1) throw ConfigError("mixture has no components");
  if (variances.size() != m || weights.size() != m)
    throw ConfigError("mixture parameter arrays disagree in length");
  if (!(outlier_weight >= 0.0 && outlier_weight < 1.0))
    throw ConfigError("outlier weight must lie in [0, 1)");
  if (!(volume > 0.0) || !std::isfinite(volume)) throw ConfigError("support volume must be positive");
  if ((weights.array() < 0.0).any()) throw ConfigError("negative component weight");
  if (std::abs(weights.sum() + outlier_weight - 1.0) > tol)
    throw ConfigError("component weights do not sum to 1 - outlier_weight");
  if (!(variances.array() > 0.0).all() || (variances.array() < variance_floor).any())
    throw ConfigError("component variance below floor");
  if (!centroids.allFinite()) throw ConfigError("non-finite centroid");
}

Eigen::Matrix3Xd fibonacci_sphere(Eigen::Index count) {
  Eigen::Matrix3Xd pts(3, count);
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (Eigen::Index k = 0; k < count; ++k) {
    const double z = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * static_cast<double>(k);
    pts.col(k) << r * std::cos(phi), r * std::sin(phi), z;
  }
  return pts;
}

MixtureModel init_mixture(std::span<const PointCloud> clouds, Eigen::Index m_count,
                          double outlier_weight, double initial_variance) {
  if (clouds.empty()) throw ConfigError("init_mixture: empty point cloud set");
  if (m_count < 1) throw ConfigError("init_mixture: need at least one component");
  if (!(outlier_weight >= 0.0 && outlier_weight < 1.0))
    throw ConfigError("init_mixture: outlier weight must lie in [0, 1)");
  if (!(initial_variance > 0.0)) throw ConfigError("init_mixture: initial variance must be positive");

  const BoundingSphere sphere = bounding_sphere(clouds);
  MixtureModel model;
  model.centroids = (0.5 * sphere.radius * fibonacci_sphere(m_count)).colwise() + sphere.center;
  model.variances = Eigen::VectorXd::Constant(m_count, initial_variance);
  model.weights =
      Eigen::VectorXd::Constant(m_count, (1.0 - outlier_weight) / static_cast<double>(m_count));
  model.outlier_weight = outlier_weight;
  model.volume = bounding_box_volume(clouds);
  return model;
}

double gaussian_density(const Point3& x, const Point3& y, double variance) {
  if (!(variance > 0.0)) throw NumericError("gaussian_density: variance must be positive");
  const double d2 = (x - y).squaredNorm();
  return std::pow(2.0 * std::numbers::pi * variance, -1.5) * std::exp(-d2 / (2.0 * variance));
}

PosteriorMatrix e_step(std::span<const PointCloud> clouds,
                       std::span<const RigidTransform> transforms, const MixtureModel& model) {
  if (transforms.size() != clouds.size())
    throw ConfigError("e_step: transform count does not match cloud count");
  const Eigen::Index m = model.size();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  // log(pi_m) - 1.5 log(2 pi s_m) and 1 / (2 s_m), per component.
  Eigen::VectorXd log_prefix(m), inv_two_var(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    if (!(model.variances[c] > 0.0)) throw NumericError("e_step: non-positive variance");
    log_prefix[c] = (model.weights[c] > 0.0 ? std::log(model.weights[c]) : kNegInf) -
                    1.5 * std::log(2.0 * std::numbers::pi * model.variances[c]);
    inv_two_var[c] = 0.5 / model.variances[c];
  }
  const double log_outlier =
      model.outlier_weight > 0.0 ? std::log(model.outlier_weight / model.volume) : kNegInf;

  PosteriorMatrix post;
  post.components.resize(clouds.size());
  post.outlier.resize(clouds.size());
  Eigen::VectorXd logs(m);
  for (std::size_t j = 0; j < clouds.size(); ++j) {
    const Eigen::Matrix3Xd pts = apply_transform(transforms[j], clouds[j].points());
    const Eigen::Index n = pts.cols();
    PosteriorTable& table = post.components[j];
    Eigen::VectorXd& out = post.outlier[j];
    table.resize(n, m);
    out.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Vector3d p = pts.col(i);
      double top = log_outlier;
      for (Eigen::Index c = 0; c < m; ++c) {
        logs[c] = log_prefix[c] - (model.centroids.col(c) - p).squaredNorm() * inv_two_var[c];
        top = std::max(top, logs[c]);
      }
      if (!std::isfinite(top))
        throw NumericError("e_step: zero posterior denominator at cloud " + std::to_string(j) +
                           ", point " + std::to_string(i));
      double total = 0.0;
      for (Eigen::Index c = 0; c < m; ++c) {
        logs[c] = std::exp(logs[c] - top);
        total += logs[c];
      }
      const double out_term = std::exp(log_outlier - top);
      total += out_term;
      const double inv = 1.0 / total;
      for (Eigen::Index c = 0; c < m; ++c) table(i, c) = logs[c] * inv;
      out[i] = out_term * inv;
    }
  }
  return post;
}

}  // namespace jprlc
